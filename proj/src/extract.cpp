#include "vtv/extract.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "vtv/error.hpp"
#include "vtv/io/csv.hpp"
#include "vtv/stats/analysis.hpp"

namespace vtv {

namespace {

const std::vector<std::string> kFilesHeader{"file_id", "speaker_id", "utterance_id", "tv_csv"};

}  // namespace

std::vector<FileRecord> parse_files_csv(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kFilesHeader, "files CSV");
  std::vector<FileRecord> out;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    if (!seen.insert(row[0]).second) {
      throw Error(ErrorKind::Validation, "duplicate file_id '" + row[0] + "' in files CSV");
    }
    out.push_back({row[0], row[1], row[2], row[3]});
  }
  return out;
}

std::string write_files_csv(std::span<const FileRecord> files) {
  io::CsvTable t;
  t.header = kFilesHeader;
  for (const auto& f : files) t.rows.push_back({f.file_id, f.speaker_id, f.utterance_id, f.tv_csv});
  return io::write_csv(t);
}

ExtractResult extract_observations(std::span<const FileRecord> files,
                                   const std::map<std::string, TractVariableMatrix>& matrices,
                                   std::span<const PhoneInterval> alignment,
                                   std::span<const ConsensusLabel> labels,
                                   const ExtractOptions& options) {
  std::map<std::string, const FileRecord*> file_index;
  for (const auto& f : files) file_index[f.file_id] = &f;
  std::map<std::string, const ConsensusLabel*> label_index;
  for (const auto& l : labels) label_index[l.file_id] = &l;

  // Group sizes per target family, from the files whose target phone is
  // labeled.
  ExtractResult result;
  std::map<Target, std::vector<ConsensusLabel>> by_family;
  for (const auto& iv : alignment) {
    const auto fam = stats::phone_family(iv.phone);
    if (!fam || iv.phone != stats::correct_phone(*fam)) continue;
    const auto it = label_index.find(iv.file_id);
    if (it != label_index.end()) by_family[*fam].push_back(*it->second);
  }
  std::map<Target, std::set<std::string>> dropped;
  for (auto& [fam, ls] : by_family) {
    const GroupFilterResult g = filter_min_count(ls, options.min_group_size);
    for (const auto& [sub, n] : g.counts) {
      result.group_counts[fmt::format("{}:{}", to_string(fam), sub)] = n;
    }
    for (const auto& sub : g.dropped) {
      result.dropped_groups.push_back(fmt::format("{}:{}", to_string(fam), sub));
    }
    dropped[fam] = g.dropped;
  }

  std::vector<PhoneInterval> ordered(alignment.begin(), alignment.end());
  std::stable_sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
    return a.file_id != b.file_id ? a.file_id < b.file_id : a.start < b.start;
  });
  for (const auto& iv : ordered) {
    const auto fam = stats::phone_family(iv.phone);
    if (!fam) continue;
    const bool is_target = iv.phone == stats::correct_phone(*fam);
    const bool is_control = !is_target && std::ranges::count(stats::control_phones(*fam), iv.phone) > 0;
    if (!is_target && !is_control) continue;

    std::string phone = iv.phone;
    std::optional<double> score;
    if (is_target) {
      const auto it = label_index.find(iv.file_id);
      if (it == label_index.end() || it->second->outcome == Outcome::Excluded) {
        ++result.excluded;
        continue;
      }
      const ConsensusLabel& l = *it->second;
      if (l.outcome == Outcome::ErrorSubtype) {
        if (dropped[*fam].contains(l.subtype)) {
          ++result.dropped;
          continue;
        }
        const auto mapped = stats::error_phone(*fam, l.subtype);
        if (!mapped) {
          ++result.excluded;
          continue;
        }
        phone = *mapped;
      }
      score = l.mean_score;
    }
    const auto f_it = file_index.find(iv.file_id);
    if (f_it == file_index.end()) {
      throw Error(ErrorKind::MissingData, "alignment references unknown file '" + iv.file_id + "'");
    }
    const auto m_it = matrices.find(iv.file_id);
    if (m_it == matrices.end()) {
      throw Error(ErrorKind::MissingData, "no tract-variable series for file '" + iv.file_id + "'");
    }
    PhoneObservation o = make_observation(m_it->second, iv, f_it->second->speaker_id,
                                          f_it->second->utterance_id, options.keep_source, score);
    o.phone = phone;
    result.observations.push_back(std::move(o));
  }
  require_unique_observations(result.observations);
  return result;
}

}  // namespace vtv
