#include "vtv/ratings.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include <fmt/format.h>

#include "vtv/error.hpp"
#include "vtv/io/csv.hpp"
#include "vtv/random.hpp"

namespace vtv {

namespace {

constexpr std::array<std::string_view, 5> kRSubtypes{"w-error", "l-error", "vowel-error",
                                                     "omitted", "other"};
constexpr std::array<std::string_view, 7> kSSubtypes{"dentalized", "lateralized", "palatalized",
                                                     "affricate",  "stopped",     "omitted",
                                                     "other"};

const std::vector<std::string> kRatingsHeader{"file_id", "rater_id",   "score",   "subtype",
                                              "flags",   "lengthened", "comment", "replay_count"};
const std::vector<std::string> kConsensusHeader{"file_id", "outcome", "subtype", "mean_score",
                                                "n_raters"};

bool binary_correct(int score) { return score >= 4; }

}  // namespace

std::string_view to_string(Target t) noexcept { return t == Target::R ? "r" : "s"; }

Target parse_target(std::string_view text) {
  if (text == "r") return Target::R;
  if (text == "s") return Target::S;
  throw Error(ErrorKind::Config, fmt::format("target must be 'r' or 's', got '{}'", text));
}

std::span<const std::string_view> subtype_labels(Target t) noexcept {
  if (t == Target::R) return kRSubtypes;
  return kSSubtypes;
}

std::string_view to_string(RatingFlag f) noexcept {
  switch (f) {
    case RatingFlag::JunkAudio: return "junk_audio";
    case RatingFlag::PartialAudio: return "partial_audio";
    case RatingFlag::TranscriptMismatch: return "transcript_mismatch";
  }
  return "junk_audio";
}

RatingFlag parse_flag(std::string_view text) {
  for (RatingFlag f : {RatingFlag::JunkAudio, RatingFlag::PartialAudio,
                       RatingFlag::TranscriptMismatch}) {
    if (to_string(f) == text) return f;
  }
  throw Error(ErrorKind::Validation, fmt::format("unknown rating flag '{}'", text));
}

void validate_rating(const RatingRecord& r, std::optional<Target> target) {
  const auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::Validation,
                fmt::format("rating of '{}' by '{}': {}", r.file_id, r.rater_id, why));
  };
  if (r.file_id.empty()) fail("file_id is empty");
  if (r.rater_id.empty()) fail("rater_id is empty");
  if (r.score < 1 || r.score > 5) fail(fmt::format("score {} outside 1..5", r.score));
  if (r.score == 1 && !r.subtype) fail("score 1 requires a subtype");
  if (r.score >= 4 && r.subtype) fail("scores 4 and 5 take no subtype");
  if (r.subtype && r.subtype->empty()) fail("subtype is empty");
  if (r.replay_count < 0 || r.replay_count > kMaxReplays) {
    fail(fmt::format("replay_count {} outside 0..{}", r.replay_count, kMaxReplays));
  }
  if (target && r.subtype) {
    const auto labels = subtype_labels(*target);
    if (std::find(labels.begin(), labels.end(), *r.subtype) == labels.end()) {
      fail(fmt::format("subtype '{}' is not defined for target {}", *r.subtype,
                       to_string(*target)));
    }
  }
}

std::vector<RatingRecord> latest_per_rater(std::span<const RatingRecord> records) {
  std::map<std::pair<std::string, std::string>, std::size_t> last;
  for (std::size_t i = 0; i < records.size(); ++i) {
    last[{records[i].rater_id, records[i].file_id}] = i;
  }
  std::vector<std::size_t> keep;
  keep.reserve(last.size());
  for (const auto& [key, idx] : last) keep.push_back(idx);
  std::sort(keep.begin(), keep.end());
  std::vector<RatingRecord> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(records[i]);
  return out;
}

ConsensusLabel consensus(std::span<const RatingRecord> ratings, const ConsensusOptions& options) {
  if (ratings.empty()) throw Error(ErrorKind::EmptyInput, "no ratings for file");
  const std::vector<RatingRecord> rs = latest_per_rater(ratings);
  ConsensusLabel out;
  out.file_id = rs.front().file_id;
  out.n_raters = rs.size();

  double sum = 0.0;
  std::size_t unflagged = 0;
  for (const auto& r : rs) {
    if (r.flags.empty()) {
      sum += r.score;
      ++unflagged;
    }
  }
  if (unflagged > 0) out.mean_score = sum / static_cast<double>(unflagged);

  const auto excluded = [&](ExclusionReason why) {
    out.outcome = Outcome::Excluded;
    out.reason = why;
    return out;
  };
  if (std::any_of(rs.begin(), rs.end(), [](const RatingRecord& r) { return !r.flags.empty(); })) {
    return excluded(ExclusionReason::Flagged);
  }
  if (std::any_of(rs.begin(), rs.end(),
                  [](const RatingRecord& r) { return r.subtype && *r.subtype == kOmitted; })) {
    return excluded(ExclusionReason::Omission);
  }
  if (std::all_of(rs.begin(), rs.end(), [](const RatingRecord& r) { return r.score == 5; })) {
    out.outcome = Outcome::CorrectUnanimous;
    return out;
  }
  if (*out.mean_score < 5.0) {
    std::map<std::string, std::size_t> votes;
    for (const auto& r : rs) {
      if (r.subtype) ++votes[*r.subtype];
    }
    const std::size_t n = rs.size();
    std::vector<std::string> winners;
    for (const auto& [label, count] : votes) {
      const bool majority = options.strict_majority ? 2 * count > n : 2 * count >= n;
      if (count >= 2 && majority) winners.push_back(label);
    }
    if (winners.size() == 1) {
      out.outcome = Outcome::ErrorSubtype;
      out.subtype = winners.front();
      return out;
    }
  }
  return excluded(ExclusionReason::NoConsensus);
}

std::vector<ConsensusLabel> consensus_all(std::span<const RatingRecord> ratings,
                                          const ConsensusOptions& options) {
  std::map<std::string, std::vector<RatingRecord>> by_file;
  for (const auto& r : ratings) by_file[r.file_id].push_back(r);
  std::vector<ConsensusLabel> out;
  out.reserve(by_file.size());
  for (const auto& [file, rs] : by_file) out.push_back(consensus(rs, options));
  return out;
}

GroupFilterResult filter_min_count(std::span<const ConsensusLabel> labels, std::size_t threshold) {
  GroupFilterResult res;
  for (const auto& l : labels) {
    if (l.outcome == Outcome::ErrorSubtype) ++res.counts[l.subtype];
  }
  for (const auto& [label, count] : res.counts) {
    if (count < threshold) res.dropped.insert(label);
  }
  for (const auto& l : labels) {
    if (l.outcome == Outcome::ErrorSubtype && res.dropped.contains(l.subtype)) continue;
    res.labels.push_back(l);
  }
  return res;
}

std::size_t module_item_count(int module_id) {
  if (module_id >= 1 && module_id <= 3) return 25;
  if (module_id == 4 || module_id == kMaintenanceModule) return 50;
  throw Error(ErrorKind::Lookup, fmt::format("unknown training module {}", module_id));
}

ModuleResult score_module(std::span<const int> rater, std::span<const int> expert, int module_id) {
  if (rater.size() != expert.size()) {
    throw Error(ErrorKind::Shape, fmt::format("{} answers for {} expert scores", rater.size(),
                                              expert.size()));
  }
  if (rater.empty()) throw Error(ErrorKind::EmptyInput, "module has no items");
  std::size_t binary = 0, within = 0;
  for (std::size_t i = 0; i < rater.size(); ++i) {
    for (int s : {rater[i], expert[i]}) {
      if (s < 1 || s > 5) throw Error(ErrorKind::Validation, fmt::format("score {} outside 1..5", s));
    }
    if (binary_correct(rater[i]) == binary_correct(expert[i])) ++binary;
    if (std::abs(rater[i] - expert[i]) <= 1) ++within;
  }
  const std::size_t n = rater.size();
  ModuleResult res;
  res.module_id = module_id;
  res.item_count = n;
  res.binary_agreement_pct = 100.0 * static_cast<double>(binary) / static_cast<double>(n);
  res.within_one_pct = 100.0 * static_cast<double>(within) / static_cast<double>(n);
  res.passed = 10 * binary >= 9 * n && 10 * within >= 9 * n;
  return res;
}

TrainingState advance_training(const TrainingState& state, const ModuleResult& result) {
  TrainingState next = state;
  if (!result.passed) return next;
  if (!state.certified) {
    if (state.module_id >= 4) {
      next.certified = true;
      next.module_id = kMaintenanceModule;
      next.batches_completed = 0;
      next.maintenance_due = false;
    } else {
      next.module_id = state.module_id + 1;
    }
    return next;
  }
  if (state.maintenance_due) {
    next.maintenance_due = false;
    next.batches_completed = 0;
  }
  return next;
}

TrainingState record_batch_completed(const TrainingState& state) {
  TrainingState next = state;
  if (!state.certified) return next;
  ++next.batches_completed;
  if (next.batches_completed >= kBatchesPerMaintenance) next.maintenance_due = true;
  return next;
}

std::vector<std::vector<BatchItem>> make_batches(std::span<const PoolFile> pool, std::size_t size,
                                                 std::uint64_t seed) {
  if (pool.empty()) throw Error(ErrorKind::EmptyInput, "rating pool is empty");
  if (size < 1) throw Error(ErrorKind::Config, "batch size must be >= 1");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 301));
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<std::vector<BatchItem>> batches;
  for (std::size_t start = 0; start < order.size(); start += size) {
    std::vector<BatchItem> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + size); ++i) {
      const PoolFile& f = pool[order[i]];
      batch.push_back({f.file_id, f.word, f.audio_ref});
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<BatchItem> make_batch(std::span<const PoolFile> pool, std::size_t size,
                                  std::uint64_t seed) {
  return make_batches(pool, size, seed).front();
}

std::string ratings_csv_header() { return fmt::format("{}\n", fmt::join(kRatingsHeader, ",")); }

std::vector<RatingRecord> parse_ratings(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kRatingsHeader, "ratings CSV");
  std::vector<RatingRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string ctx = fmt::format("ratings row {}", i + 1);
    RatingRecord r;
    r.file_id = row[0];
    r.rater_id = row[1];
    r.score = static_cast<int>(io::parse_int(row[2], ctx + " score"));
    if (!row[3].empty()) r.subtype = row[3];
    std::string_view flags = row[4];
    while (!flags.empty()) {
      const auto cut = flags.find(';');
      r.flags.insert(parse_flag(flags.substr(0, cut)));
      flags = cut == std::string_view::npos ? std::string_view() : flags.substr(cut + 1);
    }
    if (row[5] != "0" && row[5] != "1") {
      throw Error(ErrorKind::Parse, ctx + ": lengthened must be 0 or 1");
    }
    r.lengthened = row[5] == "1";
    r.comment = row[6];
    r.replay_count = static_cast<int>(io::parse_int(row[7], ctx + " replay_count"));
    out.push_back(std::move(r));
  }
  return out;
}

std::string write_ratings(std::span<const RatingRecord> records) {
  io::CsvTable t;
  t.header = kRatingsHeader;
  for (const auto& r : records) {
    std::vector<std::string_view> flags;
    for (RatingFlag f : r.flags) flags.push_back(to_string(f));
    t.rows.push_back({r.file_id, r.rater_id, std::to_string(r.score), r.subtype.value_or(""),
                      fmt::format("{}", fmt::join(flags, ";")), r.lengthened ? "1" : "0",
                      r.comment, std::to_string(r.replay_count)});
  }
  return io::write_csv(t);
}

std::string_view to_string(ExclusionReason r) noexcept {
  switch (r) {
    case ExclusionReason::Flagged: return "flagged";
    case ExclusionReason::Omission: return "omission";
    case ExclusionReason::NoConsensus: return "no_consensus";
  }
  return "no_consensus";
}

std::string write_consensus(std::span<const ConsensusLabel> labels) {
  io::CsvTable t;
  t.header = kConsensusHeader;
  for (const auto& l : labels) {
    std::string outcome, sub;
    switch (l.outcome) {
      case Outcome::CorrectUnanimous: outcome = "correct"; break;
      case Outcome::ErrorSubtype: outcome = "error"; sub = l.subtype; break;
      case Outcome::Excluded: outcome = "excluded"; sub = std::string(to_string(l.reason)); break;
    }
    t.rows.push_back({l.file_id, outcome, sub,
                      l.mean_score ? io::format_double(*l.mean_score) : std::string(),
                      std::to_string(l.n_raters)});
  }
  return io::write_csv(t);
}

std::vector<ConsensusLabel> parse_consensus(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kConsensusHeader, "consensus CSV");
  std::vector<ConsensusLabel> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string ctx = fmt::format("consensus row {}", i + 1);
    ConsensusLabel l;
    l.file_id = row[0];
    if (row[1] == "correct") {
      l.outcome = Outcome::CorrectUnanimous;
    } else if (row[1] == "error") {
      l.outcome = Outcome::ErrorSubtype;
      l.subtype = row[2];
    } else if (row[1] == "excluded") {
      l.outcome = Outcome::Excluded;
      if (row[2] == "flagged") {
        l.reason = ExclusionReason::Flagged;
      } else if (row[2] == "omission") {
        l.reason = ExclusionReason::Omission;
      } else if (row[2] == "no_consensus") {
        l.reason = ExclusionReason::NoConsensus;
      } else {
        throw Error(ErrorKind::Parse, ctx + ": unknown exclusion reason '" + row[2] + "'");
      }
    } else {
      throw Error(ErrorKind::Parse, ctx + ": unknown outcome '" + row[1] + "'");
    }
    if (!row[3].empty()) l.mean_score = io::parse_double(row[3], ctx + " mean_score");
    l.n_raters = static_cast<std::size_t>(io::parse_int(row[4], ctx + " n_raters"));
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace vtv
