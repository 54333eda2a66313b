#include "vtv/segments.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "vtv/error.hpp"
#include "vtv/io/csv.hpp"

namespace vtv {

namespace {

const std::vector<std::string> kAlignmentHeader{"file_id", "phone", "start_s", "end_s"};
const std::vector<std::string> kObservationHeader{
    "file_id", "speaker_id", "utterance_id", "phone", "LA",  "LP",         "TTCL",
    "TTCD",    "TBCL",       "TBCD",         "PER",   "APER", "F0", "mean_score"};

constexpr double kIndexSlack = 1e-9;

std::size_t boundary_index(double seconds) {
  return static_cast<std::size_t>(std::ceil(seconds * kTvSampleRate - kIndexSlack));
}

}  // namespace

std::vector<PhoneInterval> parse_alignment(std::string_view text,
                                           const std::set<std::string>& inventory) {
  io::CsvTable t = io::parse_csv(text);
  if (t.header != kAlignmentHeader) {
    if (t.header.size() != kAlignmentHeader.size()) {
      throw Error(ErrorKind::Parse, "alignment rows need 4 fields: file_id,phone,start_s,end_s");
    }
    t.rows.insert(t.rows.begin(), t.header);
  }
  std::vector<PhoneInterval> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    PhoneInterval iv{row[0], row[1],
                     io::parse_double(row[2], fmt::format("alignment row {} start", r + 1)),
                     io::parse_double(row[3], fmt::format("alignment row {} end", r + 1))};
    if (iv.start < 0.0 || iv.end <= iv.start) {
      throw Error(ErrorKind::MalformedInterval,
                  fmt::format("{} {}: end {} must exceed start {} >= 0", iv.file_id, iv.phone,
                              iv.end, iv.start));
    }
    if (!inventory.empty() && !inventory.contains(iv.phone)) {
      throw Error(ErrorKind::Validation,
                  fmt::format("{}: phone '{}' is not in the inventory", iv.file_id, iv.phone));
    }
    out.push_back(std::move(iv));
  }
  std::stable_sort(out.begin(), out.end(), [](const PhoneInterval& a, const PhoneInterval& b) {
    return a.file_id != b.file_id ? a.file_id < b.file_id : a.start < b.start;
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].file_id == out[i - 1].file_id && out[i].start < out[i - 1].end) {
      throw Error(ErrorKind::Overlap,
                  fmt::format("{}: interval {} [{}, {}) overlaps {} [{}, {})", out[i].file_id,
                              out[i].phone, out[i].start, out[i].end, out[i - 1].phone,
                              out[i - 1].start, out[i - 1].end));
    }
  }
  return out;
}

std::string write_alignment(const std::vector<PhoneInterval>& intervals) {
  io::CsvTable t;
  t.header = kAlignmentHeader;
  for (const auto& iv : intervals) {
    t.rows.push_back({iv.file_id, iv.phone, io::format_double(iv.start), io::format_double(iv.end)});
  }
  return io::write_csv(t);
}

SampleWindow sample_window(const PhoneInterval& interval, std::size_t frames) {
  if (interval.start < 0.0 || interval.end <= interval.start) {
    throw Error(ErrorKind::MalformedInterval, "interval end must exceed start");
  }
  const SampleWindow w{boundary_index(interval.start), boundary_index(interval.end)};
  if (w.last > frames) {
    throw Error(ErrorKind::OutOfRange,
                fmt::format("{} {}: interval ends at sample {} but the matrix has {}",
                            interval.file_id, interval.phone, w.last, frames));
  }
  if (w.last <= w.first) {
    throw Error(ErrorKind::EmptyWindow,
                fmt::format("{} {}: [{}, {}) selects no 100 Hz samples", interval.file_id,
                            interval.phone, interval.start, interval.end));
  }
  return w;
}

std::array<double, kTvChannelCount> extract_phone_tv(const TractVariableMatrix& matrix,
                                                     const PhoneInterval& interval) {
  const SampleWindow w = sample_window(interval, matrix.frames);
  std::array<double, kTvChannelCount> means{};
  const double n = static_cast<double>(w.last - w.first);
  for (std::size_t c = 0; c < kTvChannelCount; ++c) {
    double s = 0.0;
    for (std::size_t i = w.first; i < w.last; ++i) s += matrix.at(c, i);
    means[c] = s / n;
  }
  return means;
}

PhoneObservation make_observation(const TractVariableMatrix& matrix,
                                  const PhoneInterval& interval, std::string speaker_id,
                                  std::string utterance_id, bool keep_source,
                                  std::optional<double> mean_score) {
  const auto means = extract_phone_tv(matrix, interval);
  PhoneObservation o;
  o.file_id = interval.file_id;
  o.speaker_id = std::move(speaker_id);
  o.utterance_id = std::move(utterance_id);
  o.phone = interval.phone;
  for (std::size_t c = 0; c < kOralChannelCount; ++c) o.tv[c] = means[c];
  if (keep_source) {
    o.source = std::array<double, 3>{means[static_cast<std::size_t>(tv_channel_index("PER"))],
                                     means[static_cast<std::size_t>(tv_channel_index("APER"))],
                                     means[static_cast<std::size_t>(tv_channel_index("F0"))]};
  }
  o.mean_score = mean_score;
  return o;
}

std::vector<PhoneObservation> parse_observations(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kObservationHeader, "observation CSV");
  std::vector<PhoneObservation> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto num = [&](std::size_t c) {
      return io::parse_double(row[c], fmt::format("observation row {} column {}", r + 1,
                                                  kObservationHeader[c]));
    };
    PhoneObservation o{row[0], row[1], row[2], row[3], {}, std::nullopt, std::nullopt};
    for (std::size_t c = 0; c < kOralChannelCount; ++c) o.tv[c] = num(4 + c);
    const bool any_source = !row[10].empty() || !row[11].empty() || !row[12].empty();
    if (any_source) o.source = std::array<double, 3>{num(10), num(11), num(12)};
    if (!row[13].empty()) o.mean_score = num(13);
    out.push_back(std::move(o));
  }
  return out;
}

std::string write_observations(const std::vector<PhoneObservation>& obs) {
  io::CsvTable t;
  t.header = kObservationHeader;
  for (const auto& o : obs) {
    std::vector<std::string> row{o.file_id, o.speaker_id, o.utterance_id, o.phone};
    for (double v : o.tv) row.push_back(io::format_double(v));
    for (std::size_t k = 0; k < 3; ++k) {
      row.push_back(o.source ? io::format_double((*o.source)[k]) : std::string());
    }
    row.push_back(o.mean_score ? io::format_double(*o.mean_score) : std::string());
    t.rows.push_back(std::move(row));
  }
  return io::write_csv(t);
}

void require_unique_observations(const std::vector<PhoneObservation>& obs) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& o : obs) {
    if (!seen.emplace(o.file_id, o.phone).second) {
      throw Error(ErrorKind::Validation,
                  fmt::format("duplicate observation for file '{}' phone '{}'", o.file_id, o.phone));
    }
  }
}

}  // namespace vtv
