#pragma once

// Phone alignment parsing and reduction of each phone window of a 100 Hz
// tract-variable matrix to per-channel means.

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vtv/kinematics.hpp"
#include "vtv/tensors.hpp"

namespace vtv {

struct PhoneInterval {
  std::string file_id;
  std::string phone;
  double start = 0.0;  // seconds
  double end = 0.0;

  friend bool operator==(const PhoneInterval&, const PhoneInterval&) = default;
};

// Rows `file_id,phone,start_s,end_s`, with or without that header line.
// Result is sorted by (file_id, start). When `inventory` is non-empty every
// label must belong to it.
std::vector<PhoneInterval> parse_alignment(std::string_view text,
                                           const std::set<std::string>& inventory = {});
std::string write_alignment(const std::vector<PhoneInterval>& intervals);

// Sample indices i with ceil(start * 100) <= i < ceil(end * 100). Products
// within 1e-9 of an integer count as that integer.
struct SampleWindow {
  std::size_t first = 0;
  std::size_t last = 0;  // exclusive
};
SampleWindow sample_window(const PhoneInterval& interval, std::size_t frames);

// Per-channel means over the window, in kTvChannelNames order.
std::array<double, kTvChannelCount> extract_phone_tv(const TractVariableMatrix& matrix,
                                                     const PhoneInterval& interval);

struct PhoneObservation {
  std::string file_id;
  std::string speaker_id;
  std::string utterance_id;
  std::string phone;
  std::array<double, kOralChannelCount> tv{};  // LA LP TTCL TTCD TBCL TBCD
  std::optional<std::array<double, 3>> source;  // PER APER F0
  std::optional<double> mean_score;

  friend bool operator==(const PhoneObservation&, const PhoneObservation&) = default;
};

PhoneObservation make_observation(const TractVariableMatrix& matrix,
                                  const PhoneInterval& interval, std::string speaker_id,
                                  std::string utterance_id, bool keep_source,
                                  std::optional<double> mean_score);

// `file_id,speaker_id,utterance_id,phone,LA,LP,TTCL,TTCD,TBCL,TBCD,PER,APER,F0,mean_score`.
// Absent source values and scores are empty fields.
std::vector<PhoneObservation> parse_observations(std::string_view text);
std::string write_observations(const std::vector<PhoneObservation>& obs);

// Throws Error(Validation) when a (file, phone) pair occurs twice.
void require_unique_observations(const std::vector<PhoneObservation>& obs);

}  // namespace vtv
