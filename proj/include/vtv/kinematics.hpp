#pragma once

// Pellet geometry to the six oral tract variables, the articulatory sign
// convention, and per-speaker min-max normalization.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtv/geometry.hpp"

namespace vtv {

struct PelletFrame {
  Point2 ul, ll, t1, t2, t3, t4;
  double time = 0.0;  // seconds
};

enum class Orientation { Raw, Articulatory };

enum class OralChannel : int { LA = 0, LP, TTCL, TTCD, TBCL, TBCD };

inline constexpr std::size_t kOralChannelCount = 6;
inline constexpr std::array<std::string_view, kOralChannelCount> kOralChannelNames{
    "LA", "LP", "TTCL", "TTCD", "TBCL", "TBCD"};

struct TractVariableFrame {
  std::array<double, kOralChannelCount> values{};
  Orientation orientation = Orientation::Raw;

  double& operator[](OralChannel c) { return values[static_cast<int>(c)]; }
  double operator[](OralChannel c) const { return values[static_cast<int>(c)]; }
};

struct Constriction {
  double degree = 0.0;    // mm
  double location = 0.0;  // mm, horizontal offset from the incisor origin
};

double lip_aperture(const PelletFrame& frame);
double lip_protrusion(const PelletFrame& frame);
Constriction tongue_tip_tvs(const PelletFrame& frame, const PalateTrace& trace);
Constriction tongue_body_tvs(const PelletFrame& frame, const PalateTrace& trace);

// All six channels in raw orientation.
TractVariableFrame compute_tract_variables(const PelletFrame& frame,
                                           const PalateTrace& trace);

// Per-channel sign applied when moving from raw geometry to the articulatory
// space (anterior and constricted positive). Raw locations are already
// anterior-positive in the incisor-origin frame; raw degrees are distances and
// flip so that narrower constrictions are larger.
inline constexpr std::array<double, kOralChannelCount> kArticulatorySigns{
    1.0, 1.0, 1.0, -1.0, 1.0, -1.0};

TractVariableFrame orient_articulatory(const TractVariableFrame& frame);
TractVariableFrame orient_raw(const TractVariableFrame& frame);

struct ChannelRange {
  double min = 0.0;
  double max = 0.0;
};

struct SpeakerRange {
  std::vector<std::string> channels;
  std::vector<ChannelRange> ranges;

  const ChannelRange& at(std::string_view channel) const;
  // Range covering both inputs; channel lists must match.
  SpeakerRange merged(const SpeakerRange& other) const;
};

// series[c] holds every value of channel c for one speaker.
SpeakerRange fit_speaker_range(std::span<const std::vector<double>> series,
                               std::span<const std::string> channel_names);

// 2 (v - min) / (max - min) - 1. A degenerate range maps to 0. Values outside
// the range are not clamped.
double normalize(double value, const ChannelRange& range);
double denormalize(double normalized, const ChannelRange& range);

}  // namespace vtv
