#include "vtv/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include "vtv/error.hpp"

namespace vtv {

namespace {

void require_finite(Point2 p, const char* name) {
  if (!is_finite(p)) {
    throw Error(ErrorKind::InvalidFrame, std::string("non-finite pellet ") + name);
  }
}

void require_trace(const PalateTrace& trace) {
  if (trace.empty()) throw Error(ErrorKind::InvalidTrace, "empty palate trace");
}

}  // namespace

double lip_aperture(const PelletFrame& frame) {
  require_finite(frame.ul, "UL");
  require_finite(frame.ll, "LL");
  return std::hypot(frame.ul.x - frame.ll.x, frame.ul.y - frame.ll.y);
}

double lip_protrusion(const PelletFrame& frame) {
  require_finite(frame.ll, "LL");
  return frame.ll.x;
}

Constriction tongue_tip_tvs(const PelletFrame& frame, const PalateTrace& trace) {
  require_trace(trace);
  require_finite(frame.t1, "T1");
  return {trace.distance(frame.t1), frame.t1.x};
}

Constriction tongue_body_tvs(const PelletFrame& frame, const PalateTrace& trace) {
  require_trace(trace);
  require_finite(frame.t2, "T2");
  require_finite(frame.t3, "T3");
  require_finite(frame.t4, "T4");
  const PelletArc arc(frame.t2, frame.t3, frame.t4);
  const CurveContact contact = arc_trace_contact(arc, trace);
  return {contact.distance, contact.point.x};
}

TractVariableFrame compute_tract_variables(const PelletFrame& frame,
                                           const PalateTrace& trace) {
  TractVariableFrame tv;
  tv.orientation = Orientation::Raw;
  tv[OralChannel::LA] = lip_aperture(frame);
  tv[OralChannel::LP] = lip_protrusion(frame);
  const Constriction tip = tongue_tip_tvs(frame, trace);
  tv[OralChannel::TTCL] = tip.location;
  tv[OralChannel::TTCD] = tip.degree;
  const Constriction body = tongue_body_tvs(frame, trace);
  tv[OralChannel::TBCL] = body.location;
  tv[OralChannel::TBCD] = body.degree;
  return tv;
}

TractVariableFrame orient_articulatory(const TractVariableFrame& frame) {
  if (frame.orientation != Orientation::Raw) {
    throw Error(ErrorKind::Idempotence, "frame is already in articulatory orientation");
  }
  TractVariableFrame out = frame;
  for (std::size_t c = 0; c < kOralChannelCount; ++c) {
    out.values[c] = kArticulatorySigns[c] * frame.values[c];
  }
  out.orientation = Orientation::Articulatory;
  return out;
}

TractVariableFrame orient_raw(const TractVariableFrame& frame) {
  if (frame.orientation != Orientation::Articulatory) {
    throw Error(ErrorKind::Idempotence, "frame is already in raw orientation");
  }
  TractVariableFrame out = frame;
  for (std::size_t c = 0; c < kOralChannelCount; ++c) {
    out.values[c] = kArticulatorySigns[c] * frame.values[c];
  }
  out.orientation = Orientation::Raw;
  return out;
}

const ChannelRange& SpeakerRange::at(std::string_view channel) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == channel) return ranges[i];
  }
  throw Error(ErrorKind::Lookup, "no range for channel " + std::string(channel));
}

SpeakerRange SpeakerRange::merged(const SpeakerRange& other) const {
  if (channels != other.channels) {
    throw Error(ErrorKind::Shape, "speaker ranges cover different channels");
  }
  SpeakerRange out = *this;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    out.ranges[i].min = std::min(ranges[i].min, other.ranges[i].min);
    out.ranges[i].max = std::max(ranges[i].max, other.ranges[i].max);
  }
  return out;
}

SpeakerRange fit_speaker_range(std::span<const std::vector<double>> series,
                               std::span<const std::string> channel_names) {
  if (series.size() != channel_names.size()) {
    throw Error(ErrorKind::Shape, "channel name count does not match series count");
  }
  SpeakerRange out;
  out.channels.assign(channel_names.begin(), channel_names.end());
  for (std::size_t c = 0; c < series.size(); ++c) {
    const auto& values = series[c];
    if (values.empty()) {
      throw Error(ErrorKind::EmptyInput, "channel " + out.channels[c] + " has no values");
    }
    ChannelRange r{values.front(), values.front()};
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::InvalidFrame, "non-finite value in channel " + out.channels[c]);
      }
      r.min = std::min(r.min, v);
      r.max = std::max(r.max, v);
    }
    out.ranges.push_back(r);
  }
  return out;
}

double normalize(double value, const ChannelRange& range) {
  const double span = range.max - range.min;
  if (span == 0.0) return 0.0;
  return 2.0 * (value - range.min) / span - 1.0;
}

double denormalize(double normalized, const ChannelRange& range) {
  const double span = range.max - range.min;
  if (span == 0.0) return range.min;
  return (normalized + 1.0) * 0.5 * span + range.min;
}

}  // namespace vtv
