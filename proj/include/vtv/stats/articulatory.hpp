#pragma once

// Per-articulator squared distance from perceptually correct productions, and
// 95 % confidence ellipses of (location, degree) samples.

#include <array>
#include <span>
#include <string>
#include <string_view>

#include "vtv/geometry.hpp"
#include "vtv/segments.hpp"

namespace vtv::stats {

enum class Articulator { Lips, TongueTip, TongueBody };
inline constexpr std::array<Articulator, 3> kArticulators{
    Articulator::Lips, Articulator::TongueTip, Articulator::TongueBody};
std::string_view to_string(Articulator a) noexcept;
Articulator parse_articulator(std::string_view text);

// Channel indices (into LA LP TTCL TTCD TBCL TBCD) of the (location, degree)
// pair: lips (LP, LA), tongue tip (TTCL, TTCD), tongue body (TBCL, TBCD).
struct ChannelPair {
  std::size_t location;
  std::size_t degree;
};
ChannelPair articulator_channels(Articulator a) noexcept;

using OralMeans = std::array<double, kOralChannelCount>;

// Channel means of a set of observations; throws Error(EmptyInput) when empty.
OralMeans oral_means(std::span<const PhoneObservation> obs);

struct ArticulatorMsd {
  std::string file_id;
  Articulator articulator = Articulator::Lips;
  double msd = 0.0;
};

// (location - mean location)^2 + (degree - mean degree)^2 per articulator.
// Throws Error(MissingData) on non-finite channels.
std::array<ArticulatorMsd, 3> articulatory_msd(const PhoneObservation& obs,
                                               const OralMeans& correct_means);

struct ConfidenceEllipse {
  Point2 center;
  double major = 0.0;  // semi-axes
  double minor = 0.0;
  double angle = 0.0;  // of the major axis, radians in (-pi/2, pi/2]
  std::size_t n = 0;
};

// Chi-square (2 df) quantile at 0.95.
double chi2_2df_95();

// Semi-axes sqrt(q * eigenvalue) of the sample covariance. Throws
// Error(DegenerateSample) for fewer than 3 points or a singular covariance.
ConfidenceEllipse confidence_ellipse(std::span<const Point2> points);

}  // namespace vtv::stats
