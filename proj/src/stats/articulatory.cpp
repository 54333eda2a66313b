#include "vtv/stats/articulatory.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <gsl/gsl_cdf.h>

#include "vtv/error.hpp"

namespace vtv::stats {

std::string_view to_string(Articulator a) noexcept {
  switch (a) {
    case Articulator::Lips: return "lips";
    case Articulator::TongueTip: return "tongue_tip";
    case Articulator::TongueBody: return "tongue_body";
  }
  return "lips";
}

Articulator parse_articulator(std::string_view text) {
  for (Articulator a : kArticulators) {
    if (to_string(a) == text) return a;
  }
  throw Error(ErrorKind::Parse, fmt::format("unknown articulator '{}'", text));
}

ChannelPair articulator_channels(Articulator a) noexcept {
  switch (a) {
    case Articulator::Lips: return {1, 0};
    case Articulator::TongueTip: return {2, 3};
    case Articulator::TongueBody: return {4, 5};
  }
  return {1, 0};
}

OralMeans oral_means(std::span<const PhoneObservation> obs) {
  if (obs.empty()) throw Error(ErrorKind::EmptyInput, "no observations to average");
  OralMeans m{};
  for (const auto& o : obs) {
    for (std::size_t c = 0; c < kOralChannelCount; ++c) m[c] += o.tv[c];
  }
  for (double& v : m) v /= static_cast<double>(obs.size());
  return m;
}

std::array<ArticulatorMsd, 3> articulatory_msd(const PhoneObservation& obs,
                                               const OralMeans& correct_means) {
  for (std::size_t c = 0; c < kOralChannelCount; ++c) {
    if (!std::isfinite(obs.tv[c]) || !std::isfinite(correct_means[c])) {
      throw Error(ErrorKind::MissingData,
                  fmt::format("{}: channel {} is missing", obs.file_id, kOralChannelNames[c]));
    }
  }
  std::array<ArticulatorMsd, 3> out;
  for (std::size_t k = 0; k < kArticulators.size(); ++k) {
    const ChannelPair ch = articulator_channels(kArticulators[k]);
    const double dl = obs.tv[ch.location] - correct_means[ch.location];
    const double dd = obs.tv[ch.degree] - correct_means[ch.degree];
    out[k] = {obs.file_id, kArticulators[k], dl * dl + dd * dd};
  }
  return out;
}

double chi2_2df_95() { return gsl_cdf_chisq_Pinv(0.95, 2.0); }

ConfidenceEllipse confidence_ellipse(std::span<const Point2> points) {
  const std::size_t n = points.size();
  if (n < 3) throw Error(ErrorKind::DegenerateSample, "an ellipse needs at least 3 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = p.x - mx, dy = p.y - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double d = static_cast<double>(n - 1);
  Eigen::Matrix2d cov;
  cov << sxx / d, sxy / d, sxy / d, syy / d;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const Eigen::Vector2d ev = es.eigenvalues();  // ascending
  const double scale = std::max(cov.trace(), 1e-300);
  if (!(ev(0) > 1e-12 * scale)) {
    throw Error(ErrorKind::DegenerateSample, "sample covariance is singular");
  }
  const double q = chi2_2df_95();
  ConfidenceEllipse e;
  e.center = {mx, my};
  e.major = std::sqrt(q * ev(1));
  e.minor = std::sqrt(q * ev(0));
  const Eigen::Vector2d v = es.eigenvectors().col(1);
  double a = std::atan2(v(1), v(0));
  if (a <= -std::numbers::pi / 2) a += std::numbers::pi;
  if (a > std::numbers::pi / 2) a -= std::numbers::pi;
  e.angle = a;
  e.n = n;
  return e;
}

}  // namespace vtv::stats
