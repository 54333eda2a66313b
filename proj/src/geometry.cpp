#include "vtv/geometry.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "vtv/error.hpp"
#include "vtv/simd/kernels.hpp"

namespace vtv {

PalateTrace::PalateTrace(std::vector<Point2> points) : points_(std::move(points)) {
  if (points_.size() < 2) {
    throw Error(ErrorKind::InvalidTrace, "palate trace needs at least 2 points");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!is_finite(points_[i])) {
      throw Error(ErrorKind::InvalidTrace, "palate trace has non-finite point");
    }
    if (i > 0 && points_[i] == points_[i - 1]) {
      throw Error(ErrorKind::InvalidTrace,
                  "palate trace repeats consecutive point " + std::to_string(i));
    }
  }
  const std::size_t n = points_.size() - 1;
  ax_.resize(n);
  ay_.resize(n);
  bx_.resize(n);
  by_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ax_[i] = points_[i].x;
    ay_[i] = points_[i].y;
    bx_[i] = points_[i + 1].x;
    by_[i] = points_[i + 1].y;
  }
}

double PalateTrace::distance(Point2 p) const {
  if (points_.empty()) {
    throw Error(ErrorKind::InvalidTrace, "empty palate trace");
  }
  thread_local std::vector<double> scratch;
  scratch.resize(ax_.size());
  simd::active().point_segment_dist2(p.x, p.y, ax_.data(), ay_.data(),
                                     bx_.data(), by_.data(), scratch.data(),
                                     scratch.size());
  return std::sqrt(*std::min_element(scratch.begin(), scratch.end()));
}

double PalateTrace::height_at(double x) const {
  if (points_.empty()) {
    throw Error(ErrorKind::InvalidTrace, "empty palate trace");
  }
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Point2 a = points_[i];
    const Point2 b = points_[i + 1];
    const double lo = std::min(a.x, b.x);
    const double hi = std::max(a.x, b.x);
    if (x >= lo && x <= hi) {
      if (hi == lo) return std::max(a.y, b.y);
      const double t = (x - a.x) / (b.x - a.x);
      return a.y + t * (b.y - a.y);
    }
  }
  const Point2 first = points_.front();
  const Point2 last = points_.back();
  return std::abs(x - first.x) < std::abs(x - last.x) ? first.y : last.y;
}

namespace {

double wrap_two_pi(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  return a < 0.0 ? a + two_pi : a;
}

double norm(Point2 a, Point2 b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace

PelletArc::PelletArc(Point2 a, Point2 b, Point2 c) : pts_{a, b, c} {
  const double d1x = b.x - a.x, d1y = b.y - a.y;
  const double d2x = c.x - b.x, d2y = c.y - b.y;
  const double cross = d1x * d2y - d1y * d2x;
  const double scale = std::hypot(d1x, d1y) * std::hypot(d2x, d2y);
  circular_ = scale > 0.0 && std::abs(cross) > 1e-9 * scale;

  if (!circular_) {
    first_leg_ = norm(a, b);
    length_ = first_leg_ + norm(b, c);
    return;
  }

  // Circumcenter.
  const double ax = a.x, ay = a.y, bx = b.x, by = b.y, cx = c.x, cy = c.y;
  const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by,
               c2 = cx * cx + cy * cy;
  center_ = {(a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d,
             (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d};
  radius_ = norm(center_, a);

  const double ta = std::atan2(ay - center_.y, ax - center_.x);
  const double tb = std::atan2(by - center_.y, bx - center_.x);
  const double tc = std::atan2(cy - center_.y, cx - center_.x);
  const double ccw_to_c = wrap_two_pi(tc - ta);
  const double ccw_to_b = wrap_two_pi(tb - ta);
  start_angle_ = ta;
  sweep_ = ccw_to_b < ccw_to_c ? ccw_to_c : ccw_to_c - 2.0 * std::numbers::pi;
  length_ = radius_ * std::abs(sweep_);
}

Point2 PelletArc::at(double u) const {
  if (circular_) {
    const double t = start_angle_ + u * sweep_;
    return {center_.x + radius_ * std::cos(t), center_.y + radius_ * std::sin(t)};
  }
  const double s = u * length_;
  const auto lerp = [](Point2 p, Point2 q, double w) {
    return Point2{p.x + w * (q.x - p.x), p.y + w * (q.y - p.y)};
  };
  if (s <= first_leg_) {
    return first_leg_ > 0.0 ? lerp(pts_[0], pts_[1], s / first_leg_) : pts_[0];
  }
  const double second = length_ - first_leg_;
  return second > 0.0 ? lerp(pts_[1], pts_[2], (s - first_leg_) / second)
                      : pts_[2];
}

CurveContact arc_trace_contact(const PelletArc& arc, const PalateTrace& trace) {
  if (trace.empty()) {
    throw Error(ErrorKind::InvalidTrace, "empty palate trace");
  }
  constexpr int n = kArcSamples;
  std::array<Point2, n> pts;
  std::array<double, n> dist;
  for (int k = 0; k < n; ++k) {
    pts[k] = arc.at(static_cast<double>(k) / (n - 1));
    dist[k] = trace.distance(pts[k]);
  }

  double chord = 0.0;
  double sampled_best = dist[0];
  for (int k = 1; k < n; ++k) {
    chord = std::max(chord, norm(pts[k - 1], pts[k]));
    sampled_best = std::min(sampled_best, dist[k]);
  }

  // Refine every sampled local minimum that can still hold the global one.
  std::vector<CurveContact> candidates;
  const auto f = [&](double u) { return trace.distance(arc.at(u)); };
  for (int k = 0; k < n; ++k) {
    const bool left_ok = k == 0 || dist[k] <= dist[k - 1];
    const bool right_ok = k == n - 1 || dist[k] <= dist[k + 1];
    if (!left_ok || !right_ok || dist[k] > sampled_best + chord) continue;
    const double lo = static_cast<double>(std::max(k - 1, 0)) / (n - 1);
    const double hi = static_cast<double>(std::min(k + 1, n - 1)) / (n - 1);
    const auto [u, d] = boost::math::tools::brent_find_minima(f, lo, hi, 48);
    candidates.push_back(d < dist[k] ? CurveContact{d, arc.at(u)}
                                     : CurveContact{dist[k], pts[k]});
  }

  double lowest = candidates.front().distance;
  for (const auto& c : candidates) lowest = std::min(lowest, c.distance);
  CurveContact best{std::numeric_limits<double>::infinity(), {}};
  for (const auto& c : candidates) {
    if (c.distance <= lowest + kContactTieTolerance &&
        (best.distance == std::numeric_limits<double>::infinity() || c.point.x > best.point.x)) {
      best = c;
    }
  }
  return best;
}

}  // namespace vtv
