#pragma once

#include <array>
#include <span>
#include <vector>

namespace vtv {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline bool is_finite(const Point2& p) noexcept;

// Ordered midsagittal polyline of the maxilla / velum / anterior pharyngeal
// wall, in mm relative to the incisor origin. Stored both as points and as
// structure-of-arrays segment endpoints for the distance kernels.
class PalateTrace {
 public:
  PalateTrace() = default;

  // Throws Error(InvalidTrace) for < 2 points, non-finite coordinates or
  // repeated consecutive points.
  explicit PalateTrace(std::vector<Point2> points);

  std::span<const Point2> points() const noexcept { return points_; }
  std::size_t segment_count() const noexcept { return ax_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  // Exact minimum Euclidean distance from p to the polyline.
  double distance(Point2 p) const;

  // Vertical coordinate of the trace at x by linear interpolation along the
  // first segment spanning x. Outside the trace span the nearest end point's
  // height is returned.
  double height_at(double x) const;

  const std::vector<double>& ax() const noexcept { return ax_; }
  const std::vector<double>& ay() const noexcept { return ay_; }
  const std::vector<double>& bx() const noexcept { return bx_; }
  const std::vector<double>& by() const noexcept { return by_; }

 private:
  std::vector<Point2> points_;
  std::vector<double> ax_, ay_, bx_, by_;
};

// The curve through three tongue-body pellets: the circumcircle arc from the
// first to the last point passing through the middle one, or the two-segment
// polyline when the points are collinear.
class PelletArc {
 public:
  PelletArc(Point2 a, Point2 b, Point2 c);

  bool is_circular() const noexcept { return circular_; }
  Point2 center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

  // u in [0, 1]; u = 0 is the first pellet, u = 1 the last. Uniform in arc
  // length for both the circular and the polyline case.
  Point2 at(double u) const;

  double length() const noexcept { return length_; }

 private:
  std::array<Point2, 3> pts_;
  bool circular_ = false;
  Point2 center_{};
  double radius_ = 0.0;
  double start_angle_ = 0.0;
  double sweep_ = 0.0;
  double length_ = 0.0;
  double first_leg_ = 0.0;
};

struct CurveContact {
  double distance = 0.0;  // minimum curve-to-trace distance
  Point2 point{};         // minimizing point on the curve
};

inline constexpr int kArcSamples = 512;
inline constexpr double kContactTieTolerance = 1e-6;  // mm

// Minimum distance between the arc and the trace. The arc is scanned at
// kArcSamples uniform points, then every sampled local minimum that could
// still hold the global minimum (distance is 1-Lipschitz in arc position) is
// refined with Brent's method. Refined minima within kContactTieTolerance of
// the smallest tie, and the most anterior (largest x) of them wins; an arc
// that crosses the trace therefore reports its most anterior crossing.
CurveContact arc_trace_contact(const PelletArc& arc, const PalateTrace& trace);

inline bool is_finite(const Point2& p) noexcept {
  return p.x - p.x == 0.0 && p.y - p.y == 0.0;
}

}  // namespace vtv
