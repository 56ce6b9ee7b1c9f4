#include "autotaxi/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace autotaxi {

std::vector<double> cumulative_arc_length(std::span<const Vec2> polyline) {
  std::vector<double> s(polyline.size(), 0.0);
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    s[i] = s[i - 1] + (polyline[i] - polyline[i - 1]).norm();
  }
  return s;
}

Vec2 point_at_arc_length(std::span<const Vec2> polyline, double s) {
  if (polyline.empty()) return Vec2::Zero();
  if (s <= 0.0 || polyline.size() == 1) return polyline.front();
  double acc = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const Vec2 d = polyline[i] - polyline[i - 1];
    const double len = d.norm();
    if (acc + len >= s && len > 0.0) {
      return polyline[i - 1] + d * ((s - acc) / len);
    }
    acc += len;
  }
  return polyline.back();
}

std::optional<DiskCrossing> polyline_disk_crossing(std::span<const Vec2> polyline,
                                                   const Vec2& center, double radius) {
  if (polyline.size() < 2) return std::nullopt;
  const double r2 = radius * radius;
  double acc = 0.0;
  std::optional<double> first;
  double last = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const Vec2 a = polyline[i - 1];
    const Vec2 d = polyline[i] - a;
    const double len = d.norm();
    if (len == 0.0) continue;
    // |a + t d - c|^2 = r^2, t in [0, 1]
    const Vec2 f = a - center;
    const double qa = d.squaredNorm();
    const double qb = 2.0 * f.dot(d);
    const double qc = f.squaredNorm() - r2;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc > 0.0) {
      const double sq = std::sqrt(disc);
      const double t0 = std::max(0.0, (-qb - sq) / (2.0 * qa));
      const double t1 = std::min(1.0, (-qb + sq) / (2.0 * qa));
      if (t1 > t0) {
        if (!first) first = acc + t0 * len;
        last = acc + t1 * len;
      }
    }
    acc += len;
  }
  if (!first || last <= *first) return std::nullopt;
  return DiskCrossing{*first, last};
}

}  // namespace autotaxi
