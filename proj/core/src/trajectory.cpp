#include "autotaxi/trajectory.hpp"

#include "autotaxi/errors.hpp"
#include "autotaxi/qp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace autotaxi {
namespace {

// i! / (i - d)!, zero when i < d.
double falling(int i, int d) {
  if (i < d) return 0.0;
  double r = 1.0;
  for (int k = 0; k < d; ++k) r *= static_cast<double>(i - k);
  return r;
}

void check_orders(int poly_order, int snap_order) {
  if (snap_order < 1) throw InvalidArgument("snap order must be >= 1");
  if (poly_order < 2 * snap_order) {
    throw InvalidArgument("polynomial order " + std::to_string(poly_order) +
                          " is too small for derivative order " + std::to_string(snap_order) +
                          " (need at least " + std::to_string(2 * snap_order) + ")");
  }
}

Vec2 unit_or_zero(const Vec2& d) {
  const double n = d.norm();
  return n > 1e-12 ? Vec2(d / n) : Vec2::Zero();
}

}  // namespace

PolySpline::PolySpline(std::vector<double> knots, std::vector<Eigen::VectorXd> coeff_x,
                       std::vector<Eigen::VectorXd> coeff_y, int poly_order, int snap_order)
    : knots_(std::move(knots)),
      cx_(std::move(coeff_x)),
      cy_(std::move(coeff_y)),
      poly_order_(poly_order),
      snap_order_(snap_order) {
  if (knots_.size() < 2) throw InvalidArgument("PolySpline needs at least two knots");
  const std::size_t m = knots_.size() - 1;
  if (cx_.size() != m || cy_.size() != m) {
    throw InvalidArgument("PolySpline: one coefficient vector per segment and axis expected");
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (!(knots_[k + 1] > knots_[k])) throw InvalidArgument("PolySpline: knots must increase");
    if (cx_[k].size() != poly_order_ || cy_[k].size() != poly_order_) {
      throw InvalidArgument("PolySpline: coefficient vector length must equal the order");
    }
  }
}

const Eigen::VectorXd& PolySpline::coefficients(int axis, int segment) const {
  if (segment < 0 || segment >= num_segments()) throw InvalidArgument("segment out of range");
  return axis == 0 ? cx_[static_cast<std::size_t>(segment)]
                   : cy_[static_cast<std::size_t>(segment)];
}

int PolySpline::segment_index(double t) const {
  if (empty()) throw InvalidArgument("empty spline");
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  const int k = static_cast<int>(it - knots_.begin()) - 1;
  return std::clamp(k, 0, num_segments() - 1);
}

Vec2 PolySpline::derivative(double t, int order) const {
  if (empty()) throw InvalidArgument("empty spline");
  t = std::clamp(t, t_first(), t_last());
  const int k = segment_index(t);
  const double tau = t - knots_[static_cast<std::size_t>(k)];
  const Eigen::VectorXd& ax = cx_[static_cast<std::size_t>(k)];
  const Eigen::VectorXd& ay = cy_[static_cast<std::size_t>(k)];
  double x = 0.0, y = 0.0;
  for (int i = poly_order_ - 1; i >= order; --i) {
    const double f = falling(i, order);
    x = x * tau + f * ax(i);
    y = y * tau + f * ay(i);
  }
  return {x, y};
}

Eigen::MatrixXd snap_cost_matrix(double segment_duration, int poly_order, int snap_order) {
  check_orders(poly_order, snap_order);
  if (!(segment_duration > 0.0) || !std::isfinite(segment_duration)) {
    throw InvalidArgument("segment duration must be positive");
  }
  const int r = snap_order;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(poly_order, poly_order);
  for (int i = r; i < poly_order; ++i) {
    for (int j = r; j < poly_order; ++j) {
      const int p = i + j - 2 * r + 1;
      H(i, j) = falling(i, r) * falling(j, r) * std::pow(segment_duration, p) / p;
    }
  }
  return H;
}

double spline_snap_energy(const PolySpline& spline) {
  double e = 0.0;
  for (int k = 0; k < spline.num_segments(); ++k) {
    const double T = spline.knots()[static_cast<std::size_t>(k + 1)] -
                     spline.knots()[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd H = snap_cost_matrix(T, spline.poly_order(), spline.snap_order());
    for (int axis = 0; axis < 2; ++axis) {
      const Eigen::VectorXd& a = spline.coefficients(axis, k);
      e += a.dot(H * a);
    }
  }
  return e;
}

PolySpline min_snap(std::span<const TimedWaypoint> waypoints, const BoundaryDerivatives& boundary,
                    int poly_order, int snap_order) {
  check_orders(poly_order, snap_order);
  if (waypoints.size() < 2) throw InvalidArgument("min_snap needs at least two waypoints");
  const int np = poly_order;
  const int r = snap_order;
  const int m = static_cast<int>(waypoints.size()) - 1;
  if (static_cast<int>(boundary.start.size()) > r - 1 ||
      static_cast<int>(boundary.end.size()) > r - 1) {
    throw InvalidArgument("boundary derivatives are limited to orders 1.." + std::to_string(r - 1));
  }
  std::vector<double> T(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const auto& a = waypoints[static_cast<std::size_t>(k)];
    const auto& b = waypoints[static_cast<std::size_t>(k + 1)];
    if (!std::isfinite(a.time) || !std::isfinite(b.time) || !a.position.allFinite() ||
        !b.position.allFinite()) {
      throw InvalidArgument("waypoints must be finite");
    }
    if (!(b.time > a.time)) {
      throw SolverError("waypoint times must be strictly increasing (waypoint " +
                        std::to_string(k + 1) + " at t=" + std::to_string(b.time) +
                        " does not follow t=" + std::to_string(a.time) +
                        "); the KKT system would be singular");
    }
    T[static_cast<std::size_t>(k)] = b.time - a.time;
  }

  // Each segment is solved in normalized time s = (t - t_k)/T_k with
  // coefficients b_i = a_i T_k^i; this keeps the system well scaled.
  const int n = m * np;
  Eigen::MatrixXd Hn = Eigen::MatrixXd::Zero(np, np);
  for (int i = r; i < np; ++i) {
    for (int j = r; j < np; ++j) {
      Hn(i, j) = falling(i, r) * falling(j, r) / (i + j - 2 * r + 1);
    }
  }
  std::vector<double> w(static_cast<std::size_t>(m));
  double w_max = 0.0;
  for (int k = 0; k < m; ++k) {
    w[static_cast<std::size_t>(k)] = std::pow(T[static_cast<std::size_t>(k)], 1 - 2 * r);
    w_max = std::max(w_max, w[static_cast<std::size_t>(k)]);
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < m; ++k) {
    H.block(k * np, k * np, np, np) = (w[static_cast<std::size_t>(k)] / w_max) * Hn;
  }

  const int rows = 2 * m + 2 * (r - 1) + (m - 1) * (r - 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(rows, 2);
  int row = 0;
  for (int k = 0; k < m; ++k) {
    A(row, k * np) = 1.0;
    B.row(row++) = waypoints[static_cast<std::size_t>(k)].position.transpose();
    A.block(row, k * np, 1, np).setOnes();
    B.row(row++) = waypoints[static_cast<std::size_t>(k + 1)].position.transpose();
  }
  for (int d = 1; d < r; ++d) {
    const Vec2 ds = d <= static_cast<int>(boundary.start.size())
                        ? boundary.start[static_cast<std::size_t>(d - 1)]
                        : Vec2::Zero();
    const Vec2 de = d <= static_cast<int>(boundary.end.size())
                        ? boundary.end[static_cast<std::size_t>(d - 1)]
                        : Vec2::Zero();
    A(row, d) = falling(d, d);
    B.row(row++) = std::pow(T.front(), d) * ds.transpose();
    for (int i = 0; i < np; ++i) A(row, (m - 1) * np + i) = falling(i, d);
    B.row(row++) = std::pow(T.back(), d) * de.transpose();
  }
  for (int k = 0; k + 1 < m; ++k) {
    const double ratio = T[static_cast<std::size_t>(k)] / T[static_cast<std::size_t>(k + 1)];
    for (int d = 1; d < r; ++d) {
      for (int i = 0; i < np; ++i) A(row, k * np + i) = falling(i, d);
      A(row, (k + 1) * np + d) = -std::pow(ratio, d) * falling(d, d);
      ++row;
    }
  }

  std::vector<Eigen::VectorXd> coeff[2];
  double cost = 0.0;
  double residual = 0.0;
  const Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (int axis = 0; axis < 2; ++axis) {
    const QpSolution sol = solve_eq_qp(H, g, A, B.col(axis));
    if (!sol.ok()) {
      throw SolverError("min_snap: " + (sol.diagnostic.empty() ? std::string(to_string(sol.status))
                                                                : sol.diagnostic));
    }
    residual = std::max(residual, sol.kkt_residual);
    for (int k = 0; k < m; ++k) {
      const Eigen::VectorXd b = sol.z.segment(k * np, np);
      cost += w[static_cast<std::size_t>(k)] * b.dot(Hn * b);
      Eigen::VectorXd a(np);
      const double Tk = T[static_cast<std::size_t>(k)];
      for (int i = 0; i < np; ++i) a(i) = b(i) / std::pow(Tk, i);
      coeff[axis].push_back(a);
    }
  }
  std::vector<double> knots;
  knots.reserve(waypoints.size());
  for (const auto& wp : waypoints) knots.push_back(wp.time);
  PolySpline spline(std::move(knots), std::move(coeff[0]), std::move(coeff[1]), np, r);
  spline.set_solve_info(cost, residual);
  return spline;
}

ReferenceState sample_reference(const PolySpline& spline, double t) {
  const double tc = std::clamp(t, spline.t_first(), spline.t_last());
  const Vec2 p = spline.position(tc);
  const Vec2 dp = spline.derivative(tc, 1);
  const double v = dp.norm();
  double theta = 0.0;
  if (v >= kHeadingSpeedEps) {
    theta = std::atan2(dp.y(), dp.x());
  } else {
    // Hold the last well-defined heading; look ahead when none exists yet.
    bool found = false;
    const double back = tc - spline.t_first();
    for (double h = 1e-3; h <= back && !found; h *= 2.0) {
      const Vec2 d = spline.derivative(tc - h, 1);
      if (d.norm() >= kHeadingSpeedEps) {
        theta = std::atan2(d.y(), d.x());
        found = true;
      }
    }
    const double fwd = spline.t_last() - tc;
    for (double h = 1e-3; h <= fwd && !found; h *= 2.0) {
      const Vec2 d = spline.derivative(tc + h, 1);
      if (d.norm() >= kHeadingSpeedEps) {
        theta = std::atan2(d.y(), d.x());
        found = true;
      }
    }
    if (!found) {
      const Vec2 chord = spline.position(spline.t_last()) - spline.position(spline.t_first());
      if (chord.norm() > 1e-12) theta = std::atan2(chord.y(), chord.x());
    }
  }
  return {p.x(), p.y(), wrap_angle(theta), v};
}

std::vector<TimedWaypoint> reference_waypoints(std::span<const Vec2> route,
                                               std::span<const ZonePin> pins,
                                               double operating_speed, double t_start) {
  if (route.size() < 2) throw InvalidArgument("route needs at least two vertices");
  if (!(operating_speed > 0.0)) throw InvalidArgument("operating speed must be positive");
  const std::vector<double> s = cumulative_arc_length(route);
  const double total = s.back();
  if (!(total > 0.0)) throw InvalidArgument("route has zero length");

  struct Node {
    double s;
    Vec2 pos;
    std::optional<double> pinned;
  };
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < route.size(); ++i) {
    nodes.push_back({s[i], route[i], i == 0 ? std::optional<double>(t_start) : std::nullopt});
  }
  for (const ZonePin& pin : pins) {
    const auto c = polyline_disk_crossing(route, pin.zone.center, pin.zone.radius);
    if (!c) throw InvalidArgument("zone '" + pin.zone.id + "' does not intersect the route");
    if (!(pin.t_out >= pin.t_in)) {
      throw InvalidArgument("zone '" + pin.zone.id + "' exit time precedes its entry time");
    }
    if (c->s_in > 1e-9) nodes.push_back({c->s_in, point_at_arc_length(route, c->s_in), pin.t_in});
    nodes.push_back({c->s_out, point_at_arc_length(route, c->s_out), pin.t_out});
  }
  std::stable_sort(nodes.begin(), nodes.end(),
                   [](const Node& a, const Node& b) { return a.s < b.s; });
  std::vector<Node> merged;
  for (const Node& nd : nodes) {
    if (!merged.empty() && nd.s - merged.back().s <= 1e-6) {
      Node& prev = merged.back();
      if (nd.pinned) prev.pinned = prev.pinned ? std::max(*prev.pinned, *nd.pinned) : nd.pinned;
      continue;
    }
    merged.push_back(nd);
  }

  // Pinned nodes must be reachable at the operating speed from the previous
  // pinned node. Free nodes between two pinned ones are timed in proportion
  // to arc length, so any delay is spread over the whole approach; free
  // nodes after the last pin follow the cumulative arrival estimate.
  std::size_t prev_pin = 0;
  for (std::size_t i = 1; i < merged.size(); ++i) {
    if (!merged[i].pinned) continue;
    const double eta = *merged[prev_pin].pinned + (merged[i].s - merged[prev_pin].s) / operating_speed;
    if (*merged[i].pinned < eta - 1e-6 * (1.0 + std::abs(eta))) {
      throw InvalidArgument("pinned time " + std::to_string(*merged[i].pinned) +
                            " is earlier than the reachable arrival " + std::to_string(eta) +
                            " at arc length " + std::to_string(merged[i].s));
    }
    prev_pin = i;
  }

  std::vector<TimedWaypoint> out;
  out.push_back({merged.front().pos, *merged.front().pinned});
  prev_pin = 0;
  for (std::size_t i = 1; i < merged.size(); ++i) {
    const Node& nd = merged[i];
    const double t_prev = out.back().time;
    double t = 0.0;
    if (nd.pinned) {
      t = std::max(*nd.pinned, t_prev + 1e-9);
      prev_pin = i;
    } else {
      std::size_t next_pin = i + 1;
      while (next_pin < merged.size() && !merged[next_pin].pinned) ++next_pin;
      if (next_pin < merged.size()) {
        const Node& p = merged[prev_pin];
        const Node& q = merged[next_pin];
        t = *p.pinned + (nd.s - p.s) / (q.s - p.s) * (*q.pinned - *p.pinned);
      } else {
        t = t_prev + (nd.s - merged[i - 1].s) / operating_speed;
      }
    }
    if (!(t > t_prev)) {
      throw InvalidArgument("reference waypoint times are not increasing at arc length " +
                            std::to_string(nd.s));
    }
    out.push_back({nd.pos, t});
  }
  return out;
}

PolySpline build_reference(std::span<const Vec2> route, std::span<const ZonePin> pins,
                           double operating_speed, double t_start,
                           const ReferenceOptions& options) {
  const auto wps = reference_waypoints(route, pins, operating_speed, t_start);
  Vec2 first_dir = Vec2::Zero(), last_dir = Vec2::Zero();
  for (std::size_t i = 1; i < route.size() && first_dir.isZero(); ++i) {
    first_dir = unit_or_zero(route[i] - route[i - 1]);
  }
  for (std::size_t i = route.size() - 1; i >= 1 && last_dir.isZero(); --i) {
    last_dir = unit_or_zero(route[i] - route[i - 1]);
  }
  BoundaryDerivatives bd;
  if (options.snap_order >= 2) {
    bd.start.push_back(options.start_speed.value_or(operating_speed) * first_dir);
    bd.end.push_back(options.end_speed.value_or(operating_speed) * last_dir);
  }
  return min_snap(wps, bd, options.poly_order, options.snap_order);
}

}  // namespace autotaxi
