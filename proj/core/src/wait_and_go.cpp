#include "autotaxi/wait_and_go.hpp"

#include "autotaxi/errors.hpp"

#include <algorithm>
#include <tuple>

namespace autotaxi {

std::vector<ZoneApproach> zone_approaches(std::span<const Vec2> route, const PolySpline& spline,
                                          std::span<const ConflictZone> zones,
                                          double operating_speed, double t_start, double d_safe) {
  if (!(operating_speed > 0.0)) throw InvalidArgument("operating speed must be positive");
  std::vector<ZoneApproach> out;
  for (const ConflictZone& z : zones) {
    const auto c = polyline_disk_crossing(route, z.center, z.radius);
    if (!c) continue;
    ZoneApproach a;
    a.zone_id = z.id;
    a.s_stop = std::max(0.0, c->s_in - d_safe);
    a.t_stop = t_start + a.s_stop / operating_speed;
    a.stop_state = sample_reference(spline, a.t_stop);
    a.stop_state.v = 0.0;
    out.push_back(a);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ZoneApproach& a, const ZoneApproach& b) { return a.s_stop < b.s_stop; });
  return out;
}

WaitAndGoCoordinator::WaitAndGoCoordinator(std::vector<ConflictZone> zones, double horizon_time)
    : zones_(std::move(zones)), horizon_time_(horizon_time) {}

void WaitAndGoCoordinator::add_aircraft(const AircraftId& id, const PolySpline& spline,
                                        std::vector<ZoneApproach> approaches) {
  Agent a;
  a.spline = spline;
  a.approaches = std::move(approaches);
  a.clock = spline.t_first();
  agents_[id] = std::move(a);
}

const ConflictZone& WaitAndGoCoordinator::zone(const std::string& id) const {
  for (const auto& z : zones_) {
    if (z.id == id) return z;
  }
  throw NotFound("unknown zone '" + id + "'");
}

void WaitAndGoCoordinator::update(double t, double dt, std::span<const WaitAndGoAgent> agents) {
  // Advance reference clocks; ungranted clocks stop at the stop line.
  if (last_t_) {
    for (const WaitAndGoAgent& view : agents) {
      auto it = agents_.find(view.id);
      if (it == agents_.end() || !view.active) continue;
      Agent& a = it->second;
      double next_clock = a.clock + dt;
      if (!a.granted && a.next < a.approaches.size()) {
        next_clock = std::min(next_clock, std::max(a.clock, a.approaches[a.next].t_stop));
      }
      a.clock = next_clock;
    }
  }
  last_t_ = t;
  // Release grants whose holder has crossed and left the zone.
  for (const WaitAndGoAgent& view : agents) {
    auto it = agents_.find(view.id);
    if (it == agents_.end()) continue;
    Agent& a = it->second;
    if (!a.granted) continue;
    const ZoneApproach& ap = a.approaches[a.next];
    const ConflictZone& z = zone(ap.zone_id);
    const bool inside = (view.position - z.center).norm() < z.radius;
    if (inside) a.entered = true;
    if ((a.entered && !inside) || !view.active) {
      grants_.erase(ap.zone_id);
      a.granted = false;
      a.entered = false;
      a.request_time.reset();
      ++a.next;
    }
  }
  // Register requests from aircraft whose reference reaches a stop line
  // within the horizon.
  for (const WaitAndGoAgent& view : agents) {
    auto it = agents_.find(view.id);
    if (it == agents_.end() || !view.active) continue;
    Agent& a = it->second;
    if (a.granted || a.next >= a.approaches.size()) continue;
    if (a.clock + horizon_time_ >= a.approaches[a.next].t_stop && !a.request_time) {
      a.request_time = a.clock;
    }
  }
  // Grant free, empty zones.
  for (const ConflictZone& z : zones_) {
    if (grants_.count(z.id)) continue;
    bool occupied = false;
    for (const WaitAndGoAgent& view : agents) {
      if (view.active && (view.position - z.center).norm() < z.radius) occupied = true;
    }
    if (occupied) continue;
    const AircraftId* best = nullptr;
    std::tuple<int, double, AircraftId> best_key;
    for (const WaitAndGoAgent& view : agents) {
      auto it = agents_.find(view.id);
      if (it == agents_.end() || !view.active) continue;
      const Agent& a = it->second;
      if (a.granted || !a.request_time || a.next >= a.approaches.size()) continue;
      if (a.approaches[a.next].zone_id != z.id) continue;
      const auto key = std::make_tuple(view.priority, *a.request_time, view.id);
      if (!best || key < best_key) {
        best = &view.id;
        best_key = key;
      }
    }
    if (best) {
      grants_[z.id] = *best;
      agents_.at(*best).granted = true;
    }
  }
}

std::vector<ReferenceState> WaitAndGoCoordinator::reference(const AircraftId& id, int horizon,
                                                            double dt) const {
  const auto it = agents_.find(id);
  if (it == agents_.end()) throw NotFound("aircraft '" + id + "' is not coordinated");
  const Agent& a = it->second;
  const double start = a.clock;
  const bool hold = !a.granted && a.next < a.approaches.size();
  std::vector<ReferenceState> w;
  w.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int l = 0; l <= horizon; ++l) {
    const double tau = start + l * dt;
    if (hold && tau >= a.approaches[a.next].t_stop) {
      w.push_back(a.approaches[a.next].stop_state);
    } else {
      w.push_back(sample_reference(a.spline, tau));
    }
  }
  return w;
}

bool WaitAndGoCoordinator::holding(const AircraftId& id) const {
  const Agent& a = agents_.at(id);
  return !a.granted && a.next < a.approaches.size() && a.clock >= a.approaches[a.next].t_stop;
}

double WaitAndGoCoordinator::clock(const AircraftId& id) const { return agents_.at(id).clock; }

std::optional<AircraftId> WaitAndGoCoordinator::grant_holder(const std::string& zone_id) const {
  const auto it = grants_.find(zone_id);
  if (it == grants_.end()) return std::nullopt;
  return it->second;
}

}  // namespace autotaxi
