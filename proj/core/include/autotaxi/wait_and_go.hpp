#pragma once

#include "autotaxi/conflict.hpp"
#include "autotaxi/trajectory.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace autotaxi {

/// One zone on an aircraft's route as seen by the stop-and-release rule.
struct ZoneApproach {
  std::string zone_id;
  double s_stop = 0.0;  ///< arc length of the stop line
  double t_stop = 0.0;  ///< time the unresolved reference reaches the stop line
  ReferenceState stop_state;
};

/// Zones crossed by `route`, ordered along it, with stop lines `d_safe`
/// before each zone boundary. Zones whose boundary is closer to the route
/// start than d_safe get a stop line at the start.
std::vector<ZoneApproach> zone_approaches(std::span<const Vec2> route, const PolySpline& spline,
                                          std::span<const ConflictZone> zones,
                                          double operating_speed, double t_start, double d_safe);

/// Per-aircraft view handed to the coordinator every step.
struct WaitAndGoAgent {
  AircraftId id;
  int priority = 0;
  Vec2 position = Vec2::Zero();
  bool active = true;
};

/// Stop-and-release intersection baseline. Each aircraft tracks its
/// unresolved reference, but the reference clock is frozen at a zone's stop
/// line until the aircraft is granted that zone. A zone is granted to one
/// requester at a time, only when nobody is inside it, in order of
/// (priority, request time, id). A grant lasts until the holder leaves the
/// zone disk.
class WaitAndGoCoordinator {
 public:
  WaitAndGoCoordinator(std::vector<ConflictZone> zones, double horizon_time);

  void add_aircraft(const AircraftId& id, const PolySpline& spline,
                    std::vector<ZoneApproach> approaches);

  /// Advances grants and reference clocks for time t (called once per step
  /// before the controllers run).
  void update(double t, double dt, std::span<const WaitAndGoAgent> agents);

  /// Reference window for one aircraft after the latest update.
  std::vector<ReferenceState> reference(const AircraftId& id, int horizon, double dt) const;

  bool holding(const AircraftId& id) const;
  double clock(const AircraftId& id) const;
  std::optional<AircraftId> grant_holder(const std::string& zone_id) const;

 private:
  struct Agent {
    PolySpline spline;
    std::vector<ZoneApproach> approaches;
    std::size_t next = 0;  ///< index of the next zone to negotiate
    double clock = 0.0;
    bool granted = false;
    bool entered = false;  ///< inside the granted zone at least once
    std::optional<double> request_time;
  };
  const ConflictZone& zone(const std::string& id) const;

  std::vector<ConflictZone> zones_;
  double horizon_time_;
  std::map<AircraftId, Agent> agents_;
  std::map<std::string, AircraftId> grants_;
  std::optional<double> last_t_;
};

}  // namespace autotaxi
