#pragma once

#include "autotaxi/conflict.hpp"
#include "autotaxi/dynamics.hpp"
#include "autotaxi/mpc.hpp"
#include "autotaxi/trajectory.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace autotaxi {

enum class Policy { kSafeTaxi, kNaive, kWaitAndGo };
const char* to_string(Policy p);
/// Parses "safe_taxi", "naive" or "wait_and_go".
std::optional<Policy> parse_policy(const std::string& s);

struct AircraftSpec {
  AircraftId id;
  AircraftParams params;
  std::vector<Vec2> route;
  /// Initial state; defaults to the route start, heading along the first
  /// segment, at the operating speed.
  std::optional<AircraftState> start;

  Vec2 goal() const { return route.back(); }
  AircraftState initial_state() const;
  friend bool operator==(const AircraftSpec&, const AircraftSpec&) = default;
};

struct ObstacleSpec {
  Obstacle obstacle;     ///< position at spawn time
  double spawn_time = 0.0;

  /// Obstacle state at time t, or nothing before it spawns.
  std::optional<Obstacle> at(double t) const;
  friend bool operator==(const ObstacleSpec&, const ObstacleSpec&) = default;
};

struct SolverSettings {
  int horizon = 15;
  int poly_order = 8;
  int snap_order = 4;
  MpcWeights weights;
  CbfParams cbf;
  SqpOptions sqp;
  friend bool operator==(const SolverSettings&, const SolverSettings&) = default;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  Policy policy = Policy::kSafeTaxi;
  double dt = 0.1;
  double dt_safe = 4.0;
  SlotGapMode slot_gap = SlotGapMode::kEntryToEntry;
  double max_sim_time = 120.0;
  double deadlock_window = 5.0;
  double deadlock_displacement = 0.05;
  bool parallel = false;  ///< solve the per-aircraft problems on threads
  SolverSettings solver;
  std::vector<AircraftSpec> aircraft;
  std::vector<ConflictZone> zones;
  std::vector<ObstacleSpec> obstacles;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  MpcConfig mpc_config(const AircraftSpec& a) const;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct ZoneSchedule {
  std::string zone_id;
  std::vector<IntersectionSlot> initial;   ///< estimated, unresolved
  std::vector<IntersectionSlot> resolved;  ///< in passing order
  PassingOrder order;
  int repaired_edges = 0;
};

struct AircraftPlan {
  AircraftId id;
  PolySpline spline;
  std::vector<ZonePin> pins;
};

struct Plan {
  std::vector<AircraftPlan> aircraft;  ///< scenario order
  std::vector<ZoneSchedule> zones;

  const AircraftPlan& find(const AircraftId& id) const;
};

/// References for every aircraft. safe_taxi resolves each zone and pins the
/// resolved slots; the baselines keep the unresolved arc-length timing.
Plan plan_phase(const Scenario& s);

struct StepRecord {
  double t = 0.0;
  AircraftId id;
  AircraftState x;
  ControlInput u;
  double min_h = 0.0;      ///< smallest barrier value at t (+inf when alone)
  double slack = 0.0;      ///< largest CBF slack in the solved plan
  bool near_active = false;
  bool near_zone = false;
  bool fallback = false;
};

struct SimEvent {
  double t = 0.0;
  std::string kind;  ///< zone_entry, zone_exit, goal, deadlock, timeout, safety_violation, fallback
  AircraftId id;
  std::string detail;
};

struct SimLog {
  double dt = 0.1;
  std::vector<double> times;
  std::vector<StepRecord> rows;
  std::vector<SimEvent> events;
  std::map<AircraftId, double> goal_times;
  /// Realized [entry, exit] per aircraft and zone; exit is NaN if never left.
  std::map<AircraftId, std::map<std::string, std::pair<double, double>>> zone_presence;
  double min_separation = 0.0;          ///< closest aircraft pair, center distance
  double min_obstacle_distance = 0.0;   ///< closest aircraft-obstacle center distance
  int safety_violations = 0;
  bool deadlock = false;
  bool timeout = false;
};

struct Metrics {
  Policy policy = Policy::kSafeTaxi;
  bool completed = false;
  double comp_time = 0.0;  ///< NaN unless completed
  double avg_acc_var = 0.0;
  double avg_acc_var_windowed = 0.0;
  double min_separation = 0.0;
  double min_obstacle_distance = 0.0;
  double max_slack = 0.0;
  int safety_violations = 0;
  int fallbacks = 0;
  bool deadlock = false;
  bool timeout = false;
};

struct RunResult {
  Plan plan;
  SimLog log;
  Metrics metrics;
};

RunResult run(const Scenario& s);
RunResult run(const Scenario& s, const Plan& plan);

/// One unfinished aircraft's positions over the detection window.
struct DeadlockTrack {
  std::vector<Vec2> positions;
  bool at_goal = false;
};

/// True when every track moved less than `min_displacement` from its first
/// position over the window and none is at its goal. No tracks, no deadlock.
bool detect_deadlock(std::span<const DeadlockTrack> tracks, double min_displacement);

/// Population variance.
double variance(std::span<const double> v);

Metrics compute_metrics(const SimLog& log, Policy policy);

struct PolicyComparison {
  std::vector<RunResult> runs;  ///< safe_taxi, naive, wait_and_go
};
PolicyComparison compare_policies(const Scenario& s);

}  // namespace autotaxi
