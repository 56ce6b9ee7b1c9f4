#include "autotaxi/sim.hpp"

#include "autotaxi/errors.hpp"
#include "autotaxi/wait_and_go.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <set>
#include <thread>

namespace autotaxi {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Safety checks allow this much intrusion into the inflated safety disk.
constexpr double kSafetyTol = 1e-3;
// A step counts toward the windowed acceleration variance within this
// distance of a zone boundary.
constexpr double kZoneWindow = 5.0;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

const char* to_string(Policy p) {
  switch (p) {
    case Policy::kSafeTaxi: return "safe_taxi";
    case Policy::kNaive: return "naive";
    case Policy::kWaitAndGo: return "wait_and_go";
  }
  return "unknown";
}

std::optional<Policy> parse_policy(const std::string& s) {
  if (s == "safe_taxi") return Policy::kSafeTaxi;
  if (s == "naive") return Policy::kNaive;
  if (s == "wait_and_go") return Policy::kWaitAndGo;
  return std::nullopt;
}

AircraftState AircraftSpec::initial_state() const {
  if (start) return *start;
  AircraftState x;
  if (route.empty()) return x;
  x.px = route.front().x();
  x.py = route.front().y();
  for (std::size_t i = 1; i < route.size(); ++i) {
    const Vec2 d = route[i] - route[i - 1];
    if (d.norm() > 1e-12) {
      x.theta = std::atan2(d.y(), d.x());
      break;
    }
  }
  x.v = params.operating_speed;
  return x;
}

std::optional<Obstacle> ObstacleSpec::at(double t) const {
  if (t < spawn_time - 1e-9) return std::nullopt;
  Obstacle o = obstacle;
  o.position += (t - spawn_time) * o.velocity;
  return o;
}

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive");
  if (!(dt_safe >= 0.0)) fail("dt_safe must be nonnegative");
  if (!(max_sim_time > 0.0)) fail("max_sim_time must be positive");
  if (!(deadlock_window > 0.0)) fail("deadlock_window must be positive");
  if (!(deadlock_displacement > 0.0)) fail("deadlock_displacement must be positive");
  if (solver.horizon < 2) fail("solver.horizon must be at least 2");
  if (solver.snap_order < 1 || solver.poly_order < 2 * solver.snap_order) {
    fail("solver.poly_order must be at least twice solver.snap_order");
  }
  try {
    solver.weights.validate();
    solver.cbf.validate();
  } catch (const InvalidArgument& e) {
    fail(std::string("solver: ") + e.what());
  }
  if (!(solver.sqp.slack_penalty > 0.0)) fail("solver.slack_penalty must be positive");
  if (solver.sqp.max_iters < 1) fail("solver.sqp_max_iters must be at least 1");
  if (aircraft.empty()) fail("scenario needs at least one aircraft");
  std::set<AircraftId> ids;
  for (std::size_t i = 0; i < aircraft.size(); ++i) {
    const auto& a = aircraft[i];
    const std::string where = "aircraft[" + std::to_string(i) + "]";
    if (a.id.empty()) fail(where + ".id must not be empty");
    if (!ids.insert(a.id).second) fail(where + ".id '" + a.id + "' is duplicated");
    if (a.route.size() < 2) fail(where + ".route needs at least two points");
    for (const auto& p : a.route) {
      if (!p.allFinite()) fail(where + ".route contains a non-finite point");
    }
    if (cumulative_arc_length(a.route).back() <= 0.0) fail(where + ".route has zero length");
    try {
      a.params.validate();
    } catch (const InvalidArgument& e) {
      fail(where + ": " + e.what());
    }
    if (a.start && !a.start->finite()) fail(where + ".start must be finite");
  }
  std::set<std::string> zone_ids;
  for (std::size_t i = 0; i < zones.size(); ++i) {
    const std::string where = "zones[" + std::to_string(i) + "]";
    if (!zone_ids.insert(zones[i].id).second) fail(where + ".id '" + zones[i].id + "' is duplicated");
    if (!(zones[i].radius > 0.0)) fail(where + ".radius must be positive");
    if (!zones[i].center.allFinite()) fail(where + ".center must be finite");
  }
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const std::string where = "obstacles[" + std::to_string(i) + "]";
    try {
      obstacles[i].obstacle.validate();
    } catch (const InvalidArgument& e) {
      fail(where + ": " + e.what());
    }
    if (!(obstacles[i].spawn_time >= 0.0)) fail(where + ".spawn_time must be nonnegative");
  }
}

MpcConfig Scenario::mpc_config(const AircraftSpec& a) const {
  MpcConfig c;
  c.horizon = solver.horizon;
  c.dt = dt;
  c.wheelbase = a.params.length;
  c.weights = solver.weights;
  c.cbf = solver.cbf;
  c.sqp = solver.sqp;
  c.bounds = a.params.bounds;
  c.speed_limits = a.params.speed_limits;
  return c;
}

const AircraftPlan& Plan::find(const AircraftId& id) const {
  for (const auto& a : aircraft) {
    if (a.id == id) return a;
  }
  throw NotFound("no plan for aircraft '" + id + "'");
}

Plan plan_phase(const Scenario& s) {
  s.validate();
  Plan plan;
  std::map<AircraftId, std::vector<ZonePin>> pins;
  // Arc length of each aircraft's entry into each zone it crosses.
  std::map<AircraftId, std::map<std::string, double>> entry_s;
  for (const auto& a : s.aircraft) {
    for (const auto& z : s.zones) {
      if (auto c = polyline_disk_crossing(a.route, z.center, z.radius)) entry_s[a.id][z.id] = c->s_in;
    }
  }
  // Zones are resolved in order of their earliest estimated entry; delays
  // from zones already resolved shift the estimates for zones further along
  // each route.
  struct Pending {
    std::size_t zone;
    double earliest;
  };
  std::vector<Pending> order;
  for (std::size_t zi = 0; zi < s.zones.size(); ++zi) {
    double earliest = kInf;
    for (const auto& a : s.aircraft) {
      if (auto slot = estimate_initial_slots(a.id, a.route, a.params.operating_speed, s.zones[zi], 0.0)) {
        earliest = std::min(earliest, slot->t_in);
      }
    }
    order.push_back({zi, earliest});
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const Pending& a, const Pending& b) { return a.earliest < b.earliest; });

  std::map<AircraftId, std::vector<std::pair<double, double>>> delays;  // (s_in, delay)
  std::map<AircraftId, int> priorities;
  for (const auto& a : s.aircraft) priorities[a.id] = a.params.priority;

  for (const Pending& p : order) {
    const ConflictZone& zone = s.zones[p.zone];
    ZoneSchedule sched;
    sched.zone_id = zone.id;
    for (const auto& a : s.aircraft) {
      auto slot = estimate_initial_slots(a.id, a.route, a.params.operating_speed, zone, 0.0);
      if (!slot) continue;
      if (s.policy == Policy::kSafeTaxi) {
        double shift = 0.0;
        for (const auto& [s_in, d] : delays[a.id]) {
          if (s_in < entry_s[a.id][zone.id]) shift += d;
        }
        slot->t_in += shift;
        slot->t_out += shift;
      }
      sched.initial.push_back(*slot);
    }
    if (sched.initial.empty()) {
      plan.zones.push_back(sched);
      continue;
    }
    if (s.policy == Policy::kSafeTaxi) {
      std::map<AircraftId, int> prio;
      for (const auto& sl : sched.initial) prio[sl.aircraft_id] = priorities[sl.aircraft_id];
      const auto res = resolve_intersection(sched.initial, prio, s.dt_safe,
                                            s.seed + 0x9E3779B97F4A7C15ULL * (p.zone + 1), s.slot_gap);
      sched.order = res.order;
      sched.resolved = res.slots;
      sched.repaired_edges = res.graph.repaired_edges;
      for (const auto& sl : res.slots) {
        const auto init = std::find_if(sched.initial.begin(), sched.initial.end(),
                                       [&](const IntersectionSlot& x) { return x.aircraft_id == sl.aircraft_id; });
        delays[sl.aircraft_id].push_back({entry_s[sl.aircraft_id][zone.id], sl.t_in - init->t_in});
        pins[sl.aircraft_id].push_back({zone, sl.t_in, sl.t_out});
      }
    } else {
      sched.resolved = sched.initial;
      std::stable_sort(sched.resolved.begin(), sched.resolved.end(),
                       [](const IntersectionSlot& a, const IntersectionSlot& b) { return a.t_in < b.t_in; });
      for (const auto& sl : sched.resolved) sched.order.sequence.push_back(sl.aircraft_id);
    }
    plan.zones.push_back(sched);
  }

  for (const auto& a : s.aircraft) {
    AircraftPlan ap;
    ap.id = a.id;
    ap.pins = pins[a.id];
    ReferenceOptions opt;
    opt.poly_order = s.solver.poly_order;
    opt.snap_order = s.solver.snap_order;
    opt.start_speed = a.initial_state().v;
    ap.spline = build_reference(a.route, ap.pins, a.params.operating_speed, 0.0, opt);
    plan.aircraft.push_back(std::move(ap));
  }
  return plan;
}

bool detect_deadlock(std::span<const DeadlockTrack> tracks, double min_displacement) {
  if (tracks.empty()) return false;
  for (const auto& tr : tracks) {
    if (tr.at_goal || tr.positions.empty()) return false;
    for (const Vec2& p : tr.positions) {
      if ((p - tr.positions.front()).norm() >= min_displacement) return false;
    }
  }
  return true;
}

double variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

RunResult run(const Scenario& s) { return run(s, plan_phase(s)); }

RunResult run(const Scenario& s, const Plan& plan) {
  s.validate();
  const std::size_t n = s.aircraft.size();
  const double dt = s.dt;
  const double d_safe = s.solver.cbf.d_safe;
  const int N = s.solver.horizon;

  std::vector<AircraftState> x(n);
  std::vector<bool> active(n, true);
  std::vector<MpcController> controllers;
  std::vector<const PolySpline*> splines(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = s.aircraft[i].initial_state();
    controllers.emplace_back(s.mpc_config(s.aircraft[i]));
    splines[i] = &plan.find(s.aircraft[i].id).spline;
  }
  std::optional<WaitAndGoCoordinator> wag;
  if (s.policy == Policy::kWaitAndGo) {
    wag.emplace(s.zones, N * dt);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = s.aircraft[i];
      wag->add_aircraft(a.id, *splines[i],
                        zone_approaches(a.route, *splines[i], s.zones, a.params.operating_speed, 0.0, d_safe));
    }
  }

  RunResult result;
  result.plan = plan;
  SimLog& log = result.log;
  log.dt = dt;
  log.min_separation = kInf;
  log.min_obstacle_distance = kInf;

  std::vector<std::map<std::string, bool>> inside(n);
  auto zone_check = [&](std::size_t i, double t, bool emit) {
    for (const auto& z : s.zones) {
      const bool in = (x[i].position() - z.center).norm() < z.radius;
      bool& was = inside[i][z.id];
      if (in && !was && emit) {
        log.events.push_back({t, "zone_entry", s.aircraft[i].id, z.id});
        log.zone_presence[s.aircraft[i].id][z.id] = {t, kNaN};
      } else if (!in && was && emit) {
        log.events.push_back({t, "zone_exit", s.aircraft[i].id, z.id});
        log.zone_presence[s.aircraft[i].id][z.id].second = t;
      }
      if (in && !was && !emit) log.zone_presence[s.aircraft[i].id][z.id] = {t, kNaN};
      was = in;
    }
  };
  for (std::size_t i = 0; i < n; ++i) zone_check(i, 0.0, false);

  std::set<std::pair<std::size_t, std::size_t>> violating_pairs;
  std::set<std::pair<std::size_t, std::size_t>> violating_obstacles;
  auto safety_check = [&](double t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const double d = (x[i].position() - x[j].position()).norm();
        log.min_separation = std::min(log.min_separation, d);
        const double need = s.aircraft[i].params.body_radius() + s.aircraft[j].params.body_radius() + d_safe;
        const auto key = std::make_pair(i, j);
        if (d < need - kSafetyTol) {
          if (violating_pairs.insert(key).second) {
            ++log.safety_violations;
            log.events.push_back({t, "safety_violation", s.aircraft[i].id,
                                  "aircraft " + s.aircraft[j].id + " at " + fmt(d) + " m"});
          }
        } else {
          violating_pairs.erase(key);
        }
      }
      for (std::size_t j = 0; j < s.obstacles.size(); ++j) {
        const auto o = s.obstacles[j].at(t);
        if (!o) continue;
        const double d = (x[i].position() - o->position).norm();
        log.min_obstacle_distance = std::min(log.min_obstacle_distance, d);
        const auto key = std::make_pair(i, j);
        if (d < o->radius + d_safe - kSafetyTol) {
          if (violating_obstacles.insert(key).second) {
            ++log.safety_violations;
            log.events.push_back({t, "safety_violation", s.aircraft[i].id,
                                  "obstacle " + std::to_string(j) + " at " + fmt(d) + " m"});
          }
        } else {
          violating_obstacles.erase(key);
        }
      }
    }
  };
  safety_check(0.0);

  const int window_steps = std::max(1, static_cast<int>(std::llround(s.deadlock_window / dt)));
  std::vector<std::deque<Vec2>> history(n);
  for (std::size_t i = 0; i < n; ++i) history[i].push_back(x[i].position());

  // Barrier rows seen by aircraft i at time t: obstacle or other aircraft
  // center and the radius used in the controller.
  struct Row {
    Vec2 pos;
    Vec2 vel;
    double radius;
  };
  auto rows_for = [&](std::size_t i, double t) {
    std::vector<Row> rows;
    for (const auto& os : s.obstacles) {
      if (auto o = os.at(t)) rows.push_back({o->position, o->velocity, o->radius});
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      rows.push_back({x[j].position(), x[j].v * Vec2(std::cos(x[j].theta), std::sin(x[j].theta)),
                      s.aircraft[i].params.body_radius() + s.aircraft[j].params.body_radius()});
    }
    return rows;
  };

  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    bool any_active = false;
    for (std::size_t i = 0; i < n; ++i) any_active = any_active || active[i];
    if (!any_active) break;
    if (t > s.max_sim_time + 1e-9) {
      log.timeout = true;
      log.events.push_back({t, "timeout", "", "max_sim_time " + fmt(s.max_sim_time) + " s reached"});
      break;
    }
    log.times.push_back(t);

    if (wag) {
      std::vector<WaitAndGoAgent> views;
      for (std::size_t i = 0; i < n; ++i) {
        views.push_back({s.aircraft[i].id, s.aircraft[i].params.priority, x[i].position(), active[i]});
      }
      wag->update(t, dt, views);
    }

    // Snapshot of every barrier row and reference before anyone moves.
    std::vector<std::vector<Row>> rows(n);
    std::vector<std::vector<ReferenceState>> refs(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      rows[i] = rows_for(i, t);
      refs[i] = wag ? wag->reference(s.aircraft[i].id, N, dt) : reference_window(*splines[i], t, N, dt);
    }
    std::vector<MpcController::StepResult> results(n);
    auto solve_one = [&](std::size_t i) {
      std::vector<ObstaclePrediction> preds;
      preds.reserve(rows[i].size());
      for (const Row& r : rows[i]) preds.push_back(predict_obstacle({r.pos, r.radius, r.vel}, N, dt));
      results[i] = controllers[i].step(x[i], refs[i], preds);
    };
    if (s.parallel) {
      std::vector<std::thread> threads;
      for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) threads.emplace_back(solve_one, i);
      }
      for (auto& th : threads) th.join();
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) solve_one(i);
      }
    }

    std::vector<AircraftState> next = x;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      const auto& a = s.aircraft[i];
      next[i] = step_dynamics(x[i], results[i].applied, dt, a.params.length);
      next[i].v = a.params.speed_limits.clamp(next[i].v);
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      StepRecord rec;
      rec.t = t;
      rec.id = s.aircraft[i].id;
      rec.x = x[i];
      rec.u = results[i].applied;
      rec.slack = results[i].solution.max_slack();
      rec.fallback = results[i].fallback;
      rec.min_h = kInf;
      // Row positions one step later: obstacles move at constant velocity,
      // aircraft to their new state.
      std::size_t r = 0;
      for (const auto& os : s.obstacles) {
        if (!os.at(t)) continue;
        const Row& row = rows[i][r++];
        const double h0 = cbf_h(x[i], row.pos, row.radius, d_safe);
        const double h1 = cbf_h(next[i], row.pos + dt * row.vel, row.radius, d_safe);
        rec.min_h = std::min(rec.min_h, h0);
        if (cbf_residual(h1, h0, s.solver.cbf.gamma) <= 0.1 * std::abs(h0)) rec.near_active = true;
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !active[j]) continue;
        const Row& row = rows[i][r++];
        const double h0 = cbf_h(x[i], row.pos, row.radius, d_safe);
        const double h1 = cbf_h(next[i], next[j].position(), row.radius, d_safe);
        rec.min_h = std::min(rec.min_h, h0);
        if (cbf_residual(h1, h0, s.solver.cbf.gamma) <= 0.1 * std::abs(h0)) rec.near_active = true;
      }
      for (const auto& z : s.zones) {
        if ((x[i].position() - z.center).norm() <= z.radius + kZoneWindow) rec.near_zone = true;
      }
      if (results[i].fallback) {
        log.events.push_back({t, "fallback", rec.id, results[i].solution.diagnostic});
      }
      log.rows.push_back(std::move(rec));
    }

    x = next;
    const double t1 = static_cast<double>(k + 1) * dt;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      zone_check(i, t1, true);
    }
    safety_check(t1);
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      const auto& a = s.aircraft[i];
      if ((x[i].position() - a.goal()).norm() <= a.params.goal_tolerance) {
        active[i] = false;
        log.goal_times[a.id] = t1;
        log.events.push_back({t1, "goal", a.id, ""});
        for (auto& [zid, pres] : log.zone_presence[a.id]) {
          if (std::isnan(pres.second)) pres.second = t1;
        }
      }
    }

    std::vector<DeadlockTrack> tracks;
    bool full = true;
    for (std::size_t i = 0; i < n; ++i) {
      history[i].push_back(x[i].position());
      while (static_cast<int>(history[i].size()) > window_steps + 1) history[i].pop_front();
      if (!active[i]) continue;
      if (static_cast<int>(history[i].size()) < window_steps + 1) full = false;
      tracks.push_back({std::vector<Vec2>(history[i].begin(), history[i].end()), false});
    }
    if (full && detect_deadlock(tracks, s.deadlock_displacement)) {
      log.deadlock = true;
      std::string who;
      for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) who += (who.empty() ? "" : ",") + s.aircraft[i].id;
      }
      log.events.push_back({t1, "deadlock", "", "no progress over " + fmt(s.deadlock_window) + " s: " + who});
      break;
    }
  }
  result.metrics = compute_metrics(log, s.policy);
  // Completion also requires every scenario aircraft to have arrived.
  result.metrics.completed = log.goal_times.size() == n && !log.deadlock && !log.timeout;
  if (!result.metrics.completed) result.metrics.comp_time = kNaN;
  return result;
}

Metrics compute_metrics(const SimLog& log, Policy policy) {
  Metrics m;
  m.policy = policy;
  std::map<AircraftId, std::vector<double>> beta, beta_w;
  for (const auto& r : log.rows) {
    beta[r.id].push_back(r.u.beta);
    if (r.near_active || r.near_zone) beta_w[r.id].push_back(r.u.beta);
    m.max_slack = std::max(m.max_slack, r.slack);
    if (r.fallback) ++m.fallbacks;
  }
  double acc = 0.0;
  for (const auto& [id, b] : beta) acc += variance(b);
  m.avg_acc_var = beta.empty() ? 0.0 : acc / static_cast<double>(beta.size());
  double acc_w = 0.0;
  int count_w = 0;
  for (const auto& [id, b] : beta_w) {
    if (b.size() < 2) continue;
    acc_w += variance(b);
    ++count_w;
  }
  m.avg_acc_var_windowed = count_w ? acc_w / count_w : 0.0;
  m.deadlock = log.deadlock;
  m.timeout = log.timeout;
  m.min_separation = log.min_separation;
  m.min_obstacle_distance = log.min_obstacle_distance;
  m.safety_violations = log.safety_violations;
  m.completed = !log.deadlock && !log.timeout && beta.size() == log.goal_times.size();
  if (m.completed && !log.goal_times.empty()) {
    double last = 0.0;
    for (const auto& [id, t] : log.goal_times) last = std::max(last, t);
    m.comp_time = last - (log.times.empty() ? 0.0 : log.times.front());
  } else {
    m.comp_time = kNaN;
  }
  return m;
}

PolicyComparison compare_policies(const Scenario& s) {
  PolicyComparison c;
  for (Policy p : {Policy::kSafeTaxi, Policy::kNaive, Policy::kWaitAndGo}) {
    Scenario sp = s;
    sp.policy = p;
    c.runs.push_back(run(sp));
  }
  return c;
}

}  // namespace autotaxi
