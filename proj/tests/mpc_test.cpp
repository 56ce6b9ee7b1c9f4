#include "autotaxi/mpc.hpp"
#include "autotaxi/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace autotaxi {
namespace {

// Reference produced by the true dynamics under a fixed input sequence.
std::vector<ReferenceState> dynamic_reference(const AircraftState& x0,
                                              const std::function<ControlInput(int)>& u, int steps,
                                              double dt, double L) {
  std::vector<ReferenceState> r = {x0};
  for (int k = 0; k < steps; ++k) r.push_back(step_dynamics(r.back(), u(k), dt, L));
  return r;
}

std::vector<ReferenceState> window(const std::vector<ReferenceState>& full, int k, int N) {
  std::vector<ReferenceState> w;
  for (int l = 0; l <= N; ++l) {
    w.push_back(full[std::min<std::size_t>(full.size() - 1, static_cast<std::size_t>(k + l))]);
  }
  return w;
}

TEST(Cbf, BarrierExamples) {
  const AircraftState x{0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(cbf_h(x, Vec2(3, 4), 1.0, 1.0), 21.0);
  EXPECT_NEAR(cbf_h(x, Vec2(2, 0), 1.5, 0.5), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(cbf_h(x, Vec2(0, 0), 0.7, 0.3), -1.0);
}

TEST(Cbf, ResidualExamples) {
  EXPECT_DOUBLE_EQ(cbf_residual(3.5, 100.0, 1.0), 3.5);
  EXPECT_NEAR(cbf_residual(9.0, 10.0, 0.1), 0.0, 1e-12);
  for (double g : {0.05, 0.3, 1.0}) EXPECT_NEAR(cbf_residual(2.0, 2.0, g), g * 2.0, 1e-15);
}

TEST(StageCost, WeightExamples) {
  const MpcWeights w;
  const AircraftState ref{1, 2, 0.3, 0.5};
  EXPECT_EQ(stage_cost(ref, ref, {0.1, 0.2}, {0.1, 0.2}, w), 0.0);
  EXPECT_DOUBLE_EQ(stage_cost({2, 2, 0.3, 0.5}, ref, {0, 0}, {0, 0}, w), 10.0);
  EXPECT_DOUBLE_EQ(stage_cost(ref, ref, {0, 1}, {0, 0}, w), 0.1);
}

TEST(StageCost, HeadingErrorIsWrapped) {
  const MpcWeights w;
  const AircraftState a{0, 0, std::numbers::pi - 0.01, 0};
  const AircraftState b{0, 0, -std::numbers::pi + 0.01, 0};
  EXPECT_NEAR(stage_cost(a, b, {}, {}, w), 5.0 * 0.02 * 0.02, 1e-12);
}

TEST(BuildNlp, Counts) {
  MpcConfig cfg;
  const std::vector<ReferenceState> ref(16);
  auto nlp = build_nlp({}, ref, {}, {}, cfg);
  EXPECT_EQ(nlp.num_cbf_rows, 0);
  EXPECT_EQ(nlp.num_slacks, 0);
  EXPECT_EQ(nlp.num_inputs, 30);
  EXPECT_TRUE(nlp.has_terminal_cost);
  const std::vector<ObstaclePrediction> obs = {predict_obstacle({Vec2(5, 0), 0.2, Vec2(0, 0)}, 15, 0.1),
                                               predict_obstacle({Vec2(0, 5), 0.2, Vec2(0.1, 0)}, 15, 0.1)};
  nlp = build_nlp({}, ref, obs, {}, cfg);
  EXPECT_EQ(nlp.num_cbf_rows, 30);
  EXPECT_EQ(nlp.num_slacks, 30);
  EXPECT_THROW(build_nlp({}, std::vector<ReferenceState>(15), {}, {}, cfg), InvalidArgument);
}

TEST(BuildNlp, TerminalWeightEntersCost) {
  MpcConfig cfg;
  cfg.horizon = 2;
  std::vector<ReferenceState> ref(3);
  auto nlp = build_nlp({}, ref, {}, {}, cfg);
  std::vector<AircraftState> xs(3);
  xs[2].px = 1.0;
  const std::vector<ControlInput> us(2);
  EXPECT_DOUBLE_EQ(nlp_cost(nlp, xs, us, Eigen::MatrixXd(2, 0)), cfg.weights.P(0, 0));
  cfg.weights.P(0, 0) = 3.0;
  nlp = build_nlp({}, ref, {}, {}, cfg);
  EXPECT_DOUBLE_EQ(nlp_cost(nlp, xs, us, Eigen::MatrixXd(2, 0)), 3.0);
}

TEST(MpcConfig, Validation) {
  MpcConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.cbf.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = MpcConfig{};
  cfg.horizon = 1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = MpcConfig{};
  cfg.weights.Q(0, 0) = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(SolveMpc, ZeroErrorTrackingOnConsistentReference) {
  MpcConfig cfg;
  const AircraftState x0{1.0, -2.0, 0.4, 0.5};
  const auto ref = dynamic_reference(x0, [](int) { return ControlInput{}; }, 15, cfg.dt, cfg.wheelbase);
  const auto sol = solve_mpc(build_nlp(x0, ref, {}, {}, cfg));
  ASSERT_TRUE(sol.ok()) << sol.diagnostic;
  EXPECT_LT(sol.cost, 1e-6);
  for (const auto& u : sol.inputs) {
    EXPECT_NEAR(u.phi, 0.0, 1e-4);
    EXPECT_NEAR(u.beta, 0.0, 1e-4);
  }
}

TEST(SolveMpc, SplineOverloadTracksStraightLine) {
  MpcConfig cfg;
  const std::vector<Vec2> route = {Vec2(0, 0), Vec2(10, 0)};
  const PolySpline s = build_reference(route, {}, 0.5, 0.0);
  const auto sol = solve_mpc(AircraftState{0, 0, 0, 0.5}, s, 0.0, {}, cfg);
  ASSERT_TRUE(sol.ok());
  EXPECT_LT(sol.cost, 1e-6);
}

TEST(SolveMpc, InputBoundsAreHard) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  MpcConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const AircraftState x0{U(rng), U(rng), 3.0 * U(rng), 0.5 + 0.5 * U(rng)};
    // Far-away reference forces saturation.
    std::vector<ReferenceState> ref;
    for (int l = 0; l <= cfg.horizon; ++l) ref.push_back({5.0 * U(rng), 5.0 * U(rng), 3.0 * U(rng), 2.0});
    const auto sol = solve_mpc(build_nlp(x0, ref, {}, {}, cfg));
    ASSERT_TRUE(sol.ok());
    for (const auto& u : sol.inputs) {
      EXPECT_LE(std::abs(u.phi), cfg.bounds.phi_max + 1e-9);
      EXPECT_LE(std::abs(u.beta), cfg.bounds.beta_max + 1e-9);
    }
    for (const auto& x : sol.states) {
      EXPECT_GE(x.v, cfg.speed_limits.v_min - 1e-6);
      EXPECT_LE(x.v, cfg.speed_limits.v_max + 1e-6);
    }
  }
}

TEST(SolveMpc, WarmAndColdStartAgree) {
  MpcConfig cfg;
  cfg.sqp.max_iters = 50;
  cfg.sqp.step_tol = 1e-9;
  const AircraftState x0{0, 0.1, 0.05, 0.5};
  const auto ref = dynamic_reference({0, 0, 0, 0.5}, [](int k) { return ControlInput{k < 8 ? 0.1 : -0.1, 0.0}; },
                                     15, cfg.dt, cfg.wheelbase);
  const std::vector<ObstaclePrediction> obs = {
      predict_obstacle({Vec2(1.2, 0.5), 0.2, Vec2(0, -0.1)}, cfg.horizon, cfg.dt)};
  const auto nlp = build_nlp(x0, ref, obs, {}, cfg);
  const auto cold = solve_mpc(nlp);
  ASSERT_TRUE(cold.ok());
  std::vector<ControlInput> warm = cold.inputs;
  for (auto& u : warm) {
    u.phi += 0.05;
    u.beta -= 0.1;
  }
  const auto hot = solve_mpc(nlp, warm);
  ASSERT_TRUE(hot.ok());
  EXPECT_NEAR(hot.cost, cold.cost, 1e-4 * std::max(1.0, cold.cost));
}

struct ClosedLoopRecord {
  std::vector<AircraftState> states;
  std::vector<double> max_slack;
};

ClosedLoopRecord run_closed_loop(MpcController& ctl, AircraftState x,
                                 const std::vector<ReferenceState>& ref,
                                 const std::vector<Obstacle>& obstacles, int steps) {
  const auto& cfg = ctl.config();
  ClosedLoopRecord rec;
  rec.states.push_back(x);
  for (int k = 0; k < steps; ++k) {
    std::vector<ObstaclePrediction> preds;
    for (const auto& o : obstacles) {
      Obstacle now = o;
      now.position += k * cfg.dt * o.velocity;
      preds.push_back(predict_obstacle(now, cfg.horizon, cfg.dt));
    }
    const auto res = ctl.step(x, window(ref, k, cfg.horizon), preds);
    rec.max_slack.push_back(res.solution.max_slack());
    x = step_dynamics(x, res.applied, cfg.dt, cfg.wheelbase);
    x.v = cfg.speed_limits.clamp(x.v);
    rec.states.push_back(x);
  }
  return rec;
}

TEST(MpcController, StaticObstacleOnPathKeepsClearance) {
  MpcConfig cfg;
  MpcController ctl(cfg);
  const auto ref = dynamic_reference({0, 0, 0, 0.5}, [](int) { return ControlInput{}; }, 200, cfg.dt,
                                     cfg.wheelbase);
  const Obstacle ob{Vec2(3.0, 0.0), 0.3, Vec2::Zero()};
  const auto rec = run_closed_loop(ctl, {0, 0, 0, 0.5}, ref, {ob}, 150);
  double min_clear = 1e9;
  for (const auto& x : rec.states) min_clear = std::min(min_clear, (x.position() - ob.position).norm());
  EXPECT_GE(min_clear, ob.radius + cfg.cbf.d_safe - 1e-3);
  for (const auto& x : rec.states) {
    EXPECT_GE(cbf_h(x, ob.position, ob.radius, cfg.cbf.d_safe), -1e-6);
  }
}

TEST(MpcController, MovingObstacleDecayBound) {
  MpcConfig cfg;
  MpcController ctl(cfg);
  const auto ref = dynamic_reference({0, 0, 0, 0.5}, [](int) { return ControlInput{}; }, 200, cfg.dt,
                                     cfg.wheelbase);
  const Obstacle ob{Vec2(4.0, -1.5), 0.2, Vec2(0.0, 0.1)};
  const auto rec = run_closed_loop(ctl, {0, 0, 0, 0.5}, ref, {ob}, 150);
  std::vector<double> h;
  for (std::size_t k = 0; k < rec.states.size(); ++k) {
    h.push_back(cbf_h(rec.states[k], ob.position + k * cfg.dt * ob.velocity, ob.radius, cfg.cbf.d_safe));
  }
  double max_slack = 0.0;
  for (double s : rec.max_slack) max_slack = std::max(max_slack, s);
  if (max_slack <= 1e-6) {
    for (double v : h) EXPECT_GE(v, -1e-6);
  }
  // On every run of steps whose residual is nonnegative, h decays at most
  // geometrically from the run's first value.
  std::size_t start = 0;
  for (std::size_t k = 0; k + 1 < h.size(); ++k) {
    if (cbf_residual(h[k + 1], h[k], cfg.cbf.gamma) < 0.0) {
      start = k + 1;
      continue;
    }
    const double bound = std::pow(1.0 - cfg.cbf.gamma, static_cast<double>(k + 1 - start)) * h[start];
    EXPECT_GE(h[k + 1], bound - 1e-9);
  }
}

TEST(MpcController, TrackingErrorConvergesFromOffset) {
  MpcConfig cfg;
  const auto ref = dynamic_reference({0, 0, 0.2, 0.5},
                                     [](int k) { return ControlInput{0.1 * std::sin(0.05 * k), 0.0}; },
                                     200, cfg.dt, cfg.wheelbase);
  for (auto [dx, dth] : {std::pair{0.2, 0.1}, std::pair{-0.15, -0.1}, std::pair{0.0, 0.1}}) {
    MpcController ctl(cfg);
    const AircraftState x0{ref[0].px, ref[0].py + dx, ref[0].theta + dth, 0.5};
    const auto rec = run_closed_loop(ctl, x0, ref, {}, 100);
    const double err0 = (x0.position() - ref[0].position()).norm() + std::abs(dth);
    const double err2s = (rec.states[20].position() - ref[20].position()).norm();
    EXPECT_LT(err2s, 0.5 * err0);
    for (std::size_t k = 20; k < 100; ++k) {
      const double a = (rec.states[k].position() - ref[k].position()).norm();
      const double b = (rec.states[k + 1].position() - ref[k + 1].position()).norm();
      EXPECT_LE(b, a + 1e-4) << "k=" << k;
    }
    EXPECT_LT((rec.states[100].position() - ref[100].position()).norm(), 5e-3);
  }
}

TEST(MpcController, Deterministic) {
  MpcConfig cfg;
  const auto ref = dynamic_reference({0, 0, 0, 0.5}, [](int) { return ControlInput{}; }, 100, cfg.dt,
                                     cfg.wheelbase);
  const Obstacle ob{Vec2(2.0, 0.1), 0.2, Vec2(0, 0)};
  MpcController a(cfg), b(cfg);
  const auto ra = run_closed_loop(a, {0, 0, 0, 0.5}, ref, {ob}, 40);
  const auto rb = run_closed_loop(b, {0, 0, 0, 0.5}, ref, {ob}, 40);
  for (std::size_t k = 0; k < ra.states.size(); ++k) EXPECT_EQ(ra.states[k], rb.states[k]);
}

TEST(MpcController, FallbackBrakes) {
  const auto u = braking_fallback(InputBounds{});
  EXPECT_EQ(u.phi, 0.0);
  EXPECT_EQ(u.beta, -1.0);
}

}  // namespace
}  // namespace autotaxi
