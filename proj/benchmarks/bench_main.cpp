#include "autotaxi/conflict.hpp"
#include "autotaxi/mpc.hpp"
#include "autotaxi/qp.hpp"
#include "autotaxi/trajectory.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace autotaxi {
namespace {

PolySpline straight_reference() {
  std::vector<Vec2> route;
  for (int i = 0; i <= 12; ++i) route.push_back({i - 6.0, 0.0});
  return build_reference(route, {}, 0.5, 0.0);
}

// One receding-horizon solve with N = 15 and four obstacles near the path,
// the size each aircraft solves every control step.
void BM_MpcSolve(benchmark::State& state) {
  const PolySpline ref = straight_reference();
  MpcConfig cfg;
  cfg.horizon = 15;
  const std::vector<Obstacle> obstacles = {{{0.5, 0.6}, 0.15, {0.0, -0.1}},
                                           {{1.5, -0.7}, 0.15, {0.0, 0.1}},
                                           {{-0.5, 1.0}, 0.15, {0.05, -0.05}},
                                           {{2.5, 0.5}, 0.15, {-0.1, 0.0}}};
  const AircraftState x0{-1.0, 0.05, 0.02, 0.5};
  for (auto _ : state) {
    MpcSolution s = solve_mpc(x0, ref, 10.0, obstacles, cfg);
    benchmark::DoNotOptimize(s.cost);
  }
}
BENCHMARK(BM_MpcSolve)->Unit(benchmark::kMillisecond);

void BM_QpSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  QuadProgram qp;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  qp.H = M * M.transpose() + Eigen::MatrixXd::Identity(n, n);
  qp.g = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
  qp.A_in = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
  qp.b_in = Eigen::VectorXd::Constant(n, -1.0);
  qp.lower = Eigen::VectorXd::Constant(n, -1.0);
  qp.upper = Eigen::VectorXd::Constant(n, 1.0);
  for (auto _ : state) {
    QpSolution s = solve_qp(qp);
    benchmark::DoNotOptimize(s.z.data());
  }
}
BENCHMARK(BM_QpSolve)->Arg(20)->Arg(60)->Unit(benchmark::kMicrosecond);

void BM_MinSnap(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  std::vector<TimedWaypoint> wps;
  for (int i = 0; i <= m; ++i) wps.push_back({{i * 1.0, (i % 2) * 0.3}, i * 2.0});
  for (auto _ : state) {
    PolySpline s = min_snap(wps);
    benchmark::DoNotOptimize(s.cost());
  }
}
BENCHMARK(BM_MinSnap)->Arg(8)->Arg(24)->Unit(benchmark::kMicrosecond);

void BM_ResolveIntersection(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> t(0.0, 20.0), d(1.0, 4.0);
  std::vector<IntersectionSlot> slots;
  std::map<AircraftId, int> prio;
  for (int i = 0; i < n; ++i) {
    const double a = t(rng);
    slots.push_back({"A" + std::to_string(i), a, a + d(rng)});
    prio[slots.back().aircraft_id] = static_cast<int>(rng() % 3);
  }
  for (auto _ : state) {
    IntersectionResolution r = resolve_intersection(slots, prio, 3.0, 1);
    benchmark::DoNotOptimize(r.slots.data());
  }
}
BENCHMARK(BM_ResolveIntersection)->Arg(4)->Arg(16)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace autotaxi

// libbenchmark_main from the distro is built with a different LTO version.
BENCHMARK_MAIN();
