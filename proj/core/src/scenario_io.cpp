#include "autotaxi/scenario_io.hpp"

#include "autotaxi/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace autotaxi {
namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& path,
                         const std::string& what) const {
    std::string where = origin_;
    if (at.IsDefined() && at.Mark().line >= 0) {
      where += ":" + std::to_string(at.Mark().line + 1);
    } else {
      where += " (override)";
    }
    throw ConfigError(where + ": " + path + ": " + what);
  }

  void only_keys(const YAML::Node& map, const std::string& path,
                 std::initializer_list<const char*> allowed) const {
    if (!map.IsMap()) fail(map, path, "expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = map.begin(); it != map.end(); ++it) {
      const std::string key = it->first.as<std::string>();
      if (!ok.count(key)) {
        const std::string full = path.empty() ? key : path + "." + key;
        fail(it->first, full, "unknown key");
      }
    }
  }

  double number(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected a number");
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected a number, got '" + n.Scalar() + "'");
    }
  }

  long long integer(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected an integer");
    try {
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected an integer, got '" + n.Scalar() + "'");
    }
  }

  std::uint64_t unsigned_integer(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected a nonnegative integer");
    try {
      return n.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected a nonnegative integer, got '" + n.Scalar() + "'");
    }
  }

  bool boolean(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected true or false");
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected true or false, got '" + n.Scalar() + "'");
    }
  }

  std::string text(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path, "expected a string");
    return n.Scalar();
  }

  Vec2 point(const YAML::Node& n, const std::string& path) const {
    if (!n.IsSequence() || n.size() != 2) fail(n, path, "expected [x, y]");
    return {number(n[0], path + "[0]"), number(n[1], path + "[1]")};
  }

  double positive(const YAML::Node& n, const std::string& path) const {
    const double v = number(n, path);
    if (!(v > 0.0)) fail(n, path, "must be positive");
    return v;
  }

  double nonnegative(const YAML::Node& n, const std::string& path) const {
    const double v = number(n, path);
    if (!(v >= 0.0)) fail(n, path, "must be nonnegative");
    return v;
  }

  template <int D>
  Eigen::Matrix<double, D, D> weight(const YAML::Node& n, const std::string& path) const {
    Eigen::Matrix<double, D, D> m = Eigen::Matrix<double, D, D>::Zero();
    if (!n.IsSequence() || n.size() != D) {
      fail(n, path, "expected " + std::to_string(D) + " diagonal entries or a " +
                        std::to_string(D) + "x" + std::to_string(D) + " matrix");
    }
    if (n[0].IsSequence()) {
      for (int i = 0; i < D; ++i) {
        const std::string row = path + "[" + std::to_string(i) + "]";
        if (!n[i].IsSequence() || n[i].size() != D) fail(n[i], row, "expected a matrix row");
        for (int j = 0; j < D; ++j) m(i, j) = number(n[i][j], row + "[" + std::to_string(j) + "]");
      }
    } else {
      for (int i = 0; i < D; ++i) m(i, i) = number(n[i], path + "[" + std::to_string(i) + "]");
    }
    return m;
  }

 private:
  std::string origin_;
};

void set_path(YAML::Node node, const std::vector<std::string>& keys, std::size_t i,
              const YAML::Node& value, const std::string& full) {
  const std::string& key = keys[i];
  const bool last = i + 1 == keys.size();
  if (node.IsSequence()) {
    char* end = nullptr;
    const unsigned long idx = std::strtoul(key.c_str(), &end, 10);
    if (key.empty() || *end != '\0' || idx >= node.size()) {
      throw ConfigError("--set " + full + ": '" + key + "' is not an index into a list of " +
                        std::to_string(node.size()));
    }
    if (last) {
      node[idx] = value;
    } else {
      set_path(node[idx], keys, i + 1, value, full);
    }
    return;
  }
  if (node.IsScalar()) throw ConfigError("--set " + full + ": '" + key + "' is inside a value");
  if (last) {
    node[key] = value;
  } else {
    if (!node[key]) node[key] = YAML::Node(YAML::NodeType::Map);
    set_path(node[key], keys, i + 1, value, full);
  }
}

void apply_override(YAML::Node root, const Override& o) {
  std::vector<std::string> keys;
  std::stringstream ss(o.path);
  for (std::string k; std::getline(ss, k, '.');) keys.push_back(k);
  if (keys.empty() || o.path.empty()) throw ConfigError("--set needs a key before '='");
  YAML::Node value;
  try {
    value = YAML::Load(o.value);
  } catch (const YAML::Exception& e) {
    throw ConfigError("--set " + o.path + ": cannot parse value '" + o.value + "': " + e.msg);
  }
  set_path(root, keys, 0, value, o.path);
}

AircraftSpec read_aircraft(const Reader& r, const YAML::Node& n, const std::string& path) {
  r.only_keys(n, path,
              {"id", "route", "start", "length", "operating_speed", "priority", "goal_tolerance",
               "phi_max", "beta_max", "v_min", "v_max"});
  AircraftSpec a;
  if (!n["id"]) r.fail(n, path + ".id", "required");
  a.id = r.text(n["id"], path + ".id");
  const YAML::Node route = n["route"];
  if (!route) r.fail(n, path + ".route", "required");
  if (!route.IsSequence()) r.fail(route, path + ".route", "expected a list of [x, y] points");
  for (std::size_t i = 0; i < route.size(); ++i) {
    a.route.push_back(r.point(route[i], path + ".route[" + std::to_string(i) + "]"));
  }
  if (a.route.size() < 2) r.fail(route, path + ".route", "needs at least two points");
  AircraftParams& p = a.params;
  if (n["length"]) p.length = r.positive(n["length"], path + ".length");
  if (n["operating_speed"]) {
    p.operating_speed = r.positive(n["operating_speed"], path + ".operating_speed");
  }
  if (n["priority"]) p.priority = static_cast<int>(r.integer(n["priority"], path + ".priority"));
  if (n["goal_tolerance"]) {
    p.goal_tolerance = r.positive(n["goal_tolerance"], path + ".goal_tolerance");
  }
  if (n["phi_max"]) p.bounds.phi_max = r.positive(n["phi_max"], path + ".phi_max");
  if (n["beta_max"]) p.bounds.beta_max = r.positive(n["beta_max"], path + ".beta_max");
  if (n["v_min"]) p.speed_limits.v_min = r.nonnegative(n["v_min"], path + ".v_min");
  if (n["v_max"]) p.speed_limits.v_max = r.positive(n["v_max"], path + ".v_max");
  if (const YAML::Node st = n["start"]) {
    const std::string sp = path + ".start";
    r.only_keys(st, sp, {"px", "py", "theta", "v"});
    AircraftState x = a.initial_state();
    if (st["px"]) x.px = r.number(st["px"], sp + ".px");
    if (st["py"]) x.py = r.number(st["py"], sp + ".py");
    if (st["theta"]) x.theta = wrap_angle(r.number(st["theta"], sp + ".theta"));
    if (st["v"]) x.v = r.number(st["v"], sp + ".v");
    a.start = x;
  }
  return a;
}

ConflictZone read_zone(const Reader& r, const YAML::Node& n, const std::string& path) {
  r.only_keys(n, path, {"id", "center", "radius"});
  ConflictZone z;
  if (!n["id"]) r.fail(n, path + ".id", "required");
  z.id = r.text(n["id"], path + ".id");
  if (!n["center"]) r.fail(n, path + ".center", "required");
  z.center = r.point(n["center"], path + ".center");
  if (!n["radius"]) r.fail(n, path + ".radius", "required");
  z.radius = r.positive(n["radius"], path + ".radius");
  return z;
}

ObstacleSpec read_obstacle(const Reader& r, const YAML::Node& n, const std::string& path) {
  r.only_keys(n, path, {"position", "velocity", "radius", "spawn_time"});
  ObstacleSpec o;
  if (!n["position"]) r.fail(n, path + ".position", "required");
  o.obstacle.position = r.point(n["position"], path + ".position");
  if (n["velocity"]) o.obstacle.velocity = r.point(n["velocity"], path + ".velocity");
  if (!n["radius"]) r.fail(n, path + ".radius", "required");
  o.obstacle.radius = r.positive(n["radius"], path + ".radius");
  if (n["spawn_time"]) o.spawn_time = r.nonnegative(n["spawn_time"], path + ".spawn_time");
  return o;
}

void read_solver(const Reader& r, const YAML::Node& n, SolverSettings& s) {
  r.only_keys(n, "solver",
              {"horizon", "poly_order", "snap_order", "Q", "R", "P", "gamma", "d_safe",
               "sqp_max_iters", "step_tol", "slack_penalty", "slack_linear_penalty"});
  if (n["horizon"]) s.horizon = static_cast<int>(r.integer(n["horizon"], "solver.horizon"));
  if (n["poly_order"]) {
    s.poly_order = static_cast<int>(r.integer(n["poly_order"], "solver.poly_order"));
  }
  if (n["snap_order"]) {
    s.snap_order = static_cast<int>(r.integer(n["snap_order"], "solver.snap_order"));
  }
  if (n["Q"]) s.weights.Q = r.weight<4>(n["Q"], "solver.Q");
  if (n["R"]) s.weights.R = r.weight<2>(n["R"], "solver.R");
  // The terminal weight follows Q unless given.
  s.weights.P = n["P"] ? r.weight<4>(n["P"], "solver.P") : s.weights.Q;
  if (n["gamma"]) s.cbf.gamma = r.number(n["gamma"], "solver.gamma");
  if (n["d_safe"]) s.cbf.d_safe = r.nonnegative(n["d_safe"], "solver.d_safe");
  if (n["sqp_max_iters"]) {
    s.sqp.max_iters = static_cast<int>(r.integer(n["sqp_max_iters"], "solver.sqp_max_iters"));
  }
  if (n["step_tol"]) s.sqp.step_tol = r.positive(n["step_tol"], "solver.step_tol");
  if (n["slack_penalty"]) {
    s.sqp.slack_penalty = r.positive(n["slack_penalty"], "solver.slack_penalty");
  }
  if (n["slack_linear_penalty"]) {
    s.sqp.slack_linear_penalty =
        r.nonnegative(n["slack_linear_penalty"], "solver.slack_linear_penalty");
  }
}

// Shortest decimal form that reads back as the same double.
std::string num(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string point(const Vec2& p) { return "[" + num(p.x()) + ", " + num(p.y()) + "]"; }

template <int D>
std::string weight(const Eigen::Matrix<double, D, D>& m) {
  const bool diagonal = (m - Eigen::Matrix<double, D, D>(m.diagonal().asDiagonal())).isZero(0.0);
  std::string out = "[";
  for (int i = 0; i < D; ++i) {
    if (i) out += ", ";
    if (diagonal) {
      out += num(m(i, i));
      continue;
    }
    out += "[";
    for (int j = 0; j < D; ++j) out += (j ? ", " : "") + num(m(i, j));
    out += "]";
  }
  return out + "]";
}

}  // namespace

Override parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

Scenario parse_scenario(const std::string& text, const std::vector<Override>& overrides,
                        const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const Override& o : overrides) apply_override(root, o);

  const Reader r(origin);
  r.only_keys(root, "",
              {"name", "seed", "policy", "dt", "dt_safe", "slot_gap", "max_sim_time",
               "deadlock_window", "deadlock_displacement", "parallel", "solver", "aircraft",
               "zones", "obstacles"});
  Scenario s;
  if (root["name"]) s.name = r.text(root["name"], "name");
  if (root["seed"]) s.seed = r.unsigned_integer(root["seed"], "seed");
  if (root["policy"]) {
    const auto p = parse_policy(r.text(root["policy"], "policy"));
    if (!p) r.fail(root["policy"], "policy", "expected safe_taxi, naive or wait_and_go");
    s.policy = *p;
  }
  if (root["dt"]) s.dt = r.positive(root["dt"], "dt");
  if (root["dt_safe"]) s.dt_safe = r.nonnegative(root["dt_safe"], "dt_safe");
  if (root["slot_gap"]) {
    const std::string g = r.text(root["slot_gap"], "slot_gap");
    if (g == "entry_to_entry") {
      s.slot_gap = SlotGapMode::kEntryToEntry;
    } else if (g == "exit_to_entry") {
      s.slot_gap = SlotGapMode::kExitToEntry;
    } else {
      r.fail(root["slot_gap"], "slot_gap", "expected entry_to_entry or exit_to_entry");
    }
  }
  if (root["max_sim_time"]) s.max_sim_time = r.positive(root["max_sim_time"], "max_sim_time");
  if (root["deadlock_window"]) {
    s.deadlock_window = r.positive(root["deadlock_window"], "deadlock_window");
  }
  if (root["deadlock_displacement"]) {
    s.deadlock_displacement = r.positive(root["deadlock_displacement"], "deadlock_displacement");
  }
  if (root["parallel"]) s.parallel = r.boolean(root["parallel"], "parallel");
  if (root["solver"]) read_solver(r, root["solver"], s.solver);

  const YAML::Node aircraft = root["aircraft"];
  if (!aircraft) r.fail(root, "aircraft", "required");
  if (!aircraft.IsSequence()) r.fail(aircraft, "aircraft", "expected a list");
  for (std::size_t i = 0; i < aircraft.size(); ++i) {
    s.aircraft.push_back(read_aircraft(r, aircraft[i], "aircraft[" + std::to_string(i) + "]"));
  }
  if (const YAML::Node zones = root["zones"]) {
    if (!zones.IsSequence()) r.fail(zones, "zones", "expected a list");
    for (std::size_t i = 0; i < zones.size(); ++i) {
      s.zones.push_back(read_zone(r, zones[i], "zones[" + std::to_string(i) + "]"));
    }
  }
  if (const YAML::Node obstacles = root["obstacles"]) {
    if (!obstacles.IsSequence()) r.fail(obstacles, "obstacles", "expected a list");
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      s.obstacles.push_back(read_obstacle(r, obstacles[i], "obstacles[" + std::to_string(i) + "]"));
    }
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw NotFound("scenario file '" + path.string() + "' not found");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), overrides, path.string());
}

std::string write_scenario(const Scenario& s) {
  std::ostringstream o;
  o << "name: " << quoted(s.name) << "\n";
  o << "seed: " << s.seed << "\n";
  o << "policy: " << to_string(s.policy) << "\n";
  o << "dt: " << num(s.dt) << "\n";
  o << "dt_safe: " << num(s.dt_safe) << "\n";
  o << "slot_gap: "
    << (s.slot_gap == SlotGapMode::kEntryToEntry ? "entry_to_entry" : "exit_to_entry") << "\n";
  o << "max_sim_time: " << num(s.max_sim_time) << "\n";
  o << "deadlock_window: " << num(s.deadlock_window) << "\n";
  o << "deadlock_displacement: " << num(s.deadlock_displacement) << "\n";
  o << "parallel: " << (s.parallel ? "true" : "false") << "\n";
  const SolverSettings& v = s.solver;
  o << "solver:\n";
  o << "  horizon: " << v.horizon << "\n";
  o << "  poly_order: " << v.poly_order << "\n";
  o << "  snap_order: " << v.snap_order << "\n";
  o << "  Q: " << weight<4>(v.weights.Q) << "\n";
  o << "  R: " << weight<2>(v.weights.R) << "\n";
  o << "  P: " << weight<4>(v.weights.P) << "\n";
  o << "  gamma: " << num(v.cbf.gamma) << "\n";
  o << "  d_safe: " << num(v.cbf.d_safe) << "\n";
  o << "  sqp_max_iters: " << v.sqp.max_iters << "\n";
  o << "  step_tol: " << num(v.sqp.step_tol) << "\n";
  o << "  slack_penalty: " << num(v.sqp.slack_penalty) << "\n";
  o << "  slack_linear_penalty: " << num(v.sqp.slack_linear_penalty) << "\n";
  o << "aircraft:\n";
  for (const AircraftSpec& a : s.aircraft) {
    const AircraftParams& p = a.params;
    o << "  - id: " << quoted(a.id) << "\n";
    o << "    route: [";
    for (std::size_t i = 0; i < a.route.size(); ++i) o << (i ? ", " : "") << point(a.route[i]);
    o << "]\n";
    if (a.start) {
      o << "    start: {px: " << num(a.start->px) << ", py: " << num(a.start->py)
        << ", theta: " << num(a.start->theta) << ", v: " << num(a.start->v) << "}\n";
    }
    o << "    length: " << num(p.length) << "\n";
    o << "    operating_speed: " << num(p.operating_speed) << "\n";
    o << "    priority: " << p.priority << "\n";
    o << "    goal_tolerance: " << num(p.goal_tolerance) << "\n";
    o << "    phi_max: " << num(p.bounds.phi_max) << "\n";
    o << "    beta_max: " << num(p.bounds.beta_max) << "\n";
    o << "    v_min: " << num(p.speed_limits.v_min) << "\n";
    o << "    v_max: " << num(p.speed_limits.v_max) << "\n";
  }
  o << "zones:" << (s.zones.empty() ? " []" : "") << "\n";
  for (const ConflictZone& z : s.zones) {
    o << "  - {id: " << quoted(z.id) << ", center: " << point(z.center)
      << ", radius: " << num(z.radius) << "}\n";
  }
  o << "obstacles:" << (s.obstacles.empty() ? " []" : "") << "\n";
  for (const ObstacleSpec& ob : s.obstacles) {
    o << "  - {position: " << point(ob.obstacle.position)
      << ", velocity: " << point(ob.obstacle.velocity) << ", radius: " << num(ob.obstacle.radius)
      << ", spawn_time: " << num(ob.spawn_time) << "}\n";
  }
  return o.str();
}

}  // namespace autotaxi
