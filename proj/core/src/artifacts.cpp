#include "autotaxi/artifacts.hpp"

#include "autotaxi/errors.hpp"
#include "autotaxi/scenario_io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace autotaxi {
namespace fs = std::filesystem;

namespace {

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// RFC 4180 quoting for free-text fields.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << content;
  if (!out) throw Error("write to '" + p.string() + "' failed");
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw NotFound("missing run artifact '" + p.string() + "'");
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cell += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw Error("run artifact '" + p.string() + "' is empty");
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name,
                   const fs::path& p) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error("'" + p.string() + "' has no column '" + name + "'");
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string scenario_hash(const Scenario& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(write_scenario(s))));
  return buf;
}

std::string run_name(const Scenario& s) {
  return std::string(to_string(s.policy)) + "-" + scenario_hash(s) + "-s" + std::to_string(s.seed);
}

fs::path create_run_dir(const fs::path& root, const std::string& name) {
  fs::create_directories(root);
  for (int k = 1;; ++k) {
    const fs::path dir = root / (k == 1 ? name : name + "-" + std::to_string(k));
    // create_directory reports false when the directory already existed.
    if (fs::create_directory(dir)) return dir;
  }
}

std::string trajectory_csv(const SimLog& log) {
  std::string out = "t,id,px,py,theta,v,phi,beta,min_h,slack\n";
  for (const StepRecord& r : log.rows) {
    out += g9(r.t) + "," + csv_field(r.id) + "," + g9(r.x.px) + "," + g9(r.x.py) + "," +
           g9(r.x.theta) + "," + g9(r.x.v) + "," + g9(r.u.phi) + "," + g9(r.u.beta) + "," +
           g9(r.min_h) + "," + g9(r.slack) + "\n";
  }
  return out;
}

std::string events_csv(const SimLog& log) {
  std::string out = "t,kind,id,detail\n";
  for (const SimEvent& e : log.events) {
    out += g9(e.t) + "," + csv_field(e.kind) + "," + csv_field(e.id) + "," + csv_field(e.detail) +
           "\n";
  }
  return out;
}

std::string slots_csv(const Plan& plan) {
  std::string out = "zone,id,order,t_in_est,t_out_est,t_in,t_out\n";
  for (const ZoneSchedule& z : plan.zones) {
    for (std::size_t k = 0; k < z.resolved.size(); ++k) {
      const IntersectionSlot& res = z.resolved[k];
      const IntersectionSlot* est = nullptr;
      for (const auto& s : z.initial) {
        if (s.aircraft_id == res.aircraft_id) est = &s;
      }
      out += csv_field(z.zone_id) + "," + csv_field(res.aircraft_id) + "," + std::to_string(k) +
             "," + g9(est ? est->t_in : res.t_in) + "," + g9(est ? est->t_out : res.t_out) + "," +
             g9(res.t_in) + "," + g9(res.t_out) + "\n";
    }
  }
  return out;
}

std::string splines_csv(const Plan& plan) {
  int width = 0;
  for (const AircraftPlan& a : plan.aircraft) width = std::max(width, a.spline.poly_order());
  std::string out = "id,segment,t0,t1,axis";
  for (int i = 0; i < width; ++i) out += ",c" + std::to_string(i);
  out += "\n";
  for (const AircraftPlan& a : plan.aircraft) {
    const auto& knots = a.spline.knots();
    for (int k = 0; k < a.spline.num_segments(); ++k) {
      for (int axis = 0; axis < 2; ++axis) {
        const Eigen::VectorXd& c = a.spline.coefficients(axis, k);
        out += csv_field(a.id) + "," + std::to_string(k) + "," + g9(knots[k]) + "," +
               g9(knots[k + 1]) + "," + (axis == 0 ? "x" : "y");
        for (int i = 0; i < width; ++i) out += "," + (i < c.size() ? g9(c(i)) : std::string("0"));
        out += "\n";
      }
    }
  }
  return out;
}

std::string metrics_json(const Metrics& m, const SimLog& log, const Scenario& s) {
  nlohmann::ordered_json j;
  j["scenario"] = s.name;
  j["seed"] = s.seed;
  j["policy"] = to_string(m.policy);
  j["completed"] = m.completed;
  j["comp_time"] = m.comp_time;
  j["avg_acc_var"] = m.avg_acc_var;
  j["avg_acc_var_windowed"] = m.avg_acc_var_windowed;
  j["min_separation"] = std::isfinite(m.min_separation) ? m.min_separation : NAN;
  j["min_obstacle_distance"] =
      std::isfinite(m.min_obstacle_distance) ? m.min_obstacle_distance : NAN;
  j["max_slack"] = m.max_slack;
  j["safety_violations"] = m.safety_violations;
  j["fallbacks"] = m.fallbacks;
  j["deadlock"] = m.deadlock;
  j["timeout"] = m.timeout;
  nlohmann::ordered_json goals = nlohmann::ordered_json::object();
  for (const auto& [id, t] : log.goal_times) goals[id] = t;
  j["goal_times"] = goals;
  nlohmann::ordered_json zones = nlohmann::ordered_json::object();
  for (const auto& [id, per_zone] : log.zone_presence) {
    for (const auto& [zone, window] : per_zone) {
      zones[id][zone] = {{"entry", window.first}, {"exit", window.second}};
    }
  }
  j["zone_presence"] = zones;
  return j.dump(2) + "\n";
}

void write_run_artifacts(const fs::path& dir, const Scenario& s, const RunResult& r,
                         bool with_splines) {
  write_file(dir / "scenario.yaml", write_scenario(s));
  write_file(dir / "trajectory.csv", trajectory_csv(r.log));
  write_file(dir / "events.csv", events_csv(r.log));
  write_file(dir / "slots.csv", slots_csv(r.plan));
  write_file(dir / "metrics.json", metrics_json(r.metrics, r.log, s));
  if (with_splines) write_file(dir / "splines.csv", splines_csv(r.plan));
}

void write_plot_data(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw NotFound("run directory '" + run_dir.string() + "' not found");
  const fs::path slots_path = run_dir / "slots.csv";
  const fs::path traj_path = run_dir / "trajectory.csv";
  const auto slots = read_csv(slots_path);
  const auto traj = read_csv(traj_path);

  std::string gantt = "zone,id,order,t_in_est,t_out_est,t_in,t_out\n";
  {
    const auto& h = slots.front();
    const std::size_t cz = column(h, "zone", slots_path), ci = column(h, "id", slots_path),
                      co = column(h, "order", slots_path),
                      cie = column(h, "t_in_est", slots_path),
                      coe = column(h, "t_out_est", slots_path),
                      cin = column(h, "t_in", slots_path), cout = column(h, "t_out", slots_path);
    for (std::size_t r = 1; r < slots.size(); ++r) {
      const auto& row = slots[r];
      if (row.size() != h.size()) continue;
      gantt += csv_field(row[cz]) + "," + csv_field(row[ci]) + "," + row[co] + "," + row[cie] +
               "," + row[coe] + "," + row[cin] + "," + row[cout] + "\n";
    }
  }
  std::string tracks = "id,t,px,py\n";
  std::string h_series = "t,id,min_h\n";
  {
    const auto& h = traj.front();
    const std::size_t ct = column(h, "t", traj_path), ci = column(h, "id", traj_path),
                      cx = column(h, "px", traj_path), cy = column(h, "py", traj_path),
                      chh = column(h, "min_h", traj_path);
    // Group tracks by aircraft, keeping first-appearance order.
    std::vector<std::string> order;
    std::map<std::string, std::string> per_id;
    for (std::size_t r = 1; r < traj.size(); ++r) {
      const auto& row = traj[r];
      if (row.size() != h.size()) continue;
      if (!per_id.count(row[ci])) order.push_back(row[ci]);
      per_id[row[ci]] += csv_field(row[ci]) + "," + row[ct] + "," + row[cx] + "," + row[cy] + "\n";
      h_series += row[ct] + "," + csv_field(row[ci]) + "," + row[chh] + "\n";
    }
    for (const auto& id : order) tracks += per_id[id];
  }
  write_file(run_dir / "slot_gantt.csv", gantt);
  write_file(run_dir / "xy_tracks.csv", tracks);
  write_file(run_dir / "h_over_time.csv", h_series);
}

}  // namespace autotaxi
