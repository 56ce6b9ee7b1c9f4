#include "autotaxi/commands.hpp"

#include "autotaxi/artifacts.hpp"
#include "autotaxi/errors.hpp"
#include "autotaxi/scenario_io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>

namespace autotaxi {
namespace fs = std::filesystem;

namespace {

std::string cell(const char* format, double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
  if (!out) throw Error("cannot write '" + p.string() + "'");
}

}  // namespace

fs::path output_root(const std::optional<fs::path>& out) {
  if (out) return *out;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "runs";
}

Scenario load_with_options(const CommandOptions& o) {
  std::vector<Override> overrides;
  for (const auto& s : o.sets) overrides.push_back(parse_override(s));
  if (o.policy) overrides.push_back({"policy", *o.policy});
  if (o.seed) overrides.push_back({"seed", std::to_string(*o.seed)});
  return load_scenario(o.scenario, overrides);
}

std::string comparison_table(const PolicyComparison& c) {
  std::string out;
  char line[200];
  std::snprintf(line, sizeof line, "%-12s %12s %12s %12s %10s %10s\n", "policy", "comp_time_s",
                "avg_acc_var", "min_sep_m", "deadlock", "violations");
  out += line;
  for (const RunResult& r : c.runs) {
    const Metrics& m = r.metrics;
    std::snprintf(line, sizeof line, "%-12s %12s %12s %12s %10s %10d\n", to_string(m.policy),
                  cell("%.2f", m.comp_time).c_str(), cell("%.5f", m.avg_acc_var).c_str(),
                  cell("%.3f", std::isfinite(m.min_separation) ? m.min_separation : NAN).c_str(),
                  m.deadlock ? "yes" : (m.timeout ? "timeout" : "no"), m.safety_violations);
    out += line;
  }
  return out;
}

std::string comparison_json(const PolicyComparison& c, const Scenario& s) {
  nlohmann::ordered_json j;
  j["scenario"] = s.name;
  j["seed"] = s.seed;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const RunResult& r : c.runs) {
    const Metrics& m = r.metrics;
    rows.push_back({{"policy", to_string(m.policy)},
                    {"comp_time", m.comp_time},
                    {"avg_acc_var", m.avg_acc_var},
                    {"avg_acc_var_windowed", m.avg_acc_var_windowed},
                    {"min_separation", std::isfinite(m.min_separation) ? m.min_separation : NAN},
                    {"deadlock", m.deadlock},
                    {"timeout", m.timeout},
                    {"safety_violations", m.safety_violations}});
  }
  j["policies"] = rows;
  return j.dump(2) + "\n";
}

int cmd_run(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = load_with_options(o);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  const RunResult r = run(s);
  const fs::path dir = create_run_dir(output_root(o.out), run_name(s));
  write_run_artifacts(dir, s, r, o.splines);
  const Metrics& m = r.metrics;
  out << "run directory: " << dir.string() << "\n";
  out << "policy: " << to_string(s.policy) << "  comp_time: " << cell("%.2f", m.comp_time)
      << " s  avg_acc_var: " << cell("%.5f", m.avg_acc_var)
      << "  safety_violations: " << m.safety_violations << "\n";
  if (m.deadlock) out << "deadlock detected\n";
  if (m.timeout) out << "max_sim_time reached\n";
  return m.completed ? kExitOk : kExitIncomplete;
}

int cmd_compare(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = load_with_options(o);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  const PolicyComparison c = compare_policies(s);
  const fs::path dir = create_run_dir(output_root(o.out),
                                      "compare-" + scenario_hash(s) + "-s" + std::to_string(s.seed));
  for (const RunResult& r : c.runs) {
    Scenario sp = s;
    sp.policy = r.metrics.policy;
    const fs::path sub = dir / to_string(sp.policy);
    fs::create_directory(sub);
    write_run_artifacts(sub, sp, r, o.splines);
  }
  const std::string table = comparison_table(c);
  write_text(dir / "comparison.txt", table);
  write_text(dir / "comparison.json", comparison_json(c, s));
  out << table << "results: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_plot_data(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
  try {
    write_plot_data(run_dir);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  out << "wrote slot_gantt.csv, xy_tracks.csv, h_over_time.csv in " << run_dir.string() << "\n";
  return kExitOk;
}

int cmd_validate(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const Scenario s = load_with_options(o);
    const Plan plan = plan_phase(s);
    out << s.name << ": " << s.aircraft.size() << " aircraft, " << s.zones.size() << " zones, "
        << s.obstacles.size() << " obstacles; policy " << to_string(s.policy) << "\n";
    for (const ZoneSchedule& z : plan.zones) {
      out << "zone " << z.zone_id << ":";
      for (const auto& sl : z.resolved) {
        out << " " << sl.aircraft_id << "[" << cell("%.2f", sl.t_in) << ", "
            << cell("%.2f", sl.t_out) << "]";
      }
      out << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}

}  // namespace autotaxi
