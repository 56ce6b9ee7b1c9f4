#pragma once

#include "autotaxi/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace autotaxi {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Hash of the canonical scenario text, as 16 lowercase hex digits.
std::string scenario_hash(const Scenario& s);

/// "<policy>-<scenario hash>-s<seed>".
std::string run_name(const Scenario& s);

/// Creates root/name, or root/name-2, root/name-3, ... if taken. Existing
/// run directories are never reused.
std::filesystem::path create_run_dir(const std::filesystem::path& root, const std::string& name);

/// Tables written into a run directory. Columns are fixed; numbers use
/// 9 significant digits.
std::string trajectory_csv(const SimLog& log);
std::string events_csv(const SimLog& log);
std::string slots_csv(const Plan& plan);
std::string splines_csv(const Plan& plan);
std::string metrics_json(const Metrics& m, const SimLog& log, const Scenario& s);

/// Writes scenario.yaml, trajectory.csv, events.csv, slots.csv,
/// metrics.json and, if asked, splines.csv.
void write_run_artifacts(const std::filesystem::path& dir, const Scenario& s, const RunResult& r,
                         bool with_splines = true);

/// Figure-ready series derived from a run directory: slot_gantt.csv,
/// xy_tracks.csv and h_over_time.csv. Throws NotFound naming the first
/// missing input file.
void write_plot_data(const std::filesystem::path& run_dir);

}  // namespace autotaxi
