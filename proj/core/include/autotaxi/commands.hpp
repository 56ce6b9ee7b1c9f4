#pragma once

#include "autotaxi/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace autotaxi {

/// Exit codes of the command-line verbs.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitIncomplete = 2;  ///< deadlock or timeout

struct CommandOptions {
  std::filesystem::path scenario;
  std::optional<std::filesystem::path> out;  ///< output root
  std::optional<std::string> policy;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;  ///< "key=value" overrides
  bool splines = true;
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutDirEnv = "AUTOTAXI_OUT_DIR";

/// --out if given, else $AUTOTAXI_OUT_DIR, else "runs".
std::filesystem::path output_root(const std::optional<std::filesystem::path>& out);

/// Loads the scenario with file values, then --set, then --policy/--seed.
Scenario load_with_options(const CommandOptions& o);

/// Human-readable and JSON policy comparison tables.
std::string comparison_table(const PolicyComparison& c);
std::string comparison_json(const PolicyComparison& c, const Scenario& s);

int cmd_run(const CommandOptions& o, std::ostream& out, std::ostream& err);
int cmd_compare(const CommandOptions& o, std::ostream& out, std::ostream& err);
int cmd_plot_data(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);
int cmd_validate(const CommandOptions& o, std::ostream& out, std::ostream& err);

}  // namespace autotaxi
