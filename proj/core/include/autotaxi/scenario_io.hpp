#pragma once

#include "autotaxi/sim.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace autotaxi {

/// A `--set` override: dotted key path (sequence elements by index, e.g.
/// `aircraft.0.priority`) and a YAML scalar or flow value.
struct Override {
  std::string path;
  std::string value;
};

/// Splits "key=value". Throws ConfigError when there is no '='.
Override parse_override(const std::string& text);

/// Reads and validates a scenario file. Overrides are applied to the
/// document before it is interpreted, so they are checked like file keys.
/// Throws NotFound for a missing file and ConfigError for anything else,
/// with the key path and line in the message.
Scenario load_scenario(const std::filesystem::path& path,
                       const std::vector<Override>& overrides = {});

/// Same as load_scenario for an in-memory document; `origin` names it in
/// diagnostics.
Scenario parse_scenario(const std::string& text, const std::vector<Override>& overrides = {},
                        const std::string& origin = "<scenario>");

/// Canonical YAML for a scenario. Every field is written, doubles with
/// round-trip precision, so parse_scenario(write_scenario(s)) == s.
std::string write_scenario(const Scenario& s);

}  // namespace autotaxi
