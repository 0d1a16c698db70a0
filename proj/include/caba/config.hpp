#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "caba/sim.hpp"
#include "caba/workload.hpp"

namespace caba {

// Everything one run needs, writable from a flat key=value file and from
// command-line overrides using the same keys.
struct RunConfig {
    std::string label = "run";
    SimConfig sim;
    WorkloadConfig workload;

    // Register-file budget: the parent allocation plus one maximal assist
    // context per assist-table entry must fit the physical file.
    uint32_t parent_regs_per_thread = 16;
    uint32_t total_registers = 32768;
};

// All recognized keys, in a stable order (for --help and round-trip dumps).
std::vector<std::string> config_keys();

// Applies `key=value`; throws std::invalid_argument on unknown keys or
// malformed values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// '#' comments and blank lines allowed; every other line is `key = value`.
RunConfig parse_config(std::istream& is);

// Sanity- and capacity-checks the whole configuration; throws
// std::invalid_argument with a self-explanatory message.
void validate(const RunConfig& cfg);

// "none", "bdi", "fpc", "cpack", or "best" for labeling output rows.
std::string algorithm_name(const RunConfig& cfg);

// $CABASIM_OUTPUT_DIR, or "." when unset.
std::string output_dir();

} // namespace caba
