#pragma once

#include "nullctl/config.hpp"
#include "nullctl/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nullctl {

/// Exit statuses of `run`.
enum ExitCode : int {
    ExitOk = 0,
    ExitConfigParse = 2,
    ExitValidation = 3,
    ExitSolver = 4,
};

int exit_code(ErrorKind kind);

const std::vector<std::string>& subcommands();

struct RunOptions {
    std::optional<std::string> output;  ///< overrides the config's output directory
};

/// Runs one subcommand (weights-audit, solve, carleman-audit, hum, sweep,
/// semilinear) on the config at `config_path`. The run directory receives
/// config.json, manifest.json and the subcommand's artifacts; solver failures
/// add diagnostic.json. Messages go to `log`.
int run(const std::string& subcommand, const std::string& config_path, std::ostream& log,
        const RunOptions& options = {});

/// Same with an already parsed config.
int run(const std::string& subcommand, const ExperimentConfig& config, std::ostream& log);

/// manifest.json of a completed run. Throws Error(MissingRun).
nlohmann::json manifest(const std::string& run_dir);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace nullctl
