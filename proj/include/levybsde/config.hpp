#pragma once

#include "levybsde/verify.hpp"

#include <optional>
#include <string>
#include <vector>

namespace levybsde {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct RunOutcome {
    int exit_code = 0; // 0 pass, 1 check failure, 2 config error, 3 numeric failure
    bool all_passed = true;
    std::string out_dir;
    std::string manifest_path;
    std::vector<CheckReport> reports;
    std::string error; // populated for exit codes 2 and 3
};

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
};

/// Parses, validates (unknown keys are rejected with the offending key named)
/// and executes the experiment described by a JSON config file: simulate,
/// solve, persist binary artifacts and CSV tables, run the configured checks,
/// write the manifest. Deterministic given (config, seed).
RunOutcome run_experiment(const std::string& config_path, const RunOverrides& overrides = {});
RunOutcome run_experiment_text(const std::string& config_text, const RunOverrides& overrides = {});

/// Registry card for a model or measure name; throws UnknownName.
std::string describe_entity(const std::string& name);

} // namespace levybsde
