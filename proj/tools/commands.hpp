#pragma once
#include "ssrlab/config.hpp"

#include <string>
#include <vector>

namespace ssrlab::cli {

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kNumericError = 3 };

struct Overrides {
    std::string out_dir;
    std::string format;
    int threads = -1;
    bool has_seed = false;
    std::uint64_t seed = 0;
};

// Applies command-line overrides to the raw config document.
void apply_overrides(nlohmann::json& document, const Overrides& overrides);

struct Outcome {
    int exit_code = kSuccess;
    std::vector<std::string> files;
    std::vector<std::string> problems;
};

// Runs one validated subcommand and writes its artifacts into config.out_dir.
Outcome execute(const RunConfig& config);

}  // namespace ssrlab::cli
