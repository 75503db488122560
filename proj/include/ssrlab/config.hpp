#pragma once
#include "ssrlab/errors.hpp"
#include "ssrlab/experiment.hpp"
#include "ssrlab/io.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace ssrlab {

// Every schema violation found in a config document, one per field.
class ConfigError : public ParameterError {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

struct RunConfig {
    std::string subcommand;
    ExperimentConfig experiment;
    std::string custom_csv;              // model.csv for custom covariances
    std::vector<double> lambdas;         // predict grid; defaults to experiment.lambda
    std::vector<double> rhos;            // phase-curve grid
    std::string out_dir = "out";
    std::string format = "both";         // csv, json or both
};

// Subcommands: predict, simulate, spectrum, bbp, phase-curve, compare-pca.
const std::vector<std::string>& subcommands();

// JSON Schema (draft 2020-12) describing the config document.
nlohmann::json config_schema();

// Validates the document against the schema and the subcommand's needs, then
// fills defaults. Throws ConfigError listing every problem. Custom covariance
// files are loaded here so load errors surface before any compute.
RunConfig parse_run_config(const nlohmann::json& document, const std::string& subcommand);

// Full config with defaults; parsing it again yields the same RunConfig.
nlohmann::json run_config_to_json(const RunConfig& config);

// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& document);

// Non-finite values become the strings "inf", "-inf", "nan".
nlohmann::json json_number(double value);

nlohmann::json report_to_json(const ExperimentReport& report, const nlohmann::json& config_echo);
// grid_value, metric, predicted, empirical_mean, empirical_std, trials,
// excluded, distance, verdict, flags, seeds.
CsvTable report_to_csv(const ExperimentReport& report);
// grid_value, curve, x, y.
CsvTable curves_to_csv(const ExperimentReport& report);

}  // namespace ssrlab
