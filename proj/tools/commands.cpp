#include "commands.hpp"

#include "ssrlab/asymptotics.hpp"
#include "ssrlab/errors.hpp"
#include "ssrlab/experiment.hpp"
#include "ssrlab/io.hpp"
#include "ssrlab/rng.hpp"

#include <chrono>
#include <filesystem>

namespace ssrlab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

void apply_overrides(json& document, const Overrides& o) {
    if (!document.is_object()) return;
    if (!o.out_dir.empty()) document["output"]["dir"] = o.out_dir;
    if (!o.format.empty()) document["output"]["format"] = o.format;
    if (o.threads >= 0) document["solver"]["threads"] = o.threads;
    if (o.has_seed) document["experiment"]["master_seed"] = o.seed;
}

namespace {

class Writer {
public:
    explicit Writer(const RunConfig& config) : config_(config) { fs::create_directories(config.out_dir); }

    bool csv() const { return config_.format != "json"; }
    bool json_out() const { return config_.format != "csv"; }

    void text(const std::string& name, const std::string& contents) {
        const fs::path path = fs::path(config_.out_dir) / name;
        write_text_file(path.string(), contents);
        files.push_back(path.string());
    }
    void table(const std::string& name, const CsvTable& t) { text(name, t.to_string()); }
    void document(const std::string& name, const json& doc) { text(name, doc.dump(2) + "\n"); }

    std::vector<std::string> files;

private:
    const RunConfig& config_;
};

Outcome run_predict(const RunConfig& config, Writer& out) {
    Outcome outcome;
    const ExperimentConfig& ex = config.experiment;
    const CovarianceModel model = build_covariance(ex.model);
    const double d = static_cast<double>(model.dim());
    CsvTable table;
    table.header = {"alpha", "n",          "d",           "lambda",     "kappa",          "df1",
                    "df2",   "L1",         "gen_error",   "train_error", "divergent",     "ridgeless_excess",
                    "status"};
    json rows = json::array();
    for (double lambda : config.lambdas) {
        for (Eigen::Index n : ex.sample_sizes()) {
            const double alpha = static_cast<double>(n) / d;
            try {
                const RiskPrediction p = predict_risk(model, n, lambda);
                table.add_row({format_double(alpha), std::to_string(n), std::to_string(model.dim()),
                               format_double(lambda), format_double(p.kappa), format_double(p.df1),
                               format_double(p.df2), format_double(p.L1), format_double(p.gen_error),
                               format_double(p.train_error), p.divergent ? "1" : "0",
                               format_double(p.ridgeless_excess), "ok"});
                rows.push_back({{"alpha", alpha},
                                {"n", static_cast<std::int64_t>(n)},
                                {"d", static_cast<std::int64_t>(model.dim())},
                                {"lambda", lambda},
                                {"kappa", json_number(p.kappa)},
                                {"df1", json_number(p.df1)},
                                {"df2", json_number(p.df2)},
                                {"L1", json_number(p.L1)},
                                {"gen_error", json_number(p.gen_error)},
                                {"train_error", json_number(p.train_error)},
                                {"divergent", p.divergent},
                                {"ridgeless_excess", json_number(p.ridgeless_excess)},
                                {"status", "ok"}});
            } catch (const NumericError& e) {
                outcome.exit_code = kNumericError;
                outcome.problems.push_back("alpha " + format_double(alpha) + ", lambda " + format_double(lambda) +
                                           ": " + e.what());
                table.add_row({format_double(alpha), std::to_string(n), std::to_string(model.dim()),
                               format_double(lambda), "nan", "nan", "nan", "nan", "nan", "nan", "0", "nan",
                               "numeric_error"});
                rows.push_back({{"alpha", alpha}, {"n", static_cast<std::int64_t>(n)}, {"lambda", lambda},
                                {"status", "numeric_error"}, {"error", e.what()}});
            }
        }
    }
    if (out.csv()) out.table("predict.csv", table);
    if (out.json_out())
        out.document("predict.json", {{"config", run_config_to_json(config)}, {"sigma_ref", model.name()}, {"rows", rows}});
    return outcome;
}

Outcome run_phase_curve(const RunConfig& config, Writer& out) {
    const double lambda = config.experiment.lambda;
    CsvTable table;
    table.header = {"rho", "gamma_star", "E_plus", "E_minus", "ssr_population_loss", "lambda"};
    json rows = json::array();
    for (double rho : config.rhos) {
        const Ar1Analysis a = ar1_analysis(rho, lambda, {});
        table.add_row({format_double(rho), format_double(a.gamma_star), format_double(a.E_plus),
                       format_double(a.E_minus), format_double(a.f_pop), format_double(lambda)});
        rows.push_back({{"rho", rho},
                        {"gamma_star", json_number(a.gamma_star)},
                        {"E_plus", json_number(a.E_plus)},
                        {"E_minus", json_number(a.E_minus)},
                        {"ssr_population_loss", json_number(a.f_pop)},
                        {"lambda", lambda}});
    }
    if (out.csv()) out.table("phase_curve.csv", table);
    if (out.json_out()) out.document("phase_curve.json", {{"config", run_config_to_json(config)}, {"rows", rows}});
    return {};
}

Outcome run_comparison(const RunConfig& config, Writer& out, const std::string& stem) {
    Outcome outcome;
    const ExperimentReport report = run_experiment(config.experiment);
    for (const Record& r : report.records) {
        if (r.excluded > 0 || r.verdict == "no_data") {
            outcome.exit_code = kNumericError;
            outcome.problems.push_back(r.metric + " at " + format_double(r.grid_value) + ": " +
                                       std::to_string(r.excluded) + " trials failed");
        }
    }
    if (out.csv()) {
        out.table(stem + ".csv", report_to_csv(report));
        if (!report.curves.empty()) out.table(stem + "_curves.csv", curves_to_csv(report));
    }
    if (out.json_out()) out.document(stem + ".json", report_to_json(report, run_config_to_json(config)));
    return outcome;
}

std::vector<std::uint64_t> declared_seeds(const RunConfig& config) {
    const ExperimentConfig& ex = config.experiment;
    std::vector<std::uint64_t> seeds;
    if (config.subcommand == "predict" || config.subcommand == "phase-curve") return seeds;
    std::size_t grid = ex.comparison == Comparison::Bbp ? ex.thetas.size() : ex.sample_sizes().size();
    if (ex.comparison == Comparison::PcaCompare && ex.fixed_n > 0 && !ex.gammas.empty()) grid = 1;
    for (std::size_t g = 0; g < grid; ++g)
        for (int t = 0; t < ex.trials; ++t) seeds.push_back(derive_seed(ex.master_seed, g, static_cast<std::uint64_t>(t)));
    return seeds;
}

}  // namespace

Outcome execute(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    Writer out(config);
    Outcome outcome;
    const std::string& sub = config.subcommand;
    try {
        if (sub == "predict") outcome = run_predict(config, out);
        else if (sub == "phase-curve") outcome = run_phase_curve(config, out);
        else if (sub == "simulate") outcome = run_comparison(config, out, "simulate");
        else if (sub == "spectrum") outcome = run_comparison(config, out, "spectrum");
        else if (sub == "bbp") outcome = run_comparison(config, out, "bbp");
        else if (sub == "compare-pca") outcome = run_comparison(config, out, "compare_pca");
        else throw ParameterError("unknown subcommand '" + sub + "'");
    } catch (const NumericError& e) {
        outcome.exit_code = kNumericError;
        outcome.problems.push_back(e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const json config_doc = run_config_to_json(config);
    json manifest = {{"subcommand", sub},
                     {"config_hash", config_hash(config_doc)},
                     {"master_seed", config.experiment.master_seed},
                     {"seeds", declared_seeds(config)},
                     {"library_version", SSRLAB_VERSION},
                     {"wall_clock_seconds", seconds},
                     {"exit_code", outcome.exit_code},
                     {"problems", outcome.problems},
                     {"artifacts", out.files}};
    out.document("manifest.json", manifest);
    outcome.files = out.files;
    return outcome;
}

}  // namespace ssrlab::cli
