#include "ssrlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace ssrlab {

using nlohmann::json;

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
    std::ostringstream os;
    os << "invalid config (" << errors.size() << (errors.size() == 1 ? " error)" : " errors)");
    for (const auto& e : errors) os << "\n  " << e;
    return os.str();
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"model", {"kind", "dim", "theta", "rho", "beta", "spike", "csv"}},
        {"grid", {"alphas", "ns", "lambdas", "thetas", "ps", "gammas", "rhos", "fixed_n"}},
        {"solver", {"eta", "density_points", "threads"}},
        {"experiment",
         {"comparison", "lambda", "trials", "master_seed", "entry_dist", "bins", "w1_tolerance", "rel_tolerance",
          "peak_rel_tolerance", "outlier_margin", "transition_tolerance"}},
        {"output", {"dir", "format"}},
    };
    return keys;
}

// Collects typed reads from one section, recording errors instead of throwing.
class Reader {
public:
    Reader(const json& doc, std::string section, std::vector<std::string>& errors)
        : errors_(errors), section_(std::move(section)) {
        if (doc.contains(section_)) {
            const json& s = doc.at(section_);
            if (!s.is_object()) {
                fail("", "expected an object");
            } else {
                node_ = &s;
                const auto& keys = allowed_keys().at(section_);
                for (const auto& [key, value] : s.items())
                    if (!keys.count(key)) fail(key, "unknown field");
            }
        }
    }

    bool has(const std::string& key) const { return node_ && node_->contains(key); }
    const json* raw(const std::string& key) const { return has(key) ? &node_->at(key) : nullptr; }

    void fail(const std::string& key, const std::string& why) {
        errors_.push_back(key.empty() ? section_ + ": " + why : section_ + "." + key + ": " + why);
    }

    double number(const std::string& key, double fallback) {
        const json* v = raw(key);
        if (!v) return fallback;
        if (!v->is_number()) {
            fail(key, "expected a number");
            return fallback;
        }
        return v->get<double>();
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        const json* v = raw(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) {
            fail(key, "expected an integer");
            return fallback;
        }
        return v->get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        const json* v = raw(key);
        if (!v) return fallback;
        if (!v->is_number_unsigned()) {
            fail(key, "expected a nonnegative integer");
            return fallback;
        }
        return v->get<std::uint64_t>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        const json* v = raw(key);
        if (!v) return fallback;
        if (!v->is_string()) {
            fail(key, "expected a string");
            return fallback;
        }
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        std::vector<double> out;
        const json* v = raw(key);
        if (!v) return out;
        if (!v->is_array()) {
            fail(key, "expected an array of numbers");
            return out;
        }
        for (const auto& x : *v) {
            if (!x.is_number()) {
                fail(key, "expected an array of numbers");
                return {};
            }
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::vector<Eigen::Index> integers(const std::string& key) {
        std::vector<Eigen::Index> out;
        const json* v = raw(key);
        if (!v) return out;
        if (!v->is_array()) {
            fail(key, "expected an array of integers");
            return out;
        }
        for (const auto& x : *v) {
            if (!x.is_number_integer()) {
                fail(key, "expected an array of integers");
                return {};
            }
            out.push_back(static_cast<Eigen::Index>(x.get<std::int64_t>()));
        }
        return out;
    }

private:
    std::vector<std::string>& errors_;
    std::string section_;
    const json* node_ = nullptr;
};

std::string spike_mode_name(SpikeSpec::Mode mode) {
    return mode == SpikeSpec::Mode::Basis ? "basis" : "uniform_sphere";
}

Comparison default_comparison(const std::string& subcommand) {
    if (subcommand == "spectrum") return Comparison::Spectrum;
    if (subcommand == "bbp") return Comparison::Bbp;
    if (subcommand == "compare-pca") return Comparison::PcaCompare;
    return Comparison::Risk;
}

json number_array(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(x);
    return out;
}

json index_array(const std::vector<Eigen::Index>& v) {
    json out = json::array();
    for (auto x : v) out.push_back(static_cast<std::int64_t>(x));
    return out;
}

std::string join(const std::vector<std::string>& items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : ParameterError(join_errors(errors)), errors_(std::move(errors)) {}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"predict", "simulate", "spectrum", "bbp", "phase-curve",
                                                   "compare-pca"};
    return names;
}

json config_schema() {
    const json number = {{"type", "number"}};
    const json positive_integer = {{"type", "integer"}, {"minimum", 1}};
    const json nonnegative_integer = {{"type", "integer"}, {"minimum", 0}};
    const json numbers = {{"type", "array"}, {"items", number}};
    const json integers = {{"type", "array"}, {"items", {{"type", "integer"}}}};
    auto section = [](json properties) {
        return json{{"type", "object"}, {"additionalProperties", false}, {"properties", std::move(properties)}};
    };
    json schema = {
        {"$schema", "https://json-schema.org/draft/2020-12/schema"},
        {"title", "ssrlab run configuration"},
        {"type", "object"},
        {"additionalProperties", false},
    };
    json model = section({
        {"kind", {{"enum", {"identity", "spiked", "toeplitz", "power_law", "custom"}}}},
        {"dim", {{"type", "integer"}, {"minimum", 2}}},
        {"theta", {{"type", "number"}, {"minimum", 0}}},
        {"rho", {{"type", "number"}, {"exclusiveMinimum", 0}, {"exclusiveMaximum", 1}}},
        {"beta", {{"type", "number"}, {"exclusiveMinimum", 0}}},
        {"spike", section({{"mode", {{"enum", {"uniform_sphere", "basis"}}}},
                           {"seed", nonnegative_integer},
                           {"index", nonnegative_integer}})},
        {"csv", {{"type", "string"}}},
    });
    model["required"] = {"kind"};
    schema["properties"] = {
        {"model", model},
        {"grid", section({{"alphas", numbers},
                          {"ns", integers},
                          {"lambdas", numbers},
                          {"thetas", numbers},
                          {"ps", integers},
                          {"gammas", numbers},
                          {"rhos", numbers},
                          {"fixed_n", nonnegative_integer}})},
        {"solver", section({{"eta", {{"type", "number"}, {"minimum", 0}}},
                            {"density_points", {{"type", "integer"}, {"minimum", 2}}},
                            {"threads", nonnegative_integer}})},
        {"experiment", section({{"comparison", {{"enum", {"risk", "train_risk", "spectrum", "bbp", "pca_compare"}}}},
                                {"lambda", {{"type", "number"}, {"exclusiveMinimum", 0}}},
                                {"trials", positive_integer},
                                {"master_seed", nonnegative_integer},
                                {"entry_dist", {{"enum", {"gaussian", "rademacher"}}}},
                                {"bins", positive_integer},
                                {"w1_tolerance", number},
                                {"rel_tolerance", number},
                                {"peak_rel_tolerance", number},
                                {"outlier_margin", number},
                                {"transition_tolerance", number}})},
        {"output", section({{"dir", {{"type", "string"}}}, {"format", {{"enum", {"csv", "json", "both"}}}}})},
    };
    return schema;
}

RunConfig parse_run_config(const json& document, const std::string& subcommand) {
    std::vector<std::string> errors;
    if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
        throw ConfigError({"subcommand: unknown '" + subcommand + "'"});
    if (!document.is_object()) throw ConfigError({"config: expected a JSON object"});
    for (const auto& [key, value] : document.items())
        if (!allowed_keys().count(key)) errors.push_back(key + ": unknown section");

    RunConfig cfg;
    cfg.subcommand = subcommand;
    ExperimentConfig& ex = cfg.experiment;
    const bool needs_model = subcommand != "phase-curve";

    Reader model(document, "model", errors);
    if (needs_model && !document.contains("model")) errors.push_back("model: required section is missing");
    CovarianceSpec& spec = ex.model;
    if (document.contains("model")) {
        const std::string kind = model.string("kind", "");
        if (kind.empty()) {
            model.fail("kind", "required field is missing");
        } else {
            try {
                spec.kind = covariance_kind_from_string(kind);
            } catch (const ParameterError&) {
                model.fail("kind", "must be one of identity, spiked, toeplitz, power_law, custom");
            }
        }
        spec.dim = static_cast<Eigen::Index>(model.integer("dim", 0));
        spec.theta = model.number("theta", spec.theta);
        spec.rho = model.number("rho", spec.rho);
        spec.beta = model.number("beta", spec.beta);
        cfg.custom_csv = model.string("csv", "");
        if (const json* spike = model.raw("spike")) {
            if (!spike->is_object()) {
                model.fail("spike", "expected an object");
            } else {
                for (const auto& [key, value] : spike->items()) {
                    if (key == "mode") {
                        const std::string m = value.is_string() ? value.get<std::string>() : "";
                        if (m == "uniform_sphere") spec.spike.mode = SpikeSpec::Mode::UniformSphere;
                        else if (m == "basis") spec.spike.mode = SpikeSpec::Mode::Basis;
                        else model.fail("spike.mode", "must be uniform_sphere or basis");
                    } else if (key == "seed") {
                        if (value.is_number_unsigned()) spec.spike.seed = value.get<std::uint64_t>();
                        else model.fail("spike.seed", "expected a nonnegative integer");
                    } else if (key == "index") {
                        if (value.is_number_unsigned()) spec.spike.index = static_cast<Eigen::Index>(value.get<std::uint64_t>());
                        else model.fail("spike.index", "expected a nonnegative integer");
                    } else {
                        model.fail("spike." + key, "unknown field");
                    }
                }
            }
        }
        if (spec.kind == CovarianceKind::Custom) {
            if (cfg.custom_csv.empty()) {
                model.fail("csv", "custom covariance needs a CSV path");
            } else {
                try {
                    spec.custom = load_covariance_csv(cfg.custom_csv);
                    spec.dim = spec.custom.rows();
                    if (model.has("dim") && model.integer("dim", 0) != spec.dim)
                        model.fail("dim", "does not match the " + std::to_string(spec.dim) + "x" +
                                              std::to_string(spec.dim) + " matrix in " + cfg.custom_csv);
                } catch (const ParameterError& e) {
                    model.fail("csv", e.what());
                }
            }
        } else {
            if (!model.has("dim")) model.fail("dim", "required field is missing");
            else if (spec.dim < 2) model.fail("dim", "must be at least 2");
            if (model.has("csv")) model.fail("csv", "only valid for custom covariances");
        }
        if (spec.kind == CovarianceKind::Toeplitz && !(spec.rho > 0.0 && spec.rho < 1.0))
            model.fail("rho", "must lie in (0, 1)");
        if (spec.kind == CovarianceKind::Spiked && !(spec.theta >= 0.0)) model.fail("theta", "must be nonnegative");
        if (spec.kind == CovarianceKind::PowerLawDiagonal && !(spec.beta > 0.0)) model.fail("beta", "must be positive");
        if (spec.kind == CovarianceKind::Spiked && spec.spike.mode == SpikeSpec::Mode::Basis && spec.dim >= 2 &&
            spec.spike.index >= spec.dim)
            model.fail("spike.index", "must be below dim");
    }

    Reader grid(document, "grid", errors);
    ex.alphas = grid.numbers("alphas");
    ex.ns = grid.integers("ns");
    cfg.lambdas = grid.numbers("lambdas");
    ex.thetas = grid.numbers("thetas");
    ex.ps = grid.integers("ps");
    ex.gammas = grid.numbers("gammas");
    cfg.rhos = grid.numbers("rhos");
    ex.fixed_n = static_cast<Eigen::Index>(grid.integer("fixed_n", 0));
    auto each = [](const auto& values, auto ok) { return std::all_of(values.begin(), values.end(), ok); };
    if (!each(ex.alphas, [](double a) { return a > 0.0 && std::isfinite(a); })) grid.fail("alphas", "entries must be positive");
    if (!each(ex.ns, [](Eigen::Index n) { return n >= 1; })) grid.fail("ns", "entries must be at least 1");
    if (!each(ex.thetas, [](double t) { return t >= 0.0 && std::isfinite(t); })) grid.fail("thetas", "entries must be nonnegative");
    if (!each(ex.ps, [](Eigen::Index p) { return p >= 1; })) grid.fail("ps", "entries must be at least 1");
    if (!each(ex.gammas, [](double g) { return g >= 0.0 && g <= 1.0; })) grid.fail("gammas", "entries must lie in [0, 1]");
    if (ex.fixed_n < 0) grid.fail("fixed_n", "must be nonnegative");

    Reader solver(document, "solver", errors);
    ex.eta = solver.number("eta", ex.eta);
    ex.density_points = static_cast<int>(solver.integer("density_points", ex.density_points));
    ex.threads = static_cast<int>(solver.integer("threads", ex.threads));
    if (!(ex.eta >= 0.0)) solver.fail("eta", "must be nonnegative");
    if (ex.density_points < 2) solver.fail("density_points", "must be at least 2");
    if (ex.threads < 0) solver.fail("threads", "must be nonnegative");

    Reader exp(document, "experiment", errors);
    ex.comparison = default_comparison(subcommand);
    if (exp.has("comparison")) {
        try {
            ex.comparison = comparison_from_string(exp.string("comparison", "risk"));
        } catch (const ParameterError&) {
            exp.fail("comparison", "must be one of risk, train_risk, spectrum, bbp, pca_compare");
        }
    }
    ex.lambda = exp.number("lambda", ex.lambda);
    ex.trials = static_cast<int>(exp.integer("trials", ex.trials));
    ex.master_seed = exp.unsigned_integer("master_seed", ex.master_seed);
    try {
        ex.entry_dist = entry_distribution_from_string(exp.string("entry_dist", "gaussian"));
    } catch (const ParameterError&) {
        exp.fail("entry_dist", "must be gaussian or rademacher");
    }
    ex.bins = static_cast<int>(exp.integer("bins", ex.bins));
    ex.w1_tolerance = exp.number("w1_tolerance", ex.w1_tolerance);
    ex.rel_tolerance = exp.number("rel_tolerance", ex.rel_tolerance);
    ex.peak_rel_tolerance = exp.number("peak_rel_tolerance", ex.peak_rel_tolerance);
    ex.outlier_margin = exp.number("outlier_margin", ex.outlier_margin);
    ex.transition_tolerance = exp.number("transition_tolerance", ex.transition_tolerance);
    if (!(ex.lambda > 0.0)) exp.fail("lambda", "must be positive");
    if (ex.trials < 1) exp.fail("trials", "must be at least 1");
    if (ex.bins < 1) exp.fail("bins", "must be at least 1");
    for (const char* key : {"w1_tolerance", "rel_tolerance", "peak_rel_tolerance", "outlier_margin", "transition_tolerance"})
        if (exp.has(key) && !(exp.number(key, 0.0) > 0.0)) exp.fail(key, "must be positive");

    Reader out(document, "output", errors);
    cfg.out_dir = out.string("dir", cfg.out_dir);
    cfg.format = out.string("format", cfg.format);
    if (cfg.format != "csv" && cfg.format != "json" && cfg.format != "both")
        out.fail("format", "must be csv, json or both");

    // Subcommand requirements.
    const Comparison c = ex.comparison;
    auto expect = [&](bool ok, const std::string& field, const std::string& why) {
        if (!ok) errors.push_back(field + ": " + why);
    };
    if (subcommand == "simulate")
        expect(c == Comparison::Risk || c == Comparison::TrainRisk, "experiment.comparison",
               "simulate runs risk or train_risk");
    if (subcommand == "spectrum") expect(c == Comparison::Spectrum, "experiment.comparison", "spectrum runs spectrum");
    if (subcommand == "bbp") expect(c == Comparison::Bbp, "experiment.comparison", "bbp runs bbp");
    if (subcommand == "compare-pca")
        expect(c == Comparison::PcaCompare, "experiment.comparison", "compare-pca runs pca_compare");
    if (subcommand == "phase-curve") {
        expect(!cfg.rhos.empty(), "grid.rhos", "phase-curve needs a rho grid");
        for (double r : cfg.rhos) expect(r >= 0.0 && r < 1.0, "grid.rhos", "entries must lie in [0, 1)");
    }
    if (subcommand == "predict") {
        expect(!ex.alphas.empty() || !ex.ns.empty(), "grid.alphas", "predict needs an alpha grid or an n grid");
        for (double l : cfg.lambdas) expect(l >= 0.0 && std::isfinite(l), "grid.lambdas", "entries must be nonnegative");
    }
    if (cfg.lambdas.empty()) cfg.lambdas = {ex.lambda};

    // Remaining range checks are shared with the library.
    if (errors.empty() && subcommand != "predict" && subcommand != "phase-curve") {
        try {
            ex.validate();
        } catch (const ParameterError& e) {
            errors.push_back(e.what());
        }
    }
    if (errors.empty() && subcommand == "predict") {
        for (Eigen::Index n : ex.sample_sizes()) expect(n >= 1, "grid.alphas", "round(alpha d) must be at least 1");
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    const ExperimentConfig& ex = cfg.experiment;
    const CovarianceSpec& spec = ex.model;
    json doc;
    if (cfg.subcommand != "phase-curve" || spec.dim > 0) {
        json model = {{"kind", to_string(spec.kind)}, {"dim", static_cast<std::int64_t>(spec.dim)}};
        switch (spec.kind) {
            case CovarianceKind::Spiked:
                model["theta"] = spec.theta;
                model["spike"] = {{"mode", spike_mode_name(spec.spike.mode)},
                                  {"seed", spec.spike.seed},
                                  {"index", static_cast<std::uint64_t>(spec.spike.index)}};
                break;
            case CovarianceKind::Toeplitz: model["rho"] = spec.rho; break;
            case CovarianceKind::PowerLawDiagonal: model["beta"] = spec.beta; break;
            case CovarianceKind::Custom: model["csv"] = cfg.custom_csv; break;
            default: break;
        }
        doc["model"] = model;
    }
    doc["grid"] = {{"alphas", number_array(ex.alphas)},  {"ns", index_array(ex.ns)},
                   {"lambdas", number_array(cfg.lambdas)}, {"thetas", number_array(ex.thetas)},
                   {"ps", index_array(ex.ps)},            {"gammas", number_array(ex.gammas)},
                   {"rhos", number_array(cfg.rhos)},      {"fixed_n", static_cast<std::int64_t>(ex.fixed_n)}};
    doc["solver"] = {{"eta", ex.eta}, {"density_points", ex.density_points}, {"threads", ex.threads}};
    doc["experiment"] = {{"comparison", to_string(ex.comparison)},
                         {"lambda", ex.lambda},
                         {"trials", ex.trials},
                         {"master_seed", ex.master_seed},
                         {"entry_dist", to_string(ex.entry_dist)},
                         {"bins", ex.bins},
                         {"w1_tolerance", ex.w1_tolerance},
                         {"rel_tolerance", ex.rel_tolerance},
                         {"peak_rel_tolerance", ex.peak_rel_tolerance},
                         {"outlier_margin", ex.outlier_margin},
                         {"transition_tolerance", ex.transition_tolerance}};
    doc["output"] = {{"dir", cfg.out_dir}, {"format", cfg.format}};
    return doc;
}

std::string config_hash(const json& document) {
    const std::string text = document.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json json_number(double value) {
    if (std::isfinite(value)) return value;
    return format_double(value);
}

json report_to_json(const ExperimentReport& report, const json& config_echo) {
    json records = json::array();
    for (const Record& r : report.records) {
        records.push_back({{"grid_value", json_number(r.grid_value)},
                           {"metric", r.metric},
                           {"predicted", json_number(r.predicted)},
                           {"empirical_mean", json_number(r.empirical_mean)},
                           {"empirical_std", json_number(r.empirical_std)},
                           {"trials", r.trials},
                           {"excluded", r.excluded},
                           {"distance", json_number(r.distance)},
                           {"verdict", r.verdict},
                           {"seeds", r.seeds},
                           {"flags", r.flags}});
    }
    json curves = json::array();
    for (const Curve& c : report.curves) {
        json x = json::array(), y = json::array();
        for (double v : c.x) x.push_back(json_number(v));
        for (double v : c.y) y.push_back(json_number(v));
        curves.push_back({{"name", c.name}, {"grid_value", json_number(c.grid_value)}, {"x", x}, {"y", y}});
    }
    json summary = json::object();
    for (const auto& [key, value] : report.summary) summary[key] = json_number(value);
    return {{"comparison", to_string(report.comparison)},
            {"sigma_ref", report.sigma_ref},
            {"config", config_echo},
            {"records", records},
            {"curves", curves},
            {"summary", summary},
            {"notes", report.notes}};
}

CsvTable report_to_csv(const ExperimentReport& report) {
    CsvTable table;
    table.header = {"grid_value", "metric",   "predicted", "empirical_mean", "empirical_std", "trials",
                    "excluded",   "distance", "verdict",   "flags",          "seeds"};
    for (const Record& r : report.records) {
        std::vector<std::string> seeds;
        for (auto s : r.seeds) seeds.push_back(std::to_string(s));
        table.add_row({format_double(r.grid_value), r.metric, format_double(r.predicted),
                       format_double(r.empirical_mean), format_double(r.empirical_std), std::to_string(r.trials),
                       std::to_string(r.excluded), format_double(r.distance), r.verdict, join(r.flags, ';'),
                       join(seeds, ';')});
    }
    return table;
}

CsvTable curves_to_csv(const ExperimentReport& report) {
    CsvTable table;
    table.header = {"grid_value", "curve", "x", "y"};
    for (const Curve& c : report.curves)
        for (std::size_t i = 0; i < c.x.size(); ++i)
            table.add_row({format_double(c.grid_value), c.name, format_double(c.x[i]), format_double(c.y[i])});
    return table;
}

}  // namespace ssrlab
