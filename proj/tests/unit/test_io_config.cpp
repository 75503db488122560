#include "ssrlab/config.hpp"
#include "ssrlab/errors.hpp"
#include "ssrlab/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace ssrlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    fs::create_directories(SSRLAB_TEST_TMP);
    return (fs::path(SSRLAB_TEST_TMP) / name).string();
}

bool mentions(const ConfigError& e, const std::string& field) {
    for (const auto& msg : e.errors())
        if (msg.rfind(field, 0) == 0) return true;
    return false;
}

}  // namespace

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0}) CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("matrix CSV round trip and loader errors") {
    Eigen::MatrixXd M(3, 3);
    M << 2, 0.5, 0.1, 0.5, 1, 0.2, 0.1, 0.2, 3;
    const std::string path = tmp_path("m.csv");
    write_matrix_csv(path, M);
    CHECK(load_covariance_csv(path) == M);

    write_text_file(tmp_path("rect.csv"), "1,2\n3,4\n5,6\n");
    CHECK_THROWS_AS(load_covariance_csv(tmp_path("rect.csv")), ParameterError);
    write_text_file(tmp_path("ragged.csv"), "1,2\n3\n");
    CHECK_THROWS_WITH_AS(read_matrix_csv(tmp_path("ragged.csv")), doctest::Contains(":2:"), ParameterError);
    write_text_file(tmp_path("text.csv"), "1,x\n3,4\n");
    CHECK_THROWS_WITH_AS(read_matrix_csv(tmp_path("text.csv")), doctest::Contains("'x'"), ParameterError);
    write_text_file(tmp_path("empty.csv"), "\n");
    CHECK_THROWS_AS(read_matrix_csv(tmp_path("empty.csv")), ParameterError);
    CHECK_THROWS_AS(read_matrix_csv(tmp_path("missing.csv")), ParameterError);

    CsvTable t;
    t.header = {"a", "b"};
    t.add_row({"1", "2"});
    CHECK(t.to_string() == "a,b\n1,2\n");
    CHECK_THROWS_AS(t.add_row({"1"}), ParameterError);
}

TEST_CASE("config errors are listed per field") {
    const json doc = {{"model", {{"kind", "toeplitz"}, {"dim", 1}, {"rho", 1.5}, {"colour", "red"}}},
                      {"grid", {{"alphas", "many"}}},
                      {"experiment", {{"trials", 0}}},
                      {"extras", 1}};
    try {
        parse_run_config(doc, "simulate");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(mentions(e, "model.dim"));
        CHECK(mentions(e, "model.rho"));
        CHECK(mentions(e, "model.colour"));
        CHECK(mentions(e, "grid.alphas"));
        CHECK(mentions(e, "experiment.trials"));
        CHECK(mentions(e, "extras"));
        CHECK(e.errors().size() >= 6);
    }
    CHECK_THROWS_AS(parse_run_config(json::object(), "simulate"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::array(), "predict"), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"model", {{"kind", "identity"}, {"dim", 10}}}}, "predict"), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"grid", {{"rhos", {1.0}}}}}, "phase-curve"), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"model", {{"kind", "identity"}, {"dim", 10}}}}, "fly"), ConfigError);
}

TEST_CASE("defaults are echoed and round trip") {
    const json doc = {{"model", {{"kind", "spiked"}, {"dim", 50}, {"theta", 2.0}}},
                      {"grid", {{"alphas", {0.5, 2.0}}}}};
    const RunConfig cfg = parse_run_config(doc, "simulate");
    CHECK(cfg.experiment.trials == 20);
    CHECK(cfg.experiment.lambda == 1e-4);
    CHECK(cfg.out_dir == "out");
    CHECK(cfg.format == "both");
    const json echo = run_config_to_json(cfg);
    CHECK(echo["experiment"]["trials"] == 20);
    CHECK(echo["model"]["spike"]["mode"] == "uniform_sphere");
    const RunConfig again = parse_run_config(echo, "simulate");
    CHECK(run_config_to_json(again) == echo);
    CHECK(config_hash(echo) == config_hash(run_config_to_json(again)));
    CHECK(config_hash(echo).size() == 16);
    json other = echo;
    other["experiment"]["master_seed"] = 5;
    CHECK(config_hash(other) != config_hash(echo));
}

TEST_CASE("custom covariance loads at parse time") {
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(4, 4);
    M(0, 1) = M(1, 0) = 0.3;
    write_matrix_csv(tmp_path("cov.csv"), M);
    const json doc = {{"model", {{"kind", "custom"}, {"csv", tmp_path("cov.csv")}}}, {"grid", {{"alphas", {2.0}}}}};
    const RunConfig cfg = parse_run_config(doc, "predict");
    CHECK(cfg.experiment.model.dim == 4);
    CHECK(cfg.experiment.model.custom == M);

    const json missing = {{"model", {{"kind", "custom"}, {"csv", tmp_path("nope.csv")}}}, {"grid", {{"alphas", {2.0}}}}};
    CHECK_THROWS_AS(parse_run_config(missing, "predict"), ConfigError);
    const json no_path = {{"model", {{"kind", "custom"}}}, {"grid", {{"alphas", {2.0}}}}};
    CHECK_THROWS_AS(parse_run_config(no_path, "predict"), ConfigError);
}

TEST_CASE("report serialization") {
    ExperimentReport r;
    r.sigma_ref = "identity(d=3)";
    Record rec;
    rec.grid_value = 2.0;
    rec.metric = "generalization";
    rec.predicted = std::numeric_limits<double>::infinity();
    rec.empirical_mean = 1.5;
    rec.trials = 2;
    rec.verdict = "divergent";
    rec.seeds = {1, 2};
    rec.flags = {"near_peak"};
    r.records.push_back(rec);
    r.curves.push_back({"density", 2.0, {0.0, 1.0}, {0.5, 0.5}});
    r.summary.push_back({"median", std::nan("")});

    const json j = report_to_json(r, {{"k", 1}});
    CHECK(j["records"][0]["predicted"] == "inf");
    CHECK(j["summary"]["median"] == "nan");
    CHECK(j["config"]["k"] == 1);

    const CsvTable t = report_to_csv(r);
    CHECK(t.header.front() == "grid_value");
    CHECK(t.header.size() == 11);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][2] == "inf");
    CHECK(t.rows[0][8] == "divergent");
    CHECK(curves_to_csv(r).rows.size() == 2);

    const json schema = config_schema();
    CHECK(schema["properties"].contains("model"));
    CHECK(schema["additionalProperties"] == false);
}
