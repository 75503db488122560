#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path work_dir(const std::string& name) {
    const fs::path p = fs::path(SSRLAB_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + SSRLAB_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path& dir, const nlohmann::json& doc) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << doc.dump();
    return p;
}

std::string config(const std::string& name) { return std::string(SSRLAB_CONFIG_DIR) + "/" + name; }

}  // namespace

TEST_CASE("predict writes the identity closed form") {
    const fs::path out = work_dir("predict");
    REQUIRE(run_cli("predict --config " + config("predict_identity.json") + " --out " + out.string()) == 0);
    const nlohmann::json j = nlohmann::json::parse(slurp(out / "predict.json"));
    bool found = false;
    for (const auto& row : j["rows"]) {
        if (row["alpha"] == 2.0 && row["lambda"] == 1e-8) {
            CHECK(row["gen_error"].get<double>() == doctest::Approx(2.0).epsilon(1e-4));
            CHECK(row["train_error"].get<double>() == doctest::Approx(0.5).epsilon(1e-4));
            found = true;
        }
    }
    CHECK(found);
    CHECK(fs::exists(out / "predict.csv"));
    const nlohmann::json m = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(m["exit_code"] == 0);
    CHECK(m["subcommand"] == "predict");
    CHECK(m["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("phase-curve row and format selection") {
    const fs::path out = work_dir("phase");
    REQUIRE(run_cli("phase-curve --config " + config("phase_curve.json") + " --out " + out.string()) == 0);
    CHECK_FALSE(fs::exists(out / "phase_curve.json"));
    const std::string csv = slurp(out / "phase_curve.csv");
    CHECK(csv.rfind("rho,gamma_star,E_plus,E_minus,ssr_population_loss,lambda\n", 0) == 0);
    CHECK(csv.find("\n0.5,0.1512646") != std::string::npos);
}

TEST_CASE("simulate is reproducible and stays inside its output directory") {
    const fs::path dir = work_dir("simulate");
    const nlohmann::json doc = {{"model", {{"kind", "toeplitz"}, {"dim", 40}, {"rho", 0.5}}},
                                {"grid", {{"alphas", {0.5, 2.0}}}},
                                {"experiment", {{"trials", 3}, {"lambda", 1e-3}}}};
    const fs::path cfg = write_config(dir, doc);
    const fs::path a = dir / "a", b = dir / "b";
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + a.string() + " --seed 4") == 0);
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + b.string() + " --seed 4 --threads 2") == 0);
    CHECK(slurp(a / "simulate.csv") == slurp(b / "simulate.csv"));
    std::size_t entries = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 3);
    const nlohmann::json m = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(m["master_seed"] == 4);
    CHECK(m["seeds"].size() == 6);
}

TEST_CASE("bad configs exit with code 2") {
    const fs::path dir = work_dir("bad");
    const fs::path cfg = write_config(dir, {{"model", {{"kind", "toeplitz"}, {"dim", 40}, {"rho", 2.0}}},
                                            {"grid", {{"alphas", {2.0}}}}});
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " + (dir / "o").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "o"));
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run_cli("predict --config " + (dir / "broken.json").string()) == 2);
    const fs::path csv_cfg = dir / "custom.json";
    std::ofstream(csv_cfg) << R"({"model": {"kind": "custom", "csv": ")" << (dir / "absent.csv").string()
                           << R"("}, "grid": {"alphas": [2]}})";
    CHECK(run_cli("predict --config " + csv_cfg.string()) == 2);
    CHECK(run_cli("--schema") == 0);
}
