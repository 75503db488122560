#include "ssrlab/config.hpp"
#include "ssrlab/errors.hpp"
#include "ssrlab/experiment.hpp"
#include "ssrlab/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace ssrlab;

namespace {

ExperimentConfig risk_config(CovarianceKind kind, Eigen::Index d, std::vector<double> alphas, int trials) {
    ExperimentConfig c;
    c.model.kind = kind;
    c.model.dim = d;
    c.alphas = std::move(alphas);
    c.trials = trials;
    c.lambda = 1e-3;
    c.master_seed = 17;
    return c;
}

const Record& find(const ExperimentReport& r, const std::string& metric, double grid) {
    for (const auto& rec : r.records)
        if (rec.metric == metric && std::abs(rec.grid_value - grid) < 1e-12) return rec;
    throw std::runtime_error("record not found: " + metric);
}

}  // namespace

TEST_CASE("sampling is deterministic and has the right covariance") {
    const CovarianceModel t = toeplitz_covariance(20, 0.5);
    const Dataset a = sample_dataset(t, 50000, 9);
    const Dataset b = sample_dataset(t, 50000, 9);
    CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd S = a.X.transpose() * a.X / 50000.0;
    CHECK((S - t.dense()).norm() / t.dense().norm() <= 0.05);
    CHECK(a.sigma_ref == t.name());

    const Dataset r = sample_dataset(identity_covariance(20), 50000, 10, EntryDistribution::Rademacher);
    CHECK(r.X.cwiseAbs().minCoeff() == 1.0);
    const Eigen::MatrixXd R = r.X.transpose() * r.X / 50000.0;
    CHECK((R - Eigen::MatrixXd::Identity(20, 20)).norm() / std::sqrt(20.0) <= 0.05);
    CHECK(r.entry_dist == EntryDistribution::Rademacher);
    CHECK_THROWS_AS(sample_dataset(t, 0, 1), ParameterError);
}

TEST_CASE("histogram and Wasserstein distances") {
    std::vector<double> s;
    for (int i = 0; i < 1000; ++i) s.push_back(std::sin(i * 0.37));
    const Histogram h = normalized_histogram(s, 25, -1.0, 1.0);
    double integral = 0.0;
    for (std::size_t i = 0; i < h.density.size(); ++i) integral += h.density[i] * (h.edges[i + 1] - h.edges[i]);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(wasserstein1({0.0}, {1.0}) == doctest::Approx(1.0));
    CHECK(wasserstein1({0.0, 1.0}, {0.0, 1.0}) == 0.0);
    CHECK(wasserstein1({0.0, 0.0}, {1.0, 3.0}) == doctest::Approx(2.0));

    // Uniform density on [0, 1] against its own quantiles.
    SpectralModel uniform;
    for (int i = 0; i <= 100; ++i) {
        uniform.grid.push_back(i / 100.0);
        uniform.density.push_back(1.0);
    }
    std::vector<double> q;
    for (int k = 0; k < 1000; ++k) q.push_back((k + 0.5) / 1000.0);
    CHECK(wasserstein1(q, uniform) < 1e-3);
    CHECK(wasserstein1(std::vector<double>(10, 0.5), uniform) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("risk experiment") {
    auto c = risk_config(CovarianceKind::Identity, 100, {0.5, 2.0, 4.0}, 4);
    const ExperimentReport r = run_experiment(c);
    CHECK(r.records.size() == 6);
    const Record& g2 = find(r, "generalization", 2.0);
    CHECK(g2.trials == 4);
    CHECK(g2.empirical_std >= 0.0);
    CHECK(g2.distance <= 0.1);
    REQUIRE(g2.seeds.size() == 4);
    CHECK(g2.seeds[3] == derive_seed(17, 1, 3));
    CHECK(std::find(g2.flags.begin(), g2.flags.end(), "near_peak") != g2.flags.end());
    CHECK_FALSE(r.notes.empty());

    // Reports do not depend on the worker count.
    c.threads = 3;
    const auto a = report_to_json(r, nlohmann::json::object()).dump();
    const auto b = report_to_json(run_experiment(c), nlohmann::json::object()).dump();
    CHECK(a == b);

    // Smallest valid n runs and is flagged.
    auto tiny = risk_config(CovarianceKind::Identity, 100, {0.01}, 3);
    const ExperimentReport t = run_experiment(tiny);
    const Record& g = find(t, "generalization", 0.01);
    CHECK(std::find(g.flags.begin(), g.flags.end(), "high_variance") != g.flags.end());
}

TEST_CASE("agreement improves with dimension") {
    auto median_error = [](Eigen::Index d) {
        auto c = risk_config(CovarianceKind::Toeplitz, d, {0.5, 0.75, 1.5, 2.0, 3.0}, 6);
        c.model.rho = 0.5;
        const ExperimentReport r = run_experiment(c);
        std::vector<double> errs;
        for (const auto& rec : r.records) errs.push_back(rec.distance);
        std::sort(errs.begin(), errs.end());
        return errs[errs.size() / 2];
    };
    CHECK(median_error(400) <= median_error(100));
}

TEST_CASE("spectrum experiment") {
    ExperimentConfig c;
    c.model.kind = CovarianceKind::Identity;
    c.model.dim = 400;
    c.alphas = {1.5, 0.5};
    c.lambda = 0.01;
    c.trials = 2;
    c.comparison = Comparison::Spectrum;
    c.density_points = 400;
    const ExperimentReport r = run_experiment(c);
    CHECK(find(r, "w1", 1.5).distance <= 0.05);
    const Record& w = find(r, "w1", 0.5);
    CHECK(std::find(w.flags.begin(), w.flags.end(), "atom_excluded") != w.flags.end());
    CHECK(w.distance <= 0.05);
    CHECK(find(r, "mass", 1.5).verdict == "pass");
    CHECK(r.curves.size() == 4);
    for (const auto& curve : r.curves) {
        if (curve.name != "empirical_histogram") continue;
        const double width = curve.x[1] - curve.x[0];
        double integral = 0.0;
        for (double y : curve.y) integral += y * width;
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-9));
    }
    c.bins = 10;
    CHECK_THROWS_AS(run_experiment(c), ParameterError);
}

TEST_CASE("bbp sweep") {
    ExperimentConfig c;
    c.model.kind = CovarianceKind::Spiked;
    c.model.dim = 300;
    c.alphas = {2.0};
    c.thetas = {0.2, 3.0, 6.0};
    c.lambda = 1e-5;
    c.trials = 2;
    c.comparison = Comparison::Bbp;
    const ExperimentReport r = run_experiment(c);
    CHECK(find(r, "top_eigenvalue", 0.2).verdict == "bulk");
    const Record& big = find(r, "top_eigenvalue", 3.0);
    CHECK(big.verdict == "outlier");
    CHECK(std::abs(big.empirical_mean - bbp_prediction(2.0, 3.0).s1) < 0.03);
    CHECK(find(r, "spike_overlap", 6.0).empirical_mean > 0.5);
    const Record& tr = find(r, "transition_eigenvalue", 1.0 / std::sqrt(2.0));
    CHECK(tr.empirical_mean == doctest::Approx(3.0));

    c.alphas = {0.8};
    CHECK_THROWS_AS(run_experiment(c), ParameterError);
    c.alphas = {2.0};
    c.model.kind = CovarianceKind::Identity;
    CHECK_THROWS_AS(run_experiment(c), ParameterError);
}

TEST_CASE("pca comparison") {
    ExperimentConfig c;
    c.model.kind = CovarianceKind::Spiked;
    c.model.dim = 100;
    c.model.theta = 1.0;
    c.alphas = {0.5, 2.0};
    c.ps = {3, 10, 100};
    c.lambda = 0.01;
    c.trials = 3;
    c.comparison = Comparison::PcaCompare;
    const ExperimentReport r = run_experiment(c);
    for (const auto& rec : r.records)
        if (rec.metric.rfind("pca_risk", 0) == 0) CHECK(rec.verdict == "pca_below");
    CHECK(find(r, "pca_risk_p100", 2.0).empirical_mean < 1e-12);
    c.ps = {101};
    CHECK_THROWS_AS(run_experiment(c), ParameterError);

    ExperimentConfig pop;
    pop.model.kind = CovarianceKind::Toeplitz;
    pop.model.dim = 100;
    pop.model.rho = 0.5;
    pop.fixed_n = 8000;
    pop.gammas = {0.05, 0.1, 0.15, 0.2, 0.3};
    pop.lambda = 1e-5;
    pop.trials = 1;
    pop.comparison = Comparison::PcaCompare;
    const ExperimentReport p = run_experiment(pop);
    const Record& cross = find(p, "crossing_gamma", ar1_phase_boundary(0.5));
    CHECK(cross.predicted == doctest::Approx(ar1_phase_boundary(0.5)));
    CHECK(std::abs(cross.empirical_mean - cross.predicted) < 0.05);
}

TEST_CASE("config validation") {
    ExperimentConfig c;
    c.model.kind = CovarianceKind::Identity;
    c.model.dim = 10;
    c.alphas = {1.0};
    c.trials = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c.trials = 1;
    c.alphas = {0.01};
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c.alphas = {};
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c.alphas = {1.0};
    c.lambda = 0.0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    CHECK(comparison_from_string(to_string(Comparison::TrainRisk)) == Comparison::TrainRisk);
    CHECK_THROWS_AS(comparison_from_string("nope"), ParameterError);
}
