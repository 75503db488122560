#include "ssrlab/asymptotics.hpp"
#include "ssrlab/errors.hpp"
#include "ssrlab/experiment.hpp"
#include "ssrlab/rng.hpp"
#include "ssrlab/ssr.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace ssrlab;

namespace {

// Eliminating chi between the spike condition and the diagonal ridgeless
// quadratic leaves z [(c^2 - c) z - c + alpha / (alpha - 1)] = 0 with
// c = alpha (1 + theta) / (alpha - 1).
double spike_root(double alpha, double theta) {
    const double c = alpha * (1.0 + theta) / (alpha - 1.0);
    return (c - alpha / (alpha - 1.0)) / (c * (c - 1.0));
}

Eigen::Index samples(double alpha, Eigen::Index d) {
    return static_cast<Eigen::Index>(std::llround(alpha * static_cast<double>(d)));
}

}  // namespace

TEST_CASE("ridgeless isotropic risks") {
    const CovarianceModel id = identity_covariance(400);
    const RiskPrediction two = predict_gen_error(id, 800, 1e-8);
    CHECK(two.gen_error == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(two.train_error == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(two.ridgeless_excess == doctest::Approx(1.0));
    CHECK(two.gen_error - two.L1 == doctest::Approx(two.ridgeless_excess).epsilon(1e-5));
    const RiskPrediction half = predict_train_error(id, 200, 1e-8);
    CHECK(half.train_error <= 1e-3);
    CHECK(std::isnan(half.ridgeless_excess));
    // Huge lambda: the estimate collapses to zero.
    const CovarianceModel t = toeplitz_covariance(100, 0.5);
    const RiskPrediction big = predict_risk(t, 200, 1e6);
    CHECK(big.gen_error == doctest::Approx(t.trace() / 100.0).epsilon(1e-4));
    CHECK(big.train_error == doctest::Approx(t.trace() / 100.0).epsilon(1e-4));
}

TEST_CASE("risk prediction structure across models") {
    const Eigen::Index d = 120;
    for (const auto& model : {identity_covariance(d), toeplitz_covariance(d, 0.5), toeplitz_covariance(d, 0.9),
                              power_law_covariance(d, 0.5), spiked_covariance(d, 1.0, SpikeSpec{})}) {
        const double L_app = approximation_optimum(model).L_app;
        for (double lambda : {1e-4, 1e-2, 1.0}) {
            for (double alpha : {0.5, 2.0, 5.0}) {
                const Eigen::Index n = samples(alpha, d);
                const RiskPrediction p = predict_risk(model, n, lambda);
                CHECK_FALSE(p.divergent);
                CHECK(p.gen_error == doctest::Approx(p.L1 * (1.0 + p.df2 / (static_cast<double>(n) - p.df2))));
                CHECK(p.gen_error >= L_app);
                CHECK(p.train_error >= 0.0);
                CHECK(p.df2 < static_cast<double>(n));
            }
        }
        // Gap to the optimum closes as alpha grows.
        double previous = 1e300;
        for (double alpha : {2.0, 4.0, 16.0, 64.0}) {
            const double gap = predict_gen_error(model, samples(alpha, d), 1e-6).gen_error - L_app;
            CHECK(gap < previous);
            previous = gap;
        }
        CHECK(previous < 0.05 * L_app);
    }
    // Interpolation pole.
    const RiskPrediction pole = predict_risk(identity_covariance(200), 200, 1e-9);
    CHECK(pole.divergent);
    CHECK(std::isinf(pole.gen_error));
    CHECK_THROWS_AS(predict_risk(identity_covariance(20), 40, 0.0), ParameterError);
}

TEST_CASE("trace equivalents") {
    const Eigen::Index d = 300;
    const CovarianceModel id = identity_covariance(d);
    const double lambda = 0.1;
    const Eigen::Index n = 900;
    const double kappa = solve_kappa(id, n, lambda).kappa;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    CHECK(resolvent_trace_equivalent(I, id, n, lambda) ==
          doctest::Approx(kappa / lambda * static_cast<double>(d) / (1.0 + kappa)));
    CHECK(resolvent_trace_equivalent(I, Eigen::MatrixXd::Zero(d, d), id, n, lambda) == 0.0);

    // Monte Carlo average of Tr(Q^2).
    const double predicted = resolvent_trace_equivalent(I, I, id, n, lambda);
    double mc = 0.0;
    const int draws = 50;
    for (int t = 0; t < draws; ++t) {
        const Dataset data = sample_dataset(id, n, derive_seed(77, 0, static_cast<std::uint64_t>(t)));
        const Eigen::MatrixXd Q = ridge_resolvent(data.X, lambda, false);
        mc += Q.squaredNorm();
    }
    mc /= draws;
    CHECK(std::abs(mc / predicted - 1.0) <= 0.02);

    // A = D^2 (spectral rescaler), B = Sigma reproduces the generalization trace.
    for (const auto& model : {toeplitz_covariance(80, 0.6), power_law_covariance(80, 1.0)}) {
        const RiskPrediction p = predict_gen_error(model, 200, 0.01);
        const DbarVectors v = dbar_vectors(model, 200, 0.01);
        const Eigen::MatrixXd A = v.d_spec.cwiseAbs2().asDiagonal();
        const double traced = resolvent_trace_equivalent(A, model.dense(), model, 200, 0.01) / 80.0;
        CHECK(traced == doctest::Approx(p.gen_error).epsilon(1e-10));
    }
}

TEST_CASE("predicted spectral density") {
    const CovarianceModel id = identity_covariance(400);
    const auto [lo, hi] = universal_support(1.5);
    const std::vector<double> grid = padded_grid(lo, hi, 400);
    const SpectralModel s = predicted_spectral_density(id, 600, 0.01, grid, default_eta(grid));
    CHECK(s.mass >= 0.98);
    CHECK(s.mass <= 1.02);
    for (double v : s.density) CHECK(v >= 0.0);
    CHECK(s.warnings.empty());
    CHECK(s.support_estimate.first < s.support_estimate.second);

    CHECK_THROWS_AS(predicted_spectral_density(id, 600, 0.01, grid, 0.0), ParameterError);
    CHECK_THROWS_AS(padded_grid(0.0, 1.0, 1), ParameterError);
    CHECK(padded_grid(1.0, 1.0, 10).front() < 1.0);
}

TEST_CASE("universal law") {
    const auto [lo, hi] = universal_support(4.0);
    CHECK(lo == doctest::Approx(-2.0));
    CHECK(hi == doctest::Approx(2.0 / 3.0));
    const auto [lo2, hi2] = universal_support(1e8);
    CHECK(hi2 - lo2 < 1e-3);
    CHECK_THROWS_AS(universal_support(1.0), ParameterError);

    const std::vector<double> grid = padded_grid(lo, hi, 2000, 0.05);
    const SpectralModel u = universal_density(4.0, grid);
    CHECK(u.mass == doctest::Approx(1.0).epsilon(0.01));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < lo - 1e-9 || grid[i] > hi + 1e-9) CHECK(u.density[i] == 0.0);
        CHECK(u.density[i] >= 0.0);
    }

    // The general solver reproduces the closed form for diagonal covariances.
    const Eigen::Index d = 100;
    const std::vector<double> g2 = padded_grid(-4.83, 0.83, 400);
    const SpectralModel closed = universal_density(2.0, g2);
    for (double beta : {0.5, 2.0}) {
        const SpectralModel general =
            predicted_spectral_density(power_law_covariance(d, beta), 2 * d, 1e-7, g2, 1e-4);
        double worst = 0.0;
        for (std::size_t i = 0; i < g2.size(); ++i)
            if (g2[i] > -4.6 && g2[i] < 0.8) worst = std::max(worst, std::abs(general.density[i] - closed.density[i]));
        CHECK(worst <= 1e-2);
        std::vector<double> quantiles;
        // W1 between the two densities via samples of the closed form's quantiles.
        std::vector<double> cdf(g2.size(), 0.0);
        for (std::size_t i = 1; i < g2.size(); ++i)
            cdf[i] = cdf[i - 1] + 0.5 * (closed.density[i] + closed.density[i - 1]) * (g2[i] - g2[i - 1]);
        for (int k = 0; k < 4000; ++k) {
            const double target = (k + 0.5) / 4000.0 * cdf.back();
            const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
            quantiles.push_back(g2[static_cast<std::size_t>(it - cdf.begin())]);
        }
        CHECK(wasserstein1(quantiles, general) <= 0.02);
    }
}

TEST_CASE("BBP outlier predictions") {
    const double edge2 = 2.0 / (std::sqrt(2.0) + 1.0);
    const SpikedAnalysis sub = bbp_prediction(2.0, 0.5);
    CHECK(sub.s1 == doctest::Approx(edge2));
    CHECK(sub.s2 == doctest::Approx(edge2));
    CHECK_FALSE(sub.z_star.has_value());
    const SpikedAnalysis super = bbp_prediction(2.0, 1.0);
    CHECK(super.s1 == doctest::Approx(5.0 / 6.0).epsilon(1e-10));
    REQUIRE(super.z_star.has_value());
    CHECK(*super.z_star == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
    CHECK(super.theta_c == doctest::Approx(1.0 / std::sqrt(2.0)));

    for (double alpha : {1.5, 2.0, 4.0, 9.0}) {
        const double theta_c = 1.0 / std::sqrt(alpha);
        for (double theta : {theta_c + 0.05, 1.0, 2.0, 10.0}) {
            const SpikedAnalysis a = bbp_prediction(alpha, theta);
            CHECK(a.s1 == doctest::Approx(1.0 - spike_root(alpha, theta)).epsilon(1e-9));
            CHECK(a.s1 >= a.s2);
        }
    }
    for (double alpha : {2.0, 4.0}) {
        const double theta_c = 1.0 / std::sqrt(alpha);
        CHECK(bbp_prediction(alpha, theta_c).s1 == doctest::Approx(2.0 / (std::sqrt(alpha) + 1.0)).epsilon(1e-9));
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            const double jump = std::abs(bbp_prediction(alpha, theta_c + eps).s1 - bbp_prediction(alpha, theta_c - eps).s1);
            CHECK(jump <= 5.0 * eps);
        }
    }
    CHECK_THROWS_AS(bbp_prediction(1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(bbp_prediction(2.0, -1.0), ParameterError);
}

TEST_CASE("spiked population losses") {
    SpikeSpec uniform;
    const SpikedAnalysis iso = spiked_population_losses(0.0, 0.01, uniform, 300, 1);
    CHECK(iso.L_ssr_pop == doctest::Approx(1.0));
    const SpikedAnalysis deloc = spiked_population_losses(1.0, 0.01, uniform, 300, 1);
    CHECK(deloc.L_ssr_pop >= 0.99);
    CHECK(deloc.L_ssr_pop <= 1.01);
    CHECK(deloc.L_pca_pop == doctest::Approx(299.0 / 300.0));
    CHECK(deloc.b == doctest::Approx(1.0 / 2.01));

    // Basis spike in d = 2 at lambda = 0 is the exact optimum on diag(2, 1).
    SpikeSpec basis;
    basis.mode = SpikeSpec::Mode::Basis;
    const SpikedAnalysis two = spiked_population_losses(1.0, 0.0, basis, 2, 1);
    Eigen::Matrix2d sigma = Eigen::Vector2d(2, 1).asDiagonal();
    CHECK(two.L_ssr_pop == doctest::Approx(approximation_optimum(custom_covariance(sigma)).L_app));
    CHECK(two.L_ssr_pop == doctest::Approx(1.5));

    for (double theta : {0.5, 1.0, 5.0})
        for (Eigen::Index p : {1, 10})
            for (double lambda : {1e-3, 0.1}) {
                const SpikedAnalysis a = spiked_population_losses(theta, lambda, uniform, 300, p);
                CHECK(a.L_ssr_pop - a.L_pca_pop >= static_cast<double>(p) / 300.0 - 0.01);
            }
    CHECK_THROWS_AS(spiked_population_losses(1.0, 0.1, uniform, 300, 0), ParameterError);
}

TEST_CASE("AR(1) population quantities") {
    CHECK(ar1_population_ssr_loss(0.5, 0.0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(ar1_population_ssr_loss(1e-9, 0.3) == doctest::Approx(1.0));
    for (double rho : {0.2, 0.5, 0.9}) {
        const Ar1Analysis a = ar1_analysis(rho, 1e-3, {0.0, 0.5, 1.0});
        CHECK(a.E_plus * a.E_minus == doctest::Approx(1.0));
        CHECK(a.pca_pop[0] == doctest::Approx(1.0));
        CHECK(a.pca_pop[2] == doctest::Approx(0.0));
        CHECK(ar1_population_ssr_loss(rho, 1e-12) ==
              doctest::Approx((1.0 - rho * rho) / (1.0 + rho * rho)).epsilon(1e-9));
        for (int k = 0; k < 19; ++k) {
            const double g = 0.05 * k;
            CHECK(ar1_pca_population_loss(rho, g + 0.05) < ar1_pca_population_loss(rho, g));
        }
    }
    // Finite Toeplitz approximation optimum approaches the ridgeless loss.
    const double L_app = approximation_optimum(toeplitz_covariance(400, 0.5)).L_app;
    CHECK(std::abs(L_app / ar1_population_ssr_loss(0.5, 0.0) - 1.0) <= 0.01);

    const double gstar = ar1_phase_boundary(0.5);
    CHECK(gstar == doctest::Approx(0.1512647).epsilon(1e-6));
    CHECK(ar1_pca_population_loss(0.5, gstar) == doctest::Approx(0.6).epsilon(1e-10));
    CHECK(ar1_phase_boundary(1e-9) < 1e-8);
    double previous = 0.0;
    for (double rho = 0.1; rho < 0.95; rho += 0.1) {
        const double g = ar1_phase_boundary(rho);
        CHECK(g > previous);
        CHECK(g > 0.0);
        CHECK(g < 1.0);
        const double ssr = ar1_population_ssr_loss(rho, 0.0);
        CHECK(ar1_pca_population_loss(rho, g + 1e-9) < ssr);
        CHECK(ar1_pca_population_loss(rho, g - 1e-9) > ssr);
        previous = g;
    }
}

TEST_CASE("Toeplitz degrees of freedom") {
    CHECK(toeplitz_df2_closed_form(1e-12, 0.3, 100) == doctest::Approx(100.0 / (1.3 * 1.3)));
    const double approx = toeplitz_df2_approximation(0.9, 0.04, 2000);
    CHECK(approx == doctest::Approx(2000.0 * std::sqrt(1.0 - 0.81) / (4.0 * 0.2)));
    CHECK(std::abs(toeplitz_df2_closed_form(0.9, 0.04, 2000) / approx - 1.0) <= 0.10);
    const CovarianceModel t = toeplitz_covariance(500, 0.6);
    for (double kappa : {0.05, 0.5}) {
        const double exact = degrees_of_freedom(t, kappa).df2;
        CHECK(std::abs(toeplitz_df2_closed_form(0.6, kappa, 500) / exact - 1.0) <= 0.03);
    }
}
