#pragma once
#include "ssrlab/covariance.hpp"
#include "ssrlab/fixed_point.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ssrlab {

struct RiskPrediction {
    Eigen::Index n = 0;
    Eigen::Index d = 0;
    double lambda = 0.0;
    double kappa = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double L1 = 0.0;
    double gen_error = 0.0;
    double train_error = 0.0;
    double Lbar1 = 0.0;
    double Lbar2 = 0.0;
    double Lbar3 = 0.0;
    // df2 within 1% of n: errors are reported as infinite.
    bool divergent = false;
    // L_app / (alpha - 1) for alpha > 1; NaN otherwise. Gap between the
    // ridgeless risk and the approximation optimum.
    double ridgeless_excess = 0.0;
};

// Mode 1: Tr(A (Sigma_hat + lambda I)^{-1}) ~ (kappa / lambda) Tr(A (Sigma + kappa I)^{-1}).
double resolvent_trace_equivalent(const Eigen::MatrixXd& A, const CovarianceModel& model, Eigen::Index n,
                                  double lambda);
// Mode 2: Tr(A Q B Q) with the 1 / (n - df2) cross-trace correction.
double resolvent_trace_equivalent(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const CovarianceModel& model,
                                  Eigen::Index n, double lambda);

// Both limits; the two entry points below return the same record.
RiskPrediction predict_risk(const CovarianceModel& model, Eigen::Index n, double lambda);
RiskPrediction predict_gen_error(const CovarianceModel& model, Eigen::Index n, double lambda);
RiskPrediction predict_train_error(const CovarianceModel& model, Eigen::Index n, double lambda);

// Peak narrower than the grid resolves; integrated on a finer sub-grid.
struct SpectralAtom {
    double location = 0.0;
    double lo = 0.0;               // refinement window
    double hi = 0.0;
    double mass = 0.0;             // Lorentzian mass, tails outside the window included
};

struct SpectralModel {
    std::vector<double> grid;      // A_hat eigenvalue axis, increasing
    std::vector<double> density;
    double eta = 0.0;
    std::pair<double, double> support_estimate{0.0, 0.0};
    std::vector<cdouble> chi_trace;
    std::vector<bool> flagged;
    std::vector<std::string> warnings;
    // Trapezoid mass, with unresolved peaks integrated on their sub-grids.
    double mass = 0.0;
    std::vector<SpectralAtom> atoms;
};

// Evenly spaced grid over [lo, hi] padded by pad * (hi - lo) on each side.
std::vector<double> padded_grid(double lo, double hi, int points = 1000, double pad = 0.1);
// 1e-3 times the grid span.
double default_eta(const std::vector<double>& grid);

// Stieltjes inversion of (1/d) Tr G(s + i eta), reported on the A_hat axis
// x = 1 - s. Grid points are solved in fixed blocks so output does not depend
// on the thread count.
SpectralModel predicted_spectral_density(const CovarianceModel& model, Eigen::Index n, double lambda,
                                         const std::vector<double>& grid, double eta, int threads = 1);

// Trapezoid integral of density over grid.
double density_mass(const std::vector<double>& grid, const std::vector<double>& density);

// Universal ridgeless limit for diagonal covariance, alpha > 1.
std::pair<double, double> universal_support(double alpha);
// (1/d) Tr G at complex z on the s axis.
cdouble universal_stieltjes(double alpha, cdouble z);
// Exact limiting density on the A_hat axis (eta -> 0).
SpectralModel universal_density(double alpha, const std::vector<double>& grid);

struct SpikedAnalysis {
    double theta = 0.0;
    double alpha = 0.0;
    double theta_c = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    std::optional<double> z_star;
    double a = 0.0;
    double b = 0.0;
    double L_ssr_pop = 0.0;
    double L_pca_pop = 0.0;
};

// Top two eigenvalues of A_hat for a delocalized spike, ridgeless limit.
SpikedAnalysis bbp_prediction(double alpha, double theta);

// Population losses of the ridge SSR matrix and of rank-p PCA for
// Sigma = I + theta v v^T.
SpikedAnalysis spiked_population_losses(double theta, double lambda, const Eigen::VectorXd& spike, Eigen::Index p);
SpikedAnalysis spiked_population_losses(double theta, double lambda, const SpikeSpec& spike, Eigen::Index d,
                                        Eigen::Index p);

struct Ar1Analysis {
    double rho = 0.0;
    double E_plus = 0.0;
    double E_minus = 0.0;
    double f_pop = 0.0;
    std::vector<double> gammas;
    std::vector<double> pca_pop;
    double gamma_star = 0.0;
};

double ar1_population_ssr_loss(double rho, double lambda);
double ar1_pca_population_loss(double rho, double gamma);
double ar1_phase_boundary(double rho);
Ar1Analysis ar1_analysis(double rho, double lambda, const std::vector<double>& gammas);

// Circulant-spectrum df2 for the AR(1) covariance, and its rho -> 1 form.
double toeplitz_df2_closed_form(double rho, double kappa, Eigen::Index d);
double toeplitz_df2_approximation(double rho, double kappa, Eigen::Index d);

}  // namespace ssrlab
