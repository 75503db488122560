#pragma once
#include "ssrlab/covariance.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ssrlab {

enum class EntryDistribution { Gaussian, Rademacher };

std::string to_string(EntryDistribution dist);
EntryDistribution entry_distribution_from_string(const std::string& name);

struct Dataset {
    Eigen::MatrixXd X;  // n x d, rows are samples
    std::uint64_t seed = 0;
    EntryDistribution entry_dist = EntryDistribution::Gaussian;
    std::string sigma_ref;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }
};

// Wraps a raw sample matrix.
Dataset make_dataset(Eigen::MatrixXd X);

struct SsrEstimate {
    Eigen::MatrixXd A_hat;
    double lambda = 0.0;
    Eigen::MatrixXd Q;             // (Sigma_hat + lambda I)^{-1}
    Eigen::VectorXd Lambda_diag;   // 1 / diag(Q)
};

struct ApproximationResult {
    Eigen::MatrixXd A_app;
    double L_app = 0.0;
};

struct PcaResult {
    Eigen::Index p = 0;
    Eigen::MatrixXd projector;
    double population_risk = 0.0;
    double gamma = 0.0;
};

// Closed form A = I - Q diag(Q)^{-1}. Uses the n x n dual system when n < d/2.
SsrEstimate fit_ssr(const Dataset& data, double lambda);

// d separate ridge regressions, each predicting coordinate k from the others.
SsrEstimate fit_ssr_coordinatewise(const Dataset& data, double lambda);

// Resolvent (X^T X / n + lambda I)^{-1} through the primal or dual factorization.
Eigen::MatrixXd ridge_resolvent(const Eigen::MatrixXd& X, double lambda, bool dual);

// (1/d) Tr((I - A^T) Sigma (I - A)).
double population_risk(const Eigen::MatrixXd& A, const CovarianceModel& model);

// ||X - X A||_F^2 / (n d).
double empirical_risk(const Eigen::MatrixXd& A, const Dataset& data);

ApproximationResult approximation_optimum(const CovarianceModel& model);

// Projector onto the top-p eigenvectors of the population covariance.
PcaResult pca_fit(const CovarianceModel& reference, Eigen::Index p);
// Projector onto the top-p eigenvectors of X^T X / n; the risk field is the
// in-sample tail average. Evaluate against Sigma with population_risk().
PcaResult pca_fit(const Dataset& reference, Eigen::Index p);

// Eigenvalues of A_hat, nondecreasing, through the symmetric similarity
// 1 - eig(Lambda^{1/2} Q Lambda^{1/2}).
Eigen::VectorXd ssr_spectrum_empirical(const SsrEstimate& estimate);

// Unit eigenvector of Lambda^{1/2} Q Lambda^{1/2} for its smallest eigenvalue,
// the direction carrying the largest eigenvalue of A_hat.
struct TopDirection {
    double top_eigenvalue = 0.0;       // A_hat axis
    double second_eigenvalue = 0.0;    // A_hat axis
    Eigen::VectorXd direction;
};
TopDirection ssr_top_direction(const SsrEstimate& estimate);

}  // namespace ssrlab
