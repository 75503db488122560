#pragma once
#include "ssrlab/covariance.hpp"

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <string>

namespace ssrlab {

using cdouble = std::complex<double>;

enum class SolverMethod { Picard, Bisection, RidgelessLimit };

std::string to_string(SolverMethod method);

struct FixedPointSolution {
    double kappa = 0.0;
    double m_tilde = 0.0;
    double nu = 0.0;
    double residual = 0.0;
    int iterations = 0;
    SolverMethod method = SolverMethod::Picard;
};

struct KappaOptions {
    double damping = 0.5;
    int max_iterations = 10000;
};

struct DegreesOfFreedom {
    double df1 = 0.0;
    double df2 = 0.0;
};

// Sums over the covariance spectrum; zero eigenvalues contribute nothing.
DegreesOfFreedom degrees_of_freedom(const Eigen::VectorXd& eigenvalues, double kappa);
DegreesOfFreedom degrees_of_freedom(const CovarianceModel& model, double kappa);

// Effective regularization: kappa = lambda + (kappa / n) df1(kappa).
// lambda = 0 returns the ridgeless limit (kappa = 0 when n >= rank Sigma).
FixedPointSolution solve_kappa(const Eigen::VectorXd& eigenvalues, Eigen::Index n, double lambda,
                               const KappaOptions& options = {});
FixedPointSolution solve_kappa(const CovarianceModel& model, Eigen::Index n, double lambda,
                               const KappaOptions& options = {});

// |kappa - lambda - (kappa / n) df1(kappa)|.
double kappa_residual(const Eigen::VectorXd& eigenvalues, Eigen::Index n, double lambda, double kappa);

// m = 1 / (lambda + Tr(Sigma (m Sigma + I)^{-1}) / n), solved on its own.
double solve_mtilde(const Eigen::VectorXd& eigenvalues, Eigen::Index n, double lambda,
                    const KappaOptions& options = {});
double solve_mtilde(const CovarianceModel& model, Eigen::Index n, double lambda, const KappaOptions& options = {});
double mtilde_residual(const Eigen::VectorXd& eigenvalues, Eigen::Index n, double lambda, double m);

// Ridgeless nu for a full-rank covariance with n > d.
double ridgeless_nu(double alpha);

struct DbarVectors {
    Eigen::VectorXd d_risk;  // 1 / [(Sigma + kappa I)^{-1}]_kk
    Eigen::VectorXd d_spec;  // lambda / [(m Sigma + I)^{-1}]_kk
    double kappa = 0.0;
    double m_tilde = 0.0;
};

DbarVectors dbar_vectors(const CovarianceModel& model, Eigen::Index n, double lambda);

struct ChiSolution {
    cdouble z;
    cdouble chi;
    double residual = 0.0;
    // (1/d) Tr G(z) for the deterministic resolvent of the symmetrized matrix.
    cdouble trace_G;
    int iterations = 0;
    bool converged = false;
};

struct ChiOptions {
    double damping = 0.5;
    int max_iterations = 5000;
    double tolerance = 1e-12;
};

class TraceEvaluator;

// Solver for chi = (1/n) Tr(Sigma M^{-1}), M = D/z - lambda I - Sigma / (1 - chi),
// with D the spectral rescaler d_spec. Construction picks the cheapest exact
// evaluation of the two traces for the given covariance structure. The
// object is immutable after construction and safe to share across threads.
class ChiSolver {
public:
    ChiSolver(const CovarianceModel& model, Eigen::Index n, double lambda, const ChiOptions& options = {});

    // Damped iteration from chi = 0.
    ChiSolution solve(cdouble z) const;
    // Same, seeded with a nearby solution (grid continuation).
    ChiSolution solve(cdouble z, cdouble warm_start) const;
    // Follows the solution down from far above the real axis to z; used to
    // start a continuation sweep on the physical branch.
    ChiSolution solve_from_above(cdouble z) const;

    // Right-hand side of the self-consistent equation.
    cdouble map(cdouble chi, cdouble z) const;
    // (1/d) Tr G(z) at a given chi.
    cdouble trace_G(cdouble chi, cdouble z) const;

    const DbarVectors& dbar() const { return dbar_; }
    const std::string& strategy() const { return strategy_; }
    Eigen::Index n() const { return n_; }
    Eigen::Index dim() const { return d_; }

private:
    ChiSolution iterate(cdouble z, cdouble start, bool accelerate) const;
    bool admissible(const ChiSolution& sol) const;

    Eigen::Index n_;
    Eigen::Index d_;
    double lambda_;
    ChiOptions options_;
    DbarVectors dbar_;
    std::shared_ptr<const TraceEvaluator> traces_;
    std::string strategy_;
};

ChiSolution solve_chi(const CovarianceModel& model, Eigen::Index n, double lambda, cdouble z);

// Physical root of chi^2 + (z - 1) chi + z / (alpha - 1) = 0 (diagonal
// covariance, ridgeless, alpha > 1): the branch with (1/d) Tr G a Stieltjes
// transform for Im z > 0, and the root vanishing as z -> 0 for real z left of
// the bulk.
cdouble ridgeless_diagonal_chi(double alpha, cdouble z);

}  // namespace ssrlab
