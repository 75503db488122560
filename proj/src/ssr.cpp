#include "ssrlab/ssr.hpp"

#include "ssrlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ssrlab {

std::string to_string(EntryDistribution dist) {
    return dist == EntryDistribution::Gaussian ? "gaussian" : "rademacher";
}

EntryDistribution entry_distribution_from_string(const std::string& name) {
    if (name == "gaussian") return EntryDistribution::Gaussian;
    if (name == "rademacher") return EntryDistribution::Rademacher;
    throw ParameterError("unknown entry distribution '" + name + "'");
}

Dataset make_dataset(Eigen::MatrixXd X) {
    Dataset data;
    data.X = std::move(X);
    data.sigma_ref = "external";
    return data;
}

namespace {

void check_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ParameterError("ridge parameter lambda must be positive and finite, got " + std::to_string(lambda));
}

void check_data(const Dataset& data) {
    if (data.n() < 1 || data.d() < 1) throw ParameterError("dataset must have n >= 1 and d >= 1");
}

void check_square(const Eigen::MatrixXd& A, Eigen::Index d, const char* op) {
    if (A.rows() != d || A.cols() != d) {
        std::ostringstream os;
        os << op << ": predictor is " << A.rows() << "x" << A.cols() << ", expected " << d << "x" << d;
        throw ParameterError(os.str());
    }
}

SsrEstimate assemble(Eigen::MatrixXd Q, double lambda) {
    const Eigen::VectorXd q = Q.diagonal();
    if (!(q.minCoeff() > 0.0)) throw NumericError("resolvent has a nonpositive diagonal entry");
    SsrEstimate est;
    est.lambda = lambda;
    est.Lambda_diag = q.cwiseInverse();
    est.A_hat = -Q * est.Lambda_diag.asDiagonal();
    est.A_hat.diagonal().setZero();
    est.Q = std::move(Q);
    return est;
}

}  // namespace

Eigen::MatrixXd ridge_resolvent(const Eigen::MatrixXd& X, double lambda, bool dual) {
    check_lambda(lambda);
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd Q;
    if (dual) {
        // (X^T X / n + lambda)^{-1} = (I - X^T (n lambda + X X^T)^{-1} X) / lambda
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
        K.selfadjointView<Eigen::Lower>().rankUpdate(X);
        K.diagonal().array() += static_cast<double>(n) * lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(K.selfadjointView<Eigen::Lower>());
        if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorization of the dual Gram system failed");
        const Eigen::MatrixXd KX = llt.solve(X);
        Q = Eigen::MatrixXd::Identity(d, d);
        Q.noalias() -= X.transpose() * KX;
        Q /= lambda;
    } else {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
        M.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), inv_n);
        M.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(M.selfadjointView<Eigen::Lower>());
        if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorization of the regularized covariance failed");
        Q = llt.solve(Eigen::MatrixXd::Identity(d, d));
    }
    return 0.5 * (Q + Q.transpose());
}

SsrEstimate fit_ssr(const Dataset& data, double lambda) {
    check_lambda(lambda);
    check_data(data);
    const bool dual = 2 * data.n() < data.d();
    return assemble(ridge_resolvent(data.X, lambda, dual), lambda);
}

SsrEstimate fit_ssr_coordinatewise(const Dataset& data, double lambda) {
    check_lambda(lambda);
    check_data(data);
    const Eigen::Index n = data.n();
    const Eigen::Index d = data.d();
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::MatrixXd G = inv_n * data.X.transpose() * data.X;

    SsrEstimate est = assemble(ridge_resolvent(data.X, lambda, false), lambda);
    est.A_hat.setZero();
    std::vector<Eigen::Index> others(static_cast<std::size_t>(d - 1));
    for (Eigen::Index k = 0; k < d; ++k) {
        for (Eigen::Index j = 0, t = 0; j < d; ++j)
            if (j != k) others[static_cast<std::size_t>(t++)] = j;
        Eigen::MatrixXd M = G(others, others);
        M.diagonal().array() += lambda;
        const Eigen::VectorXd rhs = G(others, k);
        const Eigen::VectorXd a = M.llt().solve(rhs);
        for (Eigen::Index t = 0; t < d - 1; ++t) est.A_hat(others[static_cast<std::size_t>(t)], k) = a(t);
    }
    return est;
}

double population_risk(const Eigen::MatrixXd& A, const CovarianceModel& model) {
    const Eigen::Index d = model.dim();
    check_square(A, d, "population_risk");
    Eigen::MatrixXd B = -A;
    B.diagonal().array() += 1.0;
    const Eigen::MatrixXd SB = model.dense() * B;
    const double value = B.cwiseProduct(SB).sum() / static_cast<double>(d);
    return std::max(value, 0.0);
}

double empirical_risk(const Eigen::MatrixXd& A, const Dataset& data) {
    check_square(A, data.d(), "empirical_risk");
    const Eigen::MatrixXd R = data.X - data.X * A;
    return R.squaredNorm() / (static_cast<double>(data.n()) * static_cast<double>(data.d()));
}

ApproximationResult approximation_optimum(const CovarianceModel& model) {
    const Eigen::VectorXd cond_var = diag_precision_inverse(model);
    const Eigen::MatrixXd& U = model.eigenvectors();
    const Eigen::MatrixXd precision = U * model.eigenvalues().cwiseInverse().asDiagonal() * U.transpose();
    ApproximationResult out;
    out.A_app = -precision * cond_var.asDiagonal();
    out.A_app.diagonal().setZero();
    out.L_app = cond_var.mean();
    return out;
}

namespace {

PcaResult pca_from_eigen(const Eigen::VectorXd& ascending_values, const Eigen::MatrixXd& ascending_vectors,
                         Eigen::Index p) {
    const Eigen::Index d = ascending_values.size();
    if (p < 0 || p > d) throw ParameterError("pca_fit: p must lie in [0, d]");
    PcaResult out;
    out.p = p;
    out.gamma = static_cast<double>(p) / static_cast<double>(d);
    const Eigen::MatrixXd top = ascending_vectors.rightCols(p);
    out.projector = top * top.transpose();
    out.population_risk = ascending_values.head(d - p).cwiseMax(0.0).sum() / static_cast<double>(d);
    return out;
}

}  // namespace

PcaResult pca_fit(const CovarianceModel& reference, Eigen::Index p) {
    return pca_from_eigen(reference.eigenvalues().reverse(), reference.eigenvectors().rowwise().reverse(), p);
}

PcaResult pca_fit(const Dataset& reference, Eigen::Index p) {
    check_data(reference);
    const double inv_n = 1.0 / static_cast<double>(reference.n());
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(reference.d(), reference.d());
    S.selfadjointView<Eigen::Lower>().rankUpdate(reference.X.transpose(), inv_n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.compute(S.selfadjointView<Eigen::Lower>());
    if (es.info() != Eigen::Success) throw NumericError("pca_fit: eigendecomposition of the sample covariance failed");
    return pca_from_eigen(es.eigenvalues(), es.eigenvectors(), p);
}

namespace {

Eigen::MatrixXd symmetrized(const SsrEstimate& est) {
    if (!(est.Lambda_diag.minCoeff() > 0.0)) throw NumericError("rescaler has a nonpositive entry");
    const Eigen::VectorXd root = est.Lambda_diag.cwiseSqrt();
    return root.asDiagonal() * est.Q * root.asDiagonal();
}

}  // namespace

Eigen::VectorXd ssr_spectrum_empirical(const SsrEstimate& estimate) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(estimate), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("spectrum: symmetric eigensolve failed");
    // Ascending eigenvalues of the symmetrized resolvent give descending 1 - s.
    return (1.0 - es.eigenvalues().array()).reverse().matrix();
}

TopDirection ssr_top_direction(const SsrEstimate& estimate) {
    const Eigen::MatrixXd M = symmetrized(estimate);
    const Eigen::Index d = M.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("spectrum: symmetric eigensolve failed");
    TopDirection out;
    const double mu0 = es.eigenvalues()(0);
    const double mu1 = d > 1 ? es.eigenvalues()(1) : mu0 + 1.0;
    out.top_eigenvalue = 1.0 - mu0;
    out.second_eigenvalue = 1.0 - mu1;

    // Shifted inverse iteration for the eigenvector of the smallest eigenvalue.
    const double scale = std::max(std::abs(mu0), std::abs(es.eigenvalues()(d - 1)));
    const double shift = mu0 - std::max(1e-3 * (mu1 - mu0), 1e-11 * std::max(scale, 1.0));
    Eigen::MatrixXd shifted = M;
    shifted.diagonal().array() -= shift;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    Eigen::VectorXd u;
    if (llt.info() == Eigen::Success) {
        u = Eigen::VectorXd::Ones(d) / std::sqrt(static_cast<double>(d));
        for (int it = 0; it < 50; ++it) {
            Eigen::VectorXd next = llt.solve(u);
            next.normalize();
            const double change = std::min((next - u).norm(), (next + u).norm());
            u = std::move(next);
            if (change < 1e-12) break;
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(M);
        if (full.info() != Eigen::Success) throw NumericError("spectrum: symmetric eigensolve failed");
        u = full.eigenvectors().col(0);
    }
    // Right eigenvector of A_hat: Lambda^{-1/2} u.
    Eigen::VectorXd w = u.cwiseQuotient(estimate.Lambda_diag.cwiseSqrt());
    out.direction = w / w.norm();
    return out;
}

}  // namespace ssrlab
