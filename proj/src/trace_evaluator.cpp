#include "trace_evaluator.hpp"

#include "ssrlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ssrlab {

namespace {

using Eigen::Index;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

class DiagonalTraces final : public TraceEvaluator {
public:
    DiagonalTraces(Eigen::VectorXd sigma, Eigen::VectorXd D, double lambda)
        : sigma_(std::move(sigma)), D_(std::move(D)), lambda_(lambda) {}

    void traces(cdouble w, cdouble c, cdouble& t1, cdouble& t0) const override {
        t1 = 0.0;
        t0 = 0.0;
        for (Index k = 0; k < sigma_.size(); ++k) {
            const cdouble inv = 1.0 / (w * D_(k) - lambda_ - c * sigma_(k));
            t1 += sigma_(k) * inv;
            t0 += inv;
        }
    }
    std::string name() const override { return "diagonal"; }

private:
    Eigen::VectorXd sigma_;
    Eigen::VectorXd D_;
    double lambda_;
};

// Sigma = s0 I + V diag(g) V^T with r = cols(V) small; M = B - c V diag(g) V^T
// with B diagonal. Woodbury on an r x r system.
class LowRankCovarianceTraces final : public TraceEvaluator {
public:
    LowRankCovarianceTraces(double s0, Eigen::MatrixXd V, Eigen::VectorXd g, Eigen::VectorXd D, double lambda)
        : s0_(s0), V_(std::move(V)), g_(std::move(g)), D_(std::move(D)), lambda_(lambda) {}

    void traces(cdouble w, cdouble c, cdouble& t1, cdouble& t0) const override {
        const Index d = D_.size();
        const Index r = V_.cols();
        CVector binv(d);
        for (Index k = 0; k < d; ++k) binv(k) = 1.0 / (w * D_(k) - lambda_ - c * s0_);
        t0 = binv.sum();
        if (r == 0) {
            t1 = s0_ * t0;
            return;
        }
        const CMatrix BV = binv.asDiagonal() * V_.cast<cdouble>();
        const CMatrix P = V_.transpose().cast<cdouble>() * BV;                 // V^T B^{-1} V
        const CMatrix P2 = BV.transpose() * BV;                                 // V^T B^{-2} V
        CMatrix K = -P;
        for (Index j = 0; j < r; ++j) K(j, j) += 1.0 / (c * g_(j));
        const Eigen::PartialPivLU<CMatrix> lu(K);
        // M^{-1} = B^{-1} + B^{-1} V K^{-1} V^T B^{-1}
        t0 += lu.solve(P2).trace();
        const CMatrix VMV = P + P * lu.solve(P);
        cdouble corr = 0.0;
        for (Index j = 0; j < r; ++j) corr += g_(j) * VMV(j, j);
        t1 = s0_ * t0 + corr;
    }
    std::string name() const override { return "low_rank_covariance"; }

private:
    double s0_;
    Eigen::MatrixXd V_;
    Eigen::VectorXd g_;
    Eigen::VectorXd D_;
    double lambda_;
};

// D = d0 I + sum_{k in T} delta_k e_k e_k^T with |T| small. In the eigenbasis
// of Sigma the base part is diagonal, a_i = w d0 - lambda - c s_i.
class SparseRescalerTraces final : public TraceEvaluator {
public:
    SparseRescalerTraces(Eigen::VectorXd s, Eigen::MatrixXd Ur, Eigen::VectorXd delta, double d0, double lambda)
        : s_(std::move(s)), Ur_(std::move(Ur)), delta_(std::move(delta)), d0_(d0), lambda_(lambda) {}

    void traces(cdouble w, cdouble c, cdouble& t1, cdouble& t0) const override {
        const Index d = s_.size();
        const Index t = Ur_.rows();
        CVector ainv(d);
        for (Index i = 0; i < d; ++i) ainv(i) = 1.0 / (w * d0_ - lambda_ - c * s_(i));
        t0 = ainv.sum();
        t1 = (s_.cast<cdouble>().array() * ainv.array()).sum();
        if (t == 0) return;
        const CVector a2 = ainv.array().square();
        const CVector s_a2 = s_.cast<cdouble>().array() * a2.array();
        CMatrix W = weighted_gram(ainv);
        for (Index j = 0; j < t; ++j) W(j, j) += 1.0 / (w * delta_(j));
        const Eigen::PartialPivLU<CMatrix> lu(W);
        t1 -= lu.solve(weighted_gram(s_a2)).trace();
        t0 -= lu.solve(weighted_gram(a2)).trace();
    }
    std::string name() const override { return "sparse_rescaler"; }

private:
    // Ur diag(x) Ur^T through two real products.
    CMatrix weighted_gram(const CVector& x) const {
        const Eigen::MatrixXd re = Ur_ * x.real().asDiagonal() * Ur_.transpose();
        const Eigen::MatrixXd im = Ur_ * x.imag().asDiagonal() * Ur_.transpose();
        CMatrix out(re.rows(), re.cols());
        out.real() = re;
        out.imag() = im;
        return out;
    }

    Eigen::VectorXd s_;
    Eigen::MatrixXd Ur_;
    Eigen::VectorXd delta_;
    double d0_;
    double lambda_;
};

class DenseTraces final : public TraceEvaluator {
public:
    DenseTraces(Eigen::MatrixXd sigma, Eigen::VectorXd D, double lambda)
        : sigma_(std::move(sigma)), D_(std::move(D)), lambda_(lambda) {}

    void traces(cdouble w, cdouble c, cdouble& t1, cdouble& t0) const override {
        const Index d = D_.size();
        CMatrix M = -c * sigma_.cast<cdouble>();
        for (Index k = 0; k < d; ++k) M(k, k) += w * D_(k) - lambda_;
        const CMatrix Minv = M.partialPivLu().inverse();
        t0 = Minv.trace();
        // M is complex symmetric, so Tr(Sigma M^{-1}) is an entrywise sum.
        t1 = (sigma_.cast<cdouble>().array() * Minv.array()).sum();
    }
    std::string name() const override { return "dense"; }

private:
    Eigen::MatrixXd sigma_;
    Eigen::VectorXd D_;
    double lambda_;
};

double median(Eigen::VectorXd v) {
    std::vector<double> x(v.data(), v.data() + v.size());
    const auto mid = x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2);
    std::nth_element(x.begin(), mid, x.end());
    return *mid;
}

}  // namespace

std::shared_ptr<const TraceEvaluator> make_trace_evaluator(const CovarianceModel& model, const Eigen::VectorXd& D,
                                                          double lambda) {
    const Index d = model.dim();
    const Eigen::MatrixXd& sigma = model.dense();
    const Eigen::VectorXd& s = model.eigenvalues();
    const double scale = std::max(s(0), 1e-300);

    const Eigen::MatrixXd off = sigma - Eigen::MatrixXd(sigma.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() == 0.0)
        return std::make_shared<DiagonalTraces>(sigma.diagonal(), D, lambda);

    const Index max_rank = std::max<Index>(1, d / 8);

    const double s0 = median(s);
    std::vector<Index> deviating;
    for (Index j = 0; j < d; ++j)
        if (std::abs(s(j) - s0) > 1e-12 * scale) deviating.push_back(j);
    if (static_cast<Index>(deviating.size()) <= max_rank) {
        const Index r = static_cast<Index>(deviating.size());
        Eigen::MatrixXd V(d, r);
        Eigen::VectorXd g(r);
        for (Index j = 0; j < r; ++j) {
            V.col(j) = model.eigenvectors().col(deviating[static_cast<std::size_t>(j)]);
            g(j) = s(deviating[static_cast<std::size_t>(j)]) - s0;
        }
        return std::make_shared<LowRankCovarianceTraces>(s0, std::move(V), std::move(g), D, lambda);
    }

    const double d0 = median(D);
    std::vector<Index> support;
    for (Index k = 0; k < d; ++k)
        if (std::abs(D(k) - d0) > 1e-13 * d0) support.push_back(k);
    if (static_cast<Index>(support.size()) <= max_rank) {
        const Index t = static_cast<Index>(support.size());
        Eigen::MatrixXd Ur(t, d);
        Eigen::VectorXd delta(t);
        for (Index j = 0; j < t; ++j) {
            const Index k = support[static_cast<std::size_t>(j)];
            Ur.row(j) = model.eigenvectors().row(k);
            delta(j) = D(k) - d0;
        }
        return std::make_shared<SparseRescalerTraces>(s, std::move(Ur), std::move(delta), d0, lambda);
    }

    return std::make_shared<DenseTraces>(sigma, D, lambda);
}

}  // namespace ssrlab
