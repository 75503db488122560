#include "ssrlab/covariance.hpp"

#include "ssrlab/errors.hpp"
#include "ssrlab/io.hpp"
#include "ssrlab/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace ssrlab {

std::string to_string(CovarianceKind kind) {
    switch (kind) {
        case CovarianceKind::Identity: return "identity";
        case CovarianceKind::Spiked: return "spiked";
        case CovarianceKind::Toeplitz: return "toeplitz";
        case CovarianceKind::PowerLawDiagonal: return "power_law";
        case CovarianceKind::Custom: return "custom";
    }
    return "unknown";
}

CovarianceKind covariance_kind_from_string(const std::string& name) {
    if (name == "identity") return CovarianceKind::Identity;
    if (name == "spiked") return CovarianceKind::Spiked;
    if (name == "toeplitz") return CovarianceKind::Toeplitz;
    if (name == "power_law") return CovarianceKind::PowerLawDiagonal;
    if (name == "custom") return CovarianceKind::Custom;
    throw ParameterError("unknown covariance kind '" + name + "'");
}

Eigen::VectorXd uniform_sphere_vector(Eigen::Index d, std::uint64_t seed) {
    if (d < 1) throw ParameterError("uniform_sphere_vector: dimension must be positive");
    const CounterStream stream(derive_seed(seed, 0x5b1e, static_cast<std::uint64_t>(d)));
    Eigen::VectorXd v(d);
    for (Eigen::Index k = 0; k < d; ++k) v(k) = stream.normal(static_cast<std::uint64_t>(k));
    return v / v.norm();
}

namespace {

void check_spec(const CovarianceSpec& spec) {
    if (spec.kind != CovarianceKind::Custom && spec.dim < 2)
        throw ParameterError("covariance dimension must be at least 2, got " + std::to_string(spec.dim));
    switch (spec.kind) {
        case CovarianceKind::Spiked:
            if (!(spec.theta >= 0.0) || !std::isfinite(spec.theta))
                throw ParameterError("spike strength theta must be a finite nonnegative number");
            if (spec.spike.mode == SpikeSpec::Mode::Basis &&
                (spec.spike.index < 0 || spec.spike.index >= spec.dim))
                throw ParameterError("spike basis index out of range");
            break;
        case CovarianceKind::Toeplitz:
            if (!(spec.rho > 0.0 && spec.rho < 1.0))
                throw ParameterError("Toeplitz rho must lie in (0, 1), got " + std::to_string(spec.rho));
            break;
        case CovarianceKind::PowerLawDiagonal:
            if (!(spec.beta > 0.0) || !std::isfinite(spec.beta))
                throw ParameterError("power-law beta must be positive, got " + std::to_string(spec.beta));
            break;
        case CovarianceKind::Custom:
            if (spec.custom.rows() != spec.custom.cols())
                throw ParameterError("custom covariance must be square");
            if (spec.custom.rows() < 2) throw ParameterError("custom covariance dimension must be at least 2");
            if (!spec.custom.allFinite()) throw ParameterError("custom covariance has non-finite entries");
            break;
        case CovarianceKind::Identity: break;
    }
}

std::string describe(const CovarianceSpec& spec) {
    std::ostringstream os;
    os << to_string(spec.kind) << "(d=" << spec.dim;
    switch (spec.kind) {
        case CovarianceKind::Spiked:
            os << ",theta=" << format_double(spec.theta);
            if (spec.spike.mode == SpikeSpec::Mode::Basis) os << ",spike=basis:" << spec.spike.index;
            else os << ",spike=sphere:" << spec.spike.seed;
            break;
        case CovarianceKind::Toeplitz: os << ",rho=" << format_double(spec.rho); break;
        case CovarianceKind::PowerLawDiagonal: os << ",beta=" << format_double(spec.beta); break;
        default: break;
    }
    os << ")";
    return os.str();
}

}  // namespace

CovarianceModel build_covariance(const CovarianceSpec& input, std::optional<std::uint64_t> seed) {
    CovarianceSpec spec = input;
    if (spec.kind == CovarianceKind::Custom) spec.dim = spec.custom.rows();
    if (seed) spec.spike.seed = *seed;
    check_spec(spec);

    auto data = std::make_shared<CovarianceModel::Data>();
    const Eigen::Index d = spec.dim;
    Eigen::MatrixXd& S = data->dense;

    switch (spec.kind) {
        case CovarianceKind::Identity: S = Eigen::MatrixXd::Identity(d, d); break;
        case CovarianceKind::Spiked: {
            Eigen::VectorXd v;
            if (spec.spike.mode == SpikeSpec::Mode::Basis) {
                v = Eigen::VectorXd::Unit(d, spec.spike.index);
            } else {
                v = uniform_sphere_vector(d, spec.spike.seed);
            }
            S = Eigen::MatrixXd::Identity(d, d);
            S.noalias() += spec.theta * v * v.transpose();
            data->spike = std::move(v);
            break;
        }
        case CovarianceKind::Toeplitz:
            S.resize(d, d);
            for (Eigen::Index j = 0; j < d; ++j)
                for (Eigen::Index k = 0; k < d; ++k) S(j, k) = std::pow(spec.rho, static_cast<double>(std::abs(j - k)));
            break;
        case CovarianceKind::PowerLawDiagonal: {
            Eigen::VectorXd diag(d);
            for (Eigen::Index k = 0; k < d; ++k) diag(k) = std::pow(static_cast<double>(k + 1), -spec.beta);
            diag /= diag.sum();
            S = diag.asDiagonal();
            break;
        }
        case CovarianceKind::Custom: {
            const double scale = spec.custom.cwiseAbs().maxCoeff();
            const double asym = (spec.custom - spec.custom.transpose()).cwiseAbs().maxCoeff();
            if (asym > 1e-10 * std::max(scale, 1e-300))
                throw ParameterError("custom covariance is not symmetric (max asymmetry " + std::to_string(asym) + ")");
            S = 0.5 * (spec.custom + spec.custom.transpose());
            break;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success)
        throw NumericError("eigendecomposition of " + describe(spec) + " failed");
    // Solver output is ascending; store nonincreasing.
    data->eigenvalues = es.eigenvalues().reverse();
    data->eigenvectors = es.eigenvectors().rowwise().reverse();

    const double norm = std::max(std::abs(data->eigenvalues(0)), std::abs(data->eigenvalues(d - 1)));
    const double min_eig = data->eigenvalues(d - 1);
    if (min_eig < -1e-10 * norm) {
        std::ostringstream os;
        os << "covariance " << describe(spec) << " is not positive semidefinite: min eigenvalue " << min_eig
           << " below tolerance " << -1e-10 * norm;
        throw DefinitenessError(os.str(), min_eig);
    }
    if (min_eig < 0.0) {
        data->eigenvalues = data->eigenvalues.cwiseMax(0.0);
        S = data->eigenvectors * data->eigenvalues.asDiagonal() * data->eigenvectors.transpose();
        S = 0.5 * (S + S.transpose()).eval();
    }

    data->spec = std::move(spec);
    data->name = describe(data->spec);
    CovarianceModel model;
    model.data_ = std::move(data);
    return model;
}

const Eigen::MatrixXd& CovarianceModel::sqrt_matrix() const {
    std::call_once(data_->sqrt_once, [this] {
        const Eigen::VectorXd root = data_->eigenvalues.cwiseMax(0.0).cwiseSqrt();
        Eigen::MatrixXd S = data_->eigenvectors * root.asDiagonal() * data_->eigenvectors.transpose();
        data_->sqrt = 0.5 * (S + S.transpose());
    });
    return data_->sqrt;
}

CovarianceModel identity_covariance(Eigen::Index d) {
    CovarianceSpec spec;
    spec.kind = CovarianceKind::Identity;
    spec.dim = d;
    return build_covariance(spec);
}

CovarianceModel toeplitz_covariance(Eigen::Index d, double rho) {
    CovarianceSpec spec;
    spec.kind = CovarianceKind::Toeplitz;
    spec.dim = d;
    spec.rho = rho;
    return build_covariance(spec);
}

CovarianceModel spiked_covariance(Eigen::Index d, double theta, const SpikeSpec& spike) {
    CovarianceSpec spec;
    spec.kind = CovarianceKind::Spiked;
    spec.dim = d;
    spec.theta = theta;
    spec.spike = spike;
    return build_covariance(spec);
}

CovarianceModel power_law_covariance(Eigen::Index d, double beta) {
    CovarianceSpec spec;
    spec.kind = CovarianceKind::PowerLawDiagonal;
    spec.dim = d;
    spec.beta = beta;
    return build_covariance(spec);
}

CovarianceModel custom_covariance(const Eigen::MatrixXd& matrix) {
    CovarianceSpec spec;
    spec.kind = CovarianceKind::Custom;
    spec.custom = matrix;
    return build_covariance(spec);
}

Eigen::MatrixXd covariance_sqrt(const CovarianceModel& model) { return model.sqrt_matrix(); }

Eigen::VectorXd diag_precision_inverse(const CovarianceModel& model) {
    const Eigen::VectorXd& s = model.eigenvalues();
    const Eigen::Index d = model.dim();
    const double smallest = s(d - 1);
    if (!(smallest > 1e-14 * std::max(s(0), 1e-300))) {
        std::ostringstream os;
        os << "covariance " << model.name() << " is singular: smallest eigenvalue " << smallest;
        throw DefinitenessError(os.str(), smallest);
    }
    const Eigen::VectorXd inv = s.cwiseInverse();
    const Eigen::VectorXd precision_diag = model.eigenvectors().cwiseAbs2() * inv;
    Eigen::VectorXd out = precision_diag.cwiseInverse();
    // Rounding can push the ratio a hair above the marginal variance.
    return out.cwiseMin(model.dense().diagonal());
}

double ar1_eigendensity(double rho, double x) {
    if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("ar1_eigendensity: rho must lie in [0, 1)");
    if (!(x >= 0.0 && x <= 1.0)) throw ParameterError("ar1_eigendensity: x must lie in [0, 1]");
    return (1.0 - rho * rho) / (1.0 + rho * rho - 2.0 * rho * std::cos(std::numbers::pi * x));
}

}  // namespace ssrlab
