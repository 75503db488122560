#pragma once
#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace ssrlab {

enum class CovarianceKind { Identity, Spiked, Toeplitz, PowerLawDiagonal, Custom };

std::string to_string(CovarianceKind kind);
CovarianceKind covariance_kind_from_string(const std::string& name);

struct SpikeSpec {
    enum class Mode { UniformSphere, Basis };
    Mode mode = Mode::UniformSphere;
    std::uint64_t seed = 0;
    Eigen::Index index = 0;
};

struct CovarianceSpec {
    CovarianceKind kind = CovarianceKind::Identity;
    Eigen::Index dim = 0;
    double theta = 0.0;   // Spiked strength
    SpikeSpec spike;      // Spiked direction
    double rho = 0.5;     // Toeplitz correlation
    double beta = 1.0;    // PowerLawDiagonal decay
    Eigen::MatrixXd custom;
};

// Immutable population covariance with its eigendecomposition.
// Copies share storage, so passing models by value is cheap.
class CovarianceModel {
public:
    CovarianceKind kind() const { return data_->spec.kind; }
    Eigen::Index dim() const { return data_->spec.dim; }
    const CovarianceSpec& spec() const { return data_->spec; }
    const Eigen::MatrixXd& dense() const { return data_->dense; }
    // Nonincreasing.
    const Eigen::VectorXd& eigenvalues() const { return data_->eigenvalues; }
    // Column j pairs with eigenvalues()(j).
    const Eigen::MatrixXd& eigenvectors() const { return data_->eigenvectors; }
    // Unit spike direction; empty for non-spiked models.
    const Eigen::VectorXd& spike_vector() const { return data_->spike; }
    double trace() const { return data_->dense.trace(); }
    // Identifier recorded alongside sampled datasets.
    const std::string& name() const { return data_->name; }
    // Symmetric square root, computed once and cached.
    const Eigen::MatrixXd& sqrt_matrix() const;

private:
    struct Data {
        CovarianceSpec spec;
        Eigen::MatrixXd dense;
        Eigen::VectorXd eigenvalues;
        Eigen::MatrixXd eigenvectors;
        Eigen::VectorXd spike;
        std::string name;
        mutable std::once_flag sqrt_once;
        mutable Eigen::MatrixXd sqrt;
    };
    std::shared_ptr<const Data> data_;

    friend CovarianceModel build_covariance(const CovarianceSpec&, std::optional<std::uint64_t>);
};

// The optional seed overrides spec.spike.seed for uniform-sphere spikes.
CovarianceModel build_covariance(const CovarianceSpec& spec, std::optional<std::uint64_t> seed = std::nullopt);

// Convenience constructors.
CovarianceModel identity_covariance(Eigen::Index d);
CovarianceModel toeplitz_covariance(Eigen::Index d, double rho);
CovarianceModel spiked_covariance(Eigen::Index d, double theta, const SpikeSpec& spike);
CovarianceModel power_law_covariance(Eigen::Index d, double beta);
CovarianceModel custom_covariance(const Eigen::MatrixXd& matrix);

// Uniformly distributed unit vector; a pure function of (d, seed).
Eigen::VectorXd uniform_sphere_vector(Eigen::Index d, std::uint64_t seed);

Eigen::MatrixXd covariance_sqrt(const CovarianceModel& model);

// Entries 1 / (Sigma^{-1})_kk, the conditional variance of coordinate k.
Eigen::VectorXd diag_precision_inverse(const CovarianceModel& model);

// Circulant approximation to the AR(1) spectrum at relative index x in [0, 1].
double ar1_eigendensity(double rho, double x);

}  // namespace ssrlab
