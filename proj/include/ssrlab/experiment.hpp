#pragma once
#include "ssrlab/asymptotics.hpp"
#include "ssrlab/covariance.hpp"
#include "ssrlab/ssr.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ssrlab {

enum class Comparison { Risk, TrainRisk, Spectrum, Bbp, PcaCompare };

std::string to_string(Comparison c);
Comparison comparison_from_string(const std::string& name);

struct ExperimentConfig {
    CovarianceSpec model;
    std::vector<double> alphas;          // n = round(alpha d)
    std::vector<Eigen::Index> ns;        // used instead of alphas when nonempty
    double lambda = 1e-4;
    int trials = 20;
    std::uint64_t master_seed = 0;
    EntryDistribution entry_dist = EntryDistribution::Gaussian;
    Comparison comparison = Comparison::Risk;

    // Spectrum
    int bins = 100;
    double eta = 0.0;                    // 0 selects 1e-3 x grid span
    int density_points = 1000;
    double w1_tolerance = 0.05;

    // Risk
    double rel_tolerance = 0.05;
    double peak_rel_tolerance = 0.15;    // for the two grid points nearest alpha = 1

    // Bbp
    std::vector<double> thetas;
    double outlier_margin = 0.02;
    double transition_tolerance = 0.06;

    // PcaCompare
    std::vector<Eigen::Index> ps;
    std::vector<double> gammas;          // population-limit mode with fixed_n
    Eigen::Index fixed_n = 0;

    int threads = 1;

    // Throws ParameterError naming the offending field.
    void validate() const;
    std::vector<Eigen::Index> sample_sizes() const;
};

struct Record {
    double grid_value = 0.0;
    std::string metric;
    double predicted = 0.0;
    double empirical_mean = 0.0;
    double empirical_std = 0.0;
    int trials = 0;
    int excluded = 0;
    double distance = 0.0;               // relative error or W1, per metric
    std::string verdict;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> flags;
};

struct Curve {
    std::string name;
    double grid_value = 0.0;
    std::vector<double> x;
    std::vector<double> y;
};

struct ExperimentReport {
    Comparison comparison = Comparison::Risk;
    std::string sigma_ref;
    std::vector<Record> records;
    std::vector<Curve> curves;
    std::vector<std::pair<std::string, double>> summary;
    std::vector<std::string> notes;
};

// X = Z Sigma^{1/2}; Z entry (i, k) is draw i*d + k of the seeded stream.
Dataset sample_dataset(const CovarianceModel& model, Eigen::Index n, std::uint64_t seed,
                       EntryDistribution entry_dist = EntryDistribution::Gaussian);

ExperimentReport run_risk_experiment(const ExperimentConfig& config);
ExperimentReport run_spectrum_experiment(const ExperimentConfig& config);
ExperimentReport run_bbp_sweep(const ExperimentConfig& config);
ExperimentReport run_pca_comparison(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

// Histogram normalized to unit integral over [lo, hi].
struct Histogram {
    std::vector<double> edges;
    std::vector<double> density;
};
Histogram normalized_histogram(const std::vector<double>& samples, int bins, double lo, double hi);

// Wasserstein-1 distance between the empirical law of the samples and the
// density on its grid (renormalized to unit mass). With exclude_atoms, each
// atom window of the model is removed from the density and the atom's share
// of the mass is removed from the samples closest to its location.
double wasserstein1(std::vector<double> samples, const SpectralModel& density, bool exclude_atoms = false);
// Between two empirical laws.
double wasserstein1(std::vector<double> a, std::vector<double> b);

double mean(const std::vector<double>& v);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(const std::vector<double>& v);

}  // namespace ssrlab
