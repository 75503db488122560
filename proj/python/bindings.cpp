#include "ssrlab/asymptotics.hpp"
#include "ssrlab/config.hpp"
#include "ssrlab/covariance.hpp"
#include "ssrlab/errors.hpp"
#include "ssrlab/experiment.hpp"
#include "ssrlab/fixed_point.hpp"
#include "ssrlab/ssr.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ssrlab;

namespace {

CovarianceModel make_covariance(const std::string& kind, Eigen::Index dim, double theta, double rho, double beta,
                                const std::string& spike_mode, std::uint64_t spike_seed, Eigen::Index spike_index,
                                std::optional<Eigen::MatrixXd> matrix) {
    CovarianceSpec spec;
    spec.kind = covariance_kind_from_string(kind);
    spec.dim = dim;
    spec.theta = theta;
    spec.rho = rho;
    spec.beta = beta;
    spec.spike.mode = spike_mode == "basis" ? SpikeSpec::Mode::Basis : SpikeSpec::Mode::UniformSphere;
    spec.spike.seed = spike_seed;
    spec.spike.index = spike_index;
    if (matrix) {
        spec.custom = *matrix;
        spec.dim = matrix->rows();
    }
    return build_covariance(spec);
}

py::dict risk_dict(const RiskPrediction& p) {
    py::dict d;
    d["n"] = p.n;
    d["d"] = p.d;
    d["lambda"] = p.lambda;
    d["kappa"] = p.kappa;
    d["df1"] = p.df1;
    d["df2"] = p.df2;
    d["L1"] = p.L1;
    d["gen_error"] = p.gen_error;
    d["train_error"] = p.train_error;
    d["divergent"] = p.divergent;
    d["ridgeless_excess"] = p.ridgeless_excess;
    return d;
}

}  // namespace

PYBIND11_MODULE(_ssrlab, m) {
    m.doc() = "Masked self-supervised ridge estimator: closed form, deterministic equivalents, experiments";
    m.attr("__version__") = SSRLAB_VERSION;

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<CovarianceModel>(m, "Covariance")
        .def_property_readonly("kind", [](const CovarianceModel& c) { return to_string(c.kind()); })
        .def_property_readonly("dim", &CovarianceModel::dim)
        .def_property_readonly("name", &CovarianceModel::name)
        .def_property_readonly("matrix", &CovarianceModel::dense)
        .def_property_readonly("eigenvalues", &CovarianceModel::eigenvalues)
        .def_property_readonly("spike_vector", &CovarianceModel::spike_vector)
        .def("__repr__", [](const CovarianceModel& c) { return "<Covariance " + c.name() + ">"; });

    m.def("covariance", &make_covariance, py::arg("kind"), py::arg("dim") = 0, py::arg("theta") = 0.0,
          py::arg("rho") = 0.5, py::arg("beta") = 1.0, py::arg("spike_mode") = "uniform_sphere",
          py::arg("spike_seed") = 0, py::arg("spike_index") = 0, py::arg("matrix") = py::none(),
          "Population covariance: identity, spiked, toeplitz, power_law or custom (pass matrix).");

    m.def(
        "sample",
        [](const CovarianceModel& model, Eigen::Index n, std::uint64_t seed, const std::string& entries) {
            return sample_dataset(model, n, seed, entry_distribution_from_string(entries)).X;
        },
        py::arg("model"), py::arg("n"), py::arg("seed"), py::arg("entries") = "gaussian",
        "n x d sample matrix X = Z Sigma^{1/2}.");

    m.def(
        "fit_ssr",
        [](const Eigen::MatrixXd& X, double lambda) { return fit_ssr(make_dataset(X), lambda).A_hat; },
        py::arg("X"), py::arg("lam"), "Closed-form zero-diagonal ridge estimator.");
    m.def(
        "fit_ssr_coordinatewise",
        [](const Eigen::MatrixXd& X, double lambda) { return fit_ssr_coordinatewise(make_dataset(X), lambda).A_hat; },
        py::arg("X"), py::arg("lam"), "Column-by-column ridge reference.");
    m.def(
        "spectrum",
        [](const Eigen::MatrixXd& X, double lambda) { return ssr_spectrum_empirical(fit_ssr(make_dataset(X), lambda)); },
        py::arg("X"), py::arg("lam"), "Eigenvalues of the fitted matrix, ascending.");
    m.def("population_risk", &population_risk, py::arg("A"), py::arg("model"));

    m.def(
        "solve_kappa",
        [](const CovarianceModel& model, Eigen::Index n, double lambda) {
            const FixedPointSolution s = solve_kappa(model, n, lambda);
            py::dict d;
            d["kappa"] = s.kappa;
            d["m_tilde"] = s.m_tilde;
            d["nu"] = s.nu;
            d["residual"] = s.residual;
            d["iterations"] = s.iterations;
            d["method"] = to_string(s.method);
            return d;
        },
        py::arg("model"), py::arg("n"), py::arg("lam"));
    m.def(
        "predict_risk", [](const CovarianceModel& model, Eigen::Index n, double lambda) {
            return risk_dict(predict_risk(model, n, lambda));
        },
        py::arg("model"), py::arg("n"), py::arg("lam"));
    m.def(
        "predicted_density",
        [](const CovarianceModel& model, Eigen::Index n, double lambda, const std::vector<double>& grid, double eta) {
            const SpectralModel s = predicted_spectral_density(model, n, lambda, grid, eta > 0.0 ? eta : default_eta(grid));
            py::dict d;
            d["grid"] = s.grid;
            d["density"] = s.density;
            d["mass"] = s.mass;
            d["support"] = s.support_estimate;
            d["warnings"] = s.warnings;
            return d;
        },
        py::arg("model"), py::arg("n"), py::arg("lam"), py::arg("grid"), py::arg("eta") = 0.0);
    m.def("universal_support", &universal_support, py::arg("alpha"));
    m.def(
        "bbp_prediction",
        [](double alpha, double theta) {
            const SpikedAnalysis a = bbp_prediction(alpha, theta);
            py::dict d;
            d["theta_c"] = a.theta_c;
            d["top"] = a.s1;
            d["second"] = a.s2;
            return d;
        },
        py::arg("alpha"), py::arg("theta"));
    m.def("ar1_phase_boundary", &ar1_phase_boundary, py::arg("rho"));
    m.def("ar1_population_ssr_loss", &ar1_population_ssr_loss, py::arg("rho"), py::arg("lam"));
    m.def("ar1_pca_population_loss", &ar1_pca_population_loss, py::arg("rho"), py::arg("gamma"));

    m.def(
        "run_json",
        [](const std::string& config, const std::string& subcommand) {
            const RunConfig cfg = parse_run_config(nlohmann::json::parse(config), subcommand);
            const ExperimentReport report = run_experiment(cfg.experiment);
            return report_to_json(report, run_config_to_json(cfg)).dump();
        },
        py::arg("config"), py::arg("subcommand") = "simulate",
        "Runs a Monte Carlo comparison from a JSON config and returns the report as JSON text.");
}
