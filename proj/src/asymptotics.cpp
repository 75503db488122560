#include "ssrlab/asymptotics.hpp"

#include "ssrlab/errors.hpp"
#include "ssrlab/parallel.hpp"
#include "ssrlab/ssr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace ssrlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

void check_common(Eigen::Index n, double lambda) {
    if (n < 1) throw ParameterError("sample size n must be at least 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be positive and finite");
}

// U diag(w) U^T for the covariance eigenbasis.
Eigen::MatrixXd spectral_function(const CovarianceModel& model, const Eigen::VectorXd& w) {
    const Eigen::MatrixXd& U = model.eigenvectors();
    return U * w.asDiagonal() * U.transpose();
}

// diag(U diag(w) U^T) without forming the product.
Eigen::VectorXd spectral_diagonal(const CovarianceModel& model, const Eigen::VectorXd& w) {
    return model.eigenvectors().cwiseAbs2() * w;
}

void check_square(const Eigen::MatrixXd& A, Eigen::Index d, const char* name) {
    if (A.rows() != d || A.cols() != d) {
        std::ostringstream os;
        os << "resolvent_trace_equivalent: " << name << " is " << A.rows() << "x" << A.cols() << ", expected " << d
           << "x" << d;
        throw ParameterError(os.str());
    }
}

}  // namespace

double resolvent_trace_equivalent(const Eigen::MatrixXd& A, const CovarianceModel& model, Eigen::Index n,
                                  double lambda) {
    check_common(n, lambda);
    check_square(A, model.dim(), "A");
    const double kappa = solve_kappa(model, n, lambda).kappa;
    const Eigen::VectorXd w = (model.eigenvalues().array() + kappa).inverse().matrix();
    const Eigen::MatrixXd Qbar = spectral_function(model, w);
    return kappa / lambda * A.cwiseProduct(Qbar.transpose()).sum();
}

double resolvent_trace_equivalent(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const CovarianceModel& model,
                                  Eigen::Index n, double lambda) {
    check_common(n, lambda);
    check_square(A, model.dim(), "A");
    check_square(B, model.dim(), "B");
    const double kappa = solve_kappa(model, n, lambda).kappa;
    const Eigen::VectorXd& s = model.eigenvalues();
    const DegreesOfFreedom df = degrees_of_freedom(model, kappa);
    if (!(df.df2 < static_cast<double>(n))) {
        std::ostringstream os;
        os << "resolvent_trace_equivalent: df2 = " << df.df2 << " is not below n = " << n;
        throw PoleError(os.str());
    }
    const Eigen::VectorXd w = (s.array() + kappa).inverse().matrix();
    const Eigen::MatrixXd Qbar = spectral_function(model, w);
    const Eigen::MatrixXd QSQ = spectral_function(model, (s.array() * w.array().square()).matrix());
    const Eigen::MatrixXd AQ = A * Qbar;
    const Eigen::MatrixXd BQ = B * Qbar;
    const double quad = AQ.cwiseProduct(BQ.transpose()).sum();
    const double ta = A.cwiseProduct(QSQ.transpose()).sum();
    const double tb = B.cwiseProduct(QSQ.transpose()).sum();
    const double ratio = kappa / lambda;
    return ratio * ratio * (quad + ta * tb / (static_cast<double>(n) - df.df2));
}

RiskPrediction predict_risk(const CovarianceModel& model, Eigen::Index n, double lambda) {
    check_common(n, lambda);
    RiskPrediction out;
    out.n = n;
    out.d = model.dim();
    out.lambda = lambda;
    const double d = static_cast<double>(model.dim());
    const double nn = static_cast<double>(n);
    const DbarVectors dbar = dbar_vectors(model, n, lambda);
    const double kappa = dbar.kappa;
    out.kappa = kappa;
    const DegreesOfFreedom df = degrees_of_freedom(model, kappa);
    out.df1 = df.df1;
    out.df2 = df.df2;

    const Eigen::VectorXd& s = model.eigenvalues();
    const Eigen::ArrayXd w = (s.array() + kappa).inverse();
    const Eigen::VectorXd diag_Q = spectral_diagonal(model, w.matrix());
    const Eigen::VectorXd diag_Q2 = spectral_diagonal(model, w.square().matrix());
    const Eigen::VectorXd diag_Q2S = spectral_diagonal(model, (s.array() * w.square()).matrix());
    const double tr_Q2S = (s.array() * w.square()).sum();

    const Eigen::ArrayXd risk2 = dbar.d_risk.array().square();
    const Eigen::ArrayXd spec2 = dbar.d_spec.array().square();
    out.L1 = (risk2 * diag_Q2S.array()).sum() / d;
    out.Lbar1 = (spec2 * diag_Q.array()).sum();
    out.Lbar2 = (spec2 * diag_Q2.array()).sum();
    out.Lbar3 = (spec2 * diag_Q2S.array()).sum() * tr_Q2S;

    const double alpha = nn / d;
    out.ridgeless_excess = alpha > 1.0 ? diag_precision_inverse(model).mean() / (alpha - 1.0)
                                       : std::numeric_limits<double>::quiet_NaN();

    if (df.df2 >= 0.99 * nn) {
        out.divergent = true;
        out.gen_error = kInf;
        out.train_error = kInf;
        return out;
    }
    const double gap = nn - df.df2;
    out.gen_error = out.L1 * (1.0 + df.df2 / gap);
    const double scale = kappa / (lambda * d);
    out.train_error = scale * out.Lbar1 - scale * kappa * out.Lbar2 - scale * kappa * out.Lbar3 / gap;
    out.train_error = std::max(out.train_error, 0.0);
    return out;
}

RiskPrediction predict_gen_error(const CovarianceModel& model, Eigen::Index n, double lambda) {
    return predict_risk(model, n, lambda);
}

RiskPrediction predict_train_error(const CovarianceModel& model, Eigen::Index n, double lambda) {
    return predict_risk(model, n, lambda);
}

std::vector<double> padded_grid(double lo, double hi, int points, double pad) {
    if (points < 2) throw ParameterError("grid needs at least 2 points");
    if (!(hi > lo)) {
        const double c = 0.5 * (lo + hi);
        const double h = std::max(1e-3, 1e-3 * std::abs(c));
        lo = c - h;
        hi = c + h;
    }
    const double span = hi - lo;
    lo -= pad * span;
    hi += pad * span;
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    return grid;
}

double default_eta(const std::vector<double>& grid) {
    if (grid.size() < 2) throw ParameterError("grid needs at least 2 points");
    return 1e-3 * (grid.back() - grid.front());
}

double density_mass(const std::vector<double>& grid, const std::vector<double>& density) {
    double mass = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        mass += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    return mass;
}

namespace {

std::pair<double, double> support_of(const std::vector<double>& grid, const std::vector<double>& density) {
    const double peak = *std::max_element(density.begin(), density.end());
    std::size_t lo = 0, hi = 0;
    bool found = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (density[i] > 1e-3 * peak) {
            if (!found) lo = i;
            hi = i;
            found = true;
        }
    }
    if (!found) return {grid.front(), grid.back()};
    return {grid[lo], grid[hi]};
}

// Local maxima whose half-maximum run spans at most two grid intervals are
// Lorentzians of width eta that the grid cannot integrate. Each is re-solved
// on a sub-grid of spacing eta / 4 over a window of two extra cells per side.
void refine_unresolved_peaks(const ChiSolver& solver, SpectralModel& out) {
    const std::vector<double>& x = out.grid;
    const std::vector<double>& f = out.density;
    const std::size_t m = x.size();
    for (std::size_t i = 0; i < m; ++i) {
        const bool left_ok = i == 0 || f[i] >= f[i - 1];
        const bool right_ok = i + 1 == m || f[i] > f[i + 1];
        if (!(left_ok && right_ok) || !(f[i] > 0.0)) continue;
        std::size_t a = i, b = i;
        while (a > 0 && f[a - 1] > 0.5 * f[i]) --a;
        while (b + 1 < m && f[b + 1] > 0.5 * f[i]) ++b;
        if (b - a > 2) continue;
        const std::size_t lo = a >= 2 ? a - 2 : 0;
        const std::size_t hi = std::min(m - 1, b + 2);
        if (hi == lo) continue;
        const double step = 0.25 * out.eta;
        const auto pieces = static_cast<std::size_t>(std::ceil((x[hi] - x[lo]) / step));
        double fine_mass = 0.0, previous_x = x[lo], previous_f = f[lo];
        double peak_x = x[i], peak_f = 0.0;
        bool have_chi = false;
        cdouble chi = 0.0;
        for (std::size_t k = 1; k <= pieces; ++k) {
            const double t = k == pieces ? x[hi] : x[lo] + static_cast<double>(k) * (x[hi] - x[lo]) / static_cast<double>(pieces);
            const cdouble z(1.0 - t, out.eta);
            const ChiSolution sol = have_chi ? solver.solve(z, chi) : solver.solve_from_above(z);
            double ft = previous_f;
            if (sol.converged) {
                ft = std::max(0.0, sol.trace_G.imag() / kPi);
                chi = sol.chi;
                have_chi = true;
            } else {
                have_chi = false;
            }
            fine_mass += 0.5 * (ft + previous_f) * (t - previous_x);
            if (ft > peak_f) {
                peak_f = ft;
                peak_x = t;
            }
            previous_x = t;
            previous_f = ft;
        }
        double coarse_mass = 0.0;
        for (std::size_t k = lo + 1; k <= hi; ++k) coarse_mass += 0.5 * (f[k] + f[k - 1]) * (x[k] - x[k - 1]);
        out.mass += fine_mass - coarse_mass;
        // Mass of the whole Lorentzian, tails outside the window included.
        const double coverage = (std::atan((x[hi] - peak_x) / out.eta) + std::atan((peak_x - x[lo]) / out.eta)) / kPi;
        out.atoms.push_back({peak_x, x[lo], x[hi], fine_mass / coverage});
        i = hi;
    }
}

void check_grid(const std::vector<double>& grid) {
    if (grid.size() < 2) throw ParameterError("density grid needs at least 2 points");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ParameterError("density grid must be strictly increasing");
}

}  // namespace

SpectralModel predicted_spectral_density(const CovarianceModel& model, Eigen::Index n, double lambda,
                                         const std::vector<double>& grid, double eta, int threads) {
    check_common(n, lambda);
    check_grid(grid);
    if (!(eta > 0.0)) throw ParameterError("Stieltjes offset eta must be positive");
    const ChiSolver solver(model, n, lambda);

    const std::size_t m = grid.size();
    SpectralModel out;
    out.grid = grid;
    out.eta = eta;
    out.density.assign(m, 0.0);
    out.chi_trace.assign(m, cdouble(0.0, 0.0));
    out.flagged.assign(m, false);

    constexpr std::size_t kBlock = 64;
    const std::size_t blocks = (m + kBlock - 1) / kBlock;
    parallel_for(blocks, threads, [&](std::size_t b) {
        const std::size_t begin = b * kBlock;
        const std::size_t end = std::min(m, begin + kBlock);
        bool have_previous = false;
        cdouble previous = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const cdouble z(1.0 - grid[i], eta);
            ChiSolution sol = have_previous ? solver.solve(z, previous) : solver.solve_from_above(z);
            if (!sol.converged || !(sol.trace_G.imag() >= -1e-12 * std::max(1.0, std::abs(sol.trace_G)))) {
                sol = solver.solve(z);
            }
            if (!sol.converged) {
                out.flagged[i] = true;
                have_previous = false;
                continue;
            }
            out.chi_trace[i] = sol.chi;
            out.density[i] = std::max(0.0, sol.trace_G.imag() / kPi);
            previous = sol.chi;
            have_previous = true;
        }
    });

    // Fill flagged points from the nearest solved neighbours.
    std::size_t failures = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!out.flagged[i]) continue;
        ++failures;
        std::ptrdiff_t left = static_cast<std::ptrdiff_t>(i) - 1;
        while (left >= 0 && out.flagged[static_cast<std::size_t>(left)]) --left;
        std::size_t right = i + 1;
        while (right < m && out.flagged[right]) ++right;
        if (left >= 0 && right < m) {
            const double t = (grid[i] - grid[static_cast<std::size_t>(left)]) /
                             (grid[right] - grid[static_cast<std::size_t>(left)]);
            out.density[i] = (1.0 - t) * out.density[static_cast<std::size_t>(left)] + t * out.density[right];
        } else if (left >= 0) {
            out.density[i] = out.density[static_cast<std::size_t>(left)];
        } else if (right < m) {
            out.density[i] = out.density[right];
        }
    }
    if (failures > 0) {
        std::ostringstream os;
        os << failures << " of " << m << " grid points failed to converge and were interpolated";
        out.warnings.push_back(os.str());
    }
    out.mass = density_mass(out.grid, out.density);
    refine_unresolved_peaks(solver, out);
    out.support_estimate = support_of(out.grid, out.density);

    // The offset eta leaves Lorentzian tails outside the support; locate the
    // edges by scanning inward from both ends with a much smaller offset.
    const double peak = *std::max_element(out.density.begin(), out.density.end());
    const double fine_eta = 1e-3 * eta;
    auto scan = [&](std::size_t start, std::ptrdiff_t step, std::size_t stop) -> std::optional<double> {
        bool have_previous = false;
        cdouble previous = 0.0;
        for (std::size_t i = start;; i = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + step)) {
            const cdouble z(1.0 - grid[i], fine_eta);
            ChiSolution sol = have_previous ? solver.solve(z, previous) : solver.solve_from_above(z);
            if (sol.converged) {
                if (sol.trace_G.imag() / kPi > 1e-3 * peak) return grid[i];
                previous = sol.chi;
                have_previous = true;
            } else {
                have_previous = false;
            }
            if (i == stop) break;
        }
        return std::nullopt;
    };
    if (peak > 0.0) {
        const auto lo_index = static_cast<std::size_t>(
            std::lower_bound(grid.begin(), grid.end(), out.support_estimate.first) - grid.begin());
        const auto hi_index = static_cast<std::size_t>(
            std::lower_bound(grid.begin(), grid.end(), out.support_estimate.second) - grid.begin());
        const std::size_t mid = std::min(m - 1, (lo_index + hi_index) / 2);
        if (const auto lo = scan(0, 1, mid)) out.support_estimate.first = *lo;
        if (const auto hi = scan(m - 1, -1, mid)) out.support_estimate.second = *hi;
    }
    return out;
}

std::pair<double, double> universal_support(double alpha) {
    if (!(alpha > 1.0)) throw ParameterError("universal density requires alpha > 1");
    const double r = std::sqrt(alpha);
    return {-2.0 / (r - 1.0), 2.0 / (r + 1.0)};
}

cdouble universal_stieltjes(double alpha, cdouble z) {
    const cdouble chi = ridgeless_diagonal_chi(alpha, z);
    return 1.0 / ((1.0 - 1.0 / alpha) * (1.0 - chi) - z);
}

SpectralModel universal_density(double alpha, const std::vector<double>& grid) {
    check_grid(grid);
    const auto [lo, hi] = universal_support(alpha);
    SpectralModel out;
    out.grid = grid;
    out.eta = 0.0;
    out.density.assign(grid.size(), 0.0);
    out.chi_trace.assign(grid.size(), cdouble(0.0, 0.0));
    out.flagged.assign(grid.size(), false);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        const cdouble z(1.0 - x, 0.0);
        out.chi_trace[i] = ridgeless_diagonal_chi(alpha, z);
        if (x <= lo || x >= hi) continue;
        const cdouble g = 1.0 / ((1.0 - 1.0 / alpha) * (1.0 - out.chi_trace[i]) - z);
        out.density[i] = std::max(0.0, g.imag() / kPi);
    }
    out.support_estimate = {lo, hi};
    out.mass = density_mass(out.grid, out.density);
    return out;
}

SpikedAnalysis bbp_prediction(double alpha, double theta) {
    if (!(alpha > 1.0)) throw ParameterError("bbp_prediction requires alpha > 1");
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw ParameterError("bbp_prediction requires theta >= 0");
    const double r = std::sqrt(alpha);
    const double edge = (r - 1.0) / (r + 1.0);
    SpikedAnalysis out;
    out.alpha = alpha;
    out.theta = theta;
    out.theta_c = 1.0 / r;
    out.s2 = 2.0 / (r + 1.0);
    out.s1 = out.s2;
    if (theta <= out.theta_c) return out;

    // z alpha (1 + theta) - (alpha - 1)(1 - chi(z)) changes sign on (0, edge).
    auto h = [&](double z) {
        const double chi = ridgeless_diagonal_chi(alpha, cdouble(z, 0.0)).real();
        return z * alpha * (1.0 + theta) - (alpha - 1.0) * (1.0 - chi);
    };
    double lo = 0.0, hi = edge;
    if (!(h(lo) < 0.0 && h(hi) > 0.0)) throw NumericError("bbp_prediction: no admissible root below the bulk edge");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (h(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    out.z_star = 0.5 * (lo + hi);
    out.s1 = 1.0 - *out.z_star;
    return out;
}

SpikedAnalysis spiked_population_losses(double theta, double lambda, const Eigen::VectorXd& spike, Eigen::Index p) {
    if (!(theta >= 0.0)) throw ParameterError("spiked_population_losses: theta must be nonnegative");
    if (!(lambda >= 0.0)) throw ParameterError("spiked_population_losses: lambda must be nonnegative");
    const Eigen::Index d = spike.size();
    if (p < 1 || p > d) throw ParameterError("spiked_population_losses: p must lie in [1, d]");
    const double tau = 1.0 + lambda;
    SpikedAnalysis out;
    out.theta = theta;
    out.a = theta * (tau * tau - 2.0 * tau - theta) / ((tau + theta) * (tau + theta));
    out.b = theta / (tau + theta);
    double sum = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        const double v2 = spike(k) * spike(k);
        const double den = 1.0 - out.b * v2;
        sum += (1.0 + out.a * v2) / (den * den);
    }
    out.L_ssr_pop = sum / static_cast<double>(d);
    out.L_pca_pop = static_cast<double>(d - p) / static_cast<double>(d);
    return out;
}

SpikedAnalysis spiked_population_losses(double theta, double lambda, const SpikeSpec& spike, Eigen::Index d,
                                        Eigen::Index p) {
    if (d < 2) throw ParameterError("spiked_population_losses: d must be at least 2");
    Eigen::VectorXd v;
    if (spike.mode == SpikeSpec::Mode::Basis) {
        if (spike.index < 0 || spike.index >= d) throw ParameterError("spike basis index out of range");
        v = Eigen::VectorXd::Unit(d, spike.index);
    } else {
        v = uniform_sphere_vector(d, spike.seed);
    }
    return spiked_population_losses(theta, lambda, v, p);
}

namespace {

void check_rho(double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("AR(1) rho must lie in (0, 1)");
}

}  // namespace

double ar1_population_ssr_loss(double rho, double lambda) {
    check_rho(rho);
    if (!(lambda >= 0.0)) throw ParameterError("ar1_population_ssr_loss: lambda must be nonnegative");
    const double ep = (1.0 + rho) / (1.0 - rho);
    const double em = 1.0 / ep;
    const double F = std::sqrt((lambda + em) * (lambda + ep));
    // lambda^2 (2 lambda + E+ + E-) / (2 F (F - 1)^2) with F^2 - 1 = lambda (lambda + E+ + E-).
    const double sum = ep + em;
    return (2.0 * lambda + sum) * (F + 1.0) * (F + 1.0) / (2.0 * F * (lambda + sum) * (lambda + sum));
}

double ar1_pca_population_loss(double rho, double gamma) {
    check_rho(rho);
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ParameterError("ar1_pca_population_loss: gamma must lie in [0, 1]");
    if (gamma == 1.0) return 0.0;
    const double ep = (1.0 + rho) / (1.0 - rho);
    const double value = 1.0 - 2.0 / kPi * std::atan(ep * std::tan(0.5 * kPi * gamma));
    return std::clamp(value, 0.0, 1.0);
}

double ar1_phase_boundary(double rho) {
    check_rho(rho);
    const double inner = 4.0 * rho * rho / ((1.0 + rho) * (1.0 + rho) + (1.0 - rho) * (1.0 - rho));
    return 2.0 / kPi * std::atan((1.0 - rho) / (1.0 + rho) * std::tan(0.5 * kPi * inner));
}

Ar1Analysis ar1_analysis(double rho, double lambda, const std::vector<double>& gammas) {
    check_rho(rho);
    Ar1Analysis out;
    out.rho = rho;
    out.E_plus = (1.0 + rho) / (1.0 - rho);
    out.E_minus = (1.0 - rho) / (1.0 + rho);
    out.f_pop = ar1_population_ssr_loss(rho, lambda);
    out.gammas = gammas;
    out.pca_pop.reserve(gammas.size());
    for (double g : gammas) out.pca_pop.push_back(ar1_pca_population_loss(rho, g));
    out.gamma_star = ar1_phase_boundary(rho);
    return out;
}

double toeplitz_df2_closed_form(double rho, double kappa, Eigen::Index d) {
    if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("toeplitz_df2_closed_form: rho must lie in [0, 1)");
    if (!(kappa > 0.0)) throw ParameterError("toeplitz_df2_closed_form: kappa must be positive");
    const double r2 = 1.0 - rho * rho;
    const double num = r2 * r2 * (r2 + kappa * (1.0 + rho * rho));
    const double base = (r2 + kappa * (1.0 + rho) * (1.0 + rho)) * (r2 + kappa * (1.0 - rho) * (1.0 - rho));
    return static_cast<double>(d) * num / std::pow(base, 1.5);
}

double toeplitz_df2_approximation(double rho, double kappa, Eigen::Index d) {
    if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("toeplitz_df2_approximation: rho must lie in [0, 1)");
    if (!(kappa > 0.0)) throw ParameterError("toeplitz_df2_approximation: kappa must be positive");
    return static_cast<double>(d) * std::sqrt(1.0 - rho * rho) / (4.0 * std::sqrt(kappa));
}

}  // namespace ssrlab
