#include "ssrlab/fixed_point.hpp"

#include "ssrlab/errors.hpp"
#include "trace_evaluator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ssrlab {

std::string to_string(SolverMethod method) {
    switch (method) {
        case SolverMethod::Picard: return "picard";
        case SolverMethod::Bisection: return "bisection";
        case SolverMethod::RidgelessLimit: return "ridgeless_limit";
    }
    return "unknown";
}

DegreesOfFreedom degrees_of_freedom(const Eigen::VectorXd& eigenvalues, double kappa) {
    if (!(kappa >= 0.0)) throw ParameterError("degrees_of_freedom: kappa must be nonnegative");
    DegreesOfFreedom out;
    for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
        const double s = eigenvalues(j);
        if (!(s > 0.0)) continue;
        const double r = s / (s + kappa);
        out.df1 += r;
        out.df2 += r * r;
    }
    return out;
}

DegreesOfFreedom degrees_of_freedom(const CovarianceModel& model, double kappa) {
    return degrees_of_freedom(model.eigenvalues(), kappa);
}

namespace {

void check_n(Eigen::Index n) {
    if (n < 1) throw ParameterError("sample size n must be at least 1");
}

double kappa_map(const Eigen::VectorXd& s, double inv_n, double lambda, double kappa) {
    return lambda + kappa * inv_n * degrees_of_freedom(s, kappa).df1;
}

double mtilde_map(const Eigen::VectorXd& s, double inv_n, double lambda, double m) {
    double tr = 0.0;
    for (Eigen::Index j = 0; j < s.size(); ++j)
        if (s(j) > 0.0) tr += s(j) / (m * s(j) + 1.0);
    return 1.0 / (lambda + inv_n * tr);
}

// Bisection for an increasing function with f(lo) < 0 < f(hi).
template <class F>
double bisect(F&& f, double lo, double hi, int& iterations) {
    for (iterations = 0; iterations < 400; ++iterations) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

Eigen::Index positive_rank(const Eigen::VectorXd& s) {
    const double tol = 1e-14 * std::max(s.maxCoeff(), 1e-300);
    return (s.array() > tol).count();
}

}  // namespace

double kappa_residual(const Eigen::VectorXd& eigenvalues, Eigen::Index n, double lambda, double kappa) {
    return std::abs(kappa - kappa_map(eigenvalues, 1.0 / static_cast<double>(n), lambda, kappa));
}

double mtilde_residual(const Eigen::VectorXd& eigenvalues, Eigen::Index n, double lambda, double m) {
    return std::abs(m - mtilde_map(eigenvalues, 1.0 / static_cast<double>(n), lambda, m));
}

double ridgeless_nu(double alpha) {
    if (!(alpha > 1.0)) throw ParameterError("ridgeless nu requires alpha > 1");
    return 1.0 / (alpha - 1.0);
}

FixedPointSolution solve_kappa(const Eigen::VectorXd& s, Eigen::Index n, double lambda, const KappaOptions& options) {
    check_n(n);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("solve_kappa: lambda must be nonnegative");
    const double inv_n = 1.0 / static_cast<double>(n);
    const double trace = s.cwiseMax(0.0).sum();
    FixedPointSolution sol;

    if (lambda == 0.0) {
        sol.method = SolverMethod::RidgelessLimit;
        const Eigen::Index rank = positive_rank(s);
        if (n >= rank) {
            sol.kappa = 0.0;
            sol.m_tilde = std::numeric_limits<double>::infinity();
            sol.nu = n > rank ? static_cast<double>(rank) / static_cast<double>(n - rank)
                              : std::numeric_limits<double>::infinity();
            return sol;
        }
        // Interpolating regime: df1(kappa) = n.
        auto excess = [&](double k) { return static_cast<double>(n) - degrees_of_freedom(s, k).df1; };
        double hi = trace * inv_n;
        while (excess(hi) < 0.0) hi *= 2.0;
        sol.kappa = bisect(excess, 0.0, hi, sol.iterations);
        sol.m_tilde = 1.0 / sol.kappa;
        sol.nu = std::numeric_limits<double>::infinity();
        sol.residual = std::abs(excess(sol.kappa)) * inv_n;
        return sol;
    }

    const double tol = 1e-12 * std::max(1.0, lambda);
    double kappa = lambda + trace * inv_n;
    bool converged = false;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const double next = kappa_map(s, inv_n, lambda, kappa);
        const double step = next - kappa;
        if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * kappa) {
            kappa = next;
            converged = true;
            break;
        }
        kappa += options.damping * step;
    }
    sol.iterations = it;
    sol.method = SolverMethod::Picard;
    if (!converged || kappa_residual(s, n, lambda, kappa) > tol * std::max(1.0, kappa)) {
        auto h = [&](double k) { return k - kappa_map(s, inv_n, lambda, k); };
        int bis_it = 0;
        kappa = bisect(h, lambda, lambda + trace * inv_n, bis_it);
        sol.iterations += bis_it;
        sol.method = SolverMethod::Bisection;
    }
    sol.kappa = kappa;
    sol.residual = kappa_residual(s, n, lambda, kappa);
    sol.m_tilde = solve_mtilde(s, n, lambda, options);
    sol.nu = 1.0 / (lambda * sol.m_tilde) - 1.0;
    return sol;
}

FixedPointSolution solve_kappa(const CovarianceModel& model, Eigen::Index n, double lambda,
                               const KappaOptions& options) {
    return solve_kappa(model.eigenvalues(), n, lambda, options);
}

double solve_mtilde(const Eigen::VectorXd& s, Eigen::Index n, double lambda, const KappaOptions& options) {
    check_n(n);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("solve_mtilde: lambda must be positive");
    const double inv_n = 1.0 / static_cast<double>(n);
    double m = 1.0 / lambda;
    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
        const double next = mtilde_map(s, inv_n, lambda, m);
        const double step = next - m;
        if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * m) {
            m = next;
            converged = true;
            break;
        }
        m += options.damping * step;
    }
    if (!converged || mtilde_residual(s, n, lambda, m) > 1e-12 * std::max(1.0, m)) {
        // m (lambda + Tr(Sigma (m Sigma + I)^{-1}) / n) - 1 is increasing in m.
        auto phi = [&](double x) { return x / mtilde_map(s, inv_n, lambda, x) - 1.0; };
        int bis_it = 0;
        m = bisect(phi, 0.0, 1.0 / lambda, bis_it);
    }
    return m;
}

double solve_mtilde(const CovarianceModel& model, Eigen::Index n, double lambda, const KappaOptions& options) {
    return solve_mtilde(model.eigenvalues(), n, lambda, options);
}

DbarVectors dbar_vectors(const CovarianceModel& model, Eigen::Index n, double lambda) {
    if (!(lambda > 0.0)) throw ParameterError("dbar_vectors: lambda must be positive");
    const FixedPointSolution fp = solve_kappa(model, n, lambda);
    const Eigen::VectorXd& s = model.eigenvalues();
    const Eigen::MatrixXd U2 = model.eigenvectors().cwiseAbs2();
    DbarVectors out;
    out.kappa = fp.kappa;
    out.m_tilde = fp.m_tilde;
    const Eigen::VectorXd risk_weights = (s.array() + fp.kappa).inverse().matrix();
    const Eigen::VectorXd spec_weights = (fp.m_tilde * s.array() + 1.0).inverse().matrix();
    out.d_risk = (U2 * risk_weights).cwiseInverse();
    out.d_spec = lambda * (U2 * spec_weights).cwiseInverse().array();
    return out;
}

ChiSolver::ChiSolver(const CovarianceModel& model, Eigen::Index n, double lambda, const ChiOptions& options)
    : n_(n), d_(model.dim()), lambda_(lambda), options_(options) {
    check_n(n);
    if (!(lambda > 0.0)) throw ParameterError("ChiSolver: lambda must be positive");
    dbar_ = dbar_vectors(model, n, lambda);
    traces_ = make_trace_evaluator(model, dbar_.d_spec, lambda);
    strategy_ = traces_->name();
}

cdouble ChiSolver::map(cdouble chi, cdouble z) const {
    cdouble t1, t0;
    traces_->traces(1.0 / z, 1.0 / (1.0 - chi), t1, t0);
    return t1 / static_cast<double>(n_);
}

cdouble ChiSolver::trace_G(cdouble chi, cdouble z) const {
    cdouble t1, t0;
    const cdouble c = 1.0 / (1.0 - chi);
    traces_->traces(1.0 / z, c, t1, t0);
    return (c * t1 + lambda_ * t0) / (z * static_cast<double>(d_));
}

ChiSolution ChiSolver::iterate(cdouble z, cdouble start, bool accelerate) const {
    ChiSolution sol;
    sol.z = z;
    const double delta = options_.damping;
    cdouble x0 = start;
    cdouble F0 = x0 - map(x0, z);
    cdouble x1 = x0 - delta * F0;
    int it = 1;
    for (; it < options_.max_iterations; ++it) {
        const cdouble F1 = x1 - map(x1, z);
        if (!std::isfinite(F1.real()) || !std::isfinite(F1.imag())) break;
        if (std::abs(F1) <= options_.tolerance * std::max(1.0, std::abs(x1))) {
            sol.converged = true;
            break;
        }
        cdouble next = x1 - delta * F1;
        if (accelerate && F1 != F0) {
            // Secant step on F(x) = x - map(x), kept when it is not wildly
            // longer than the damped step.
            const cdouble secant = x1 - F1 * (x1 - x0) / (F1 - F0);
            if (std::isfinite(secant.real()) && std::isfinite(secant.imag()) &&
                std::abs(secant - x1) <= 4.0 * std::abs(F1) + 1e-3 * std::abs(x1))
                next = secant;
        }
        x0 = x1;
        F0 = F1;
        x1 = next;
    }
    sol.iterations = it;
    sol.chi = x1;
    sol.residual = std::abs(x1 - map(x1, z));
    sol.trace_G = trace_G(x1, z);
    if (!(sol.residual <= 1e-10 * std::max(1.0, std::abs(x1)))) sol.converged = false;
    return sol;
}

bool ChiSolver::admissible(const ChiSolution& sol) const {
    if (!sol.converged) return false;
    if (sol.z.imag() <= 0.0) return true;
    // Stieltjes sign test with slack for rounding when z sits near the axis
    // away from the support.
    return sol.trace_G.imag() >= -1e-12 * std::max(1.0, std::abs(sol.trace_G));
}

ChiSolution ChiSolver::solve(cdouble z) const {
    if (z.imag() > 0.0) {
        ChiSolution path = solve_from_above(z);
        if (admissible(path)) return path;
    }
    ChiSolution sol = iterate(z, 0.0, true);
    if (admissible(sol)) return sol;
    ChiSolution plain = iterate(z, 0.0, false);
    if (admissible(plain)) return plain;
    ChiSolution flipped = iterate(z, std::conj(sol.chi), true);
    if (admissible(flipped)) return flipped;
    sol.converged = false;
    return sol;
}

ChiSolution ChiSolver::solve(cdouble z, cdouble warm_start) const {
    ChiSolution sol = iterate(z, warm_start, true);
    if (admissible(sol)) return sol;
    return solve(z);
}

ChiSolution ChiSolver::solve_from_above(cdouble z) const {
    if (!(z.imag() > 0.0)) throw ParameterError("solve_from_above requires Im z > 0");
    const double target = z.imag();
    double height = 10.0 * std::max(1.0, std::abs(z));
    // Far from the axis the physical root has trace -1/z - 1/z^2 + O(z^-3)
    // (unit mass, unit mean since the rescaled matrix has unit diagonal).
    // With n < d a second root near -(d/n - 1)/lambda carries the null-space
    // mass and iteration from 0 can land on a spurious one.
    const cdouble top(z.real(), height);
    ChiSolution sol = iterate(top, 0.0, true);
    if (n_ < d_) {
        const double start = -(static_cast<double>(d_) / static_cast<double>(n_) - 1.0) / lambda_;
        const ChiSolution other = iterate(top, start, true);
        auto mass_gap = [&](const ChiSolution& s) {
            return s.converged ? std::abs(top * (top * s.trace_G + 1.0) + 1.0) : std::numeric_limits<double>::infinity();
        };
        if (mass_gap(other) < mass_gap(sol)) sol = other;
    }
    int iterations = sol.iterations;
    while (height > target) {
        height = std::max(0.5 * height, target);
        sol = iterate(cdouble(z.real(), height), sol.chi, true);
        iterations += sol.iterations;
        if (!sol.converged) break;
    }
    sol.iterations = iterations;
    return sol;
}

ChiSolution solve_chi(const CovarianceModel& model, Eigen::Index n, double lambda, cdouble z) {
    const ChiSolver solver(model, n, lambda);
    ChiSolution sol = solver.solve(z);
    if (!sol.converged) {
        std::ostringstream os;
        os << "solve_chi: no admissible solution at z = " << z << " (last residual " << sol.residual << ")";
        throw NumericError(os.str());
    }
    return sol;
}

cdouble ridgeless_diagonal_chi(double alpha, cdouble z) {
    if (!(alpha > 1.0)) throw ParameterError("ridgeless_diagonal_chi requires alpha > 1");
    const double q = 1.0 / (alpha - 1.0);
    auto roots = [q](cdouble zz, cdouble& plus, cdouble& minus) {
        const cdouble b = 1.0 - zz;
        const cdouble disc = std::sqrt(b * b - 4.0 * zz * q);
        plus = 0.5 * (b + disc);
        minus = 0.5 * (b - disc);
    };
    if (z.imag() == 0.0) {
        const double x = z.real();
        const double disc = (1.0 - x) * (1.0 - x) - 4.0 * x * q;
        if (disc < 0.0) return {0.5 * (1.0 - x), 0.5 * std::sqrt(-disc)};
        // Left of the bulk the root vanishing at z = 0; right of it the root
        // tending to -1/(alpha - 1) as z grows.
        const double edge = (std::sqrt(alpha) - 1.0) / (std::sqrt(alpha) + 1.0);
        return x <= edge ? 0.5 * ((1.0 - x) - std::sqrt(disc)) : 0.5 * ((1.0 - x) + std::sqrt(disc));
    }
    // Follow the root continuously from far up the imaginary direction, where
    // the physical branch is the one near -1/(alpha - 1).
    const double height = std::max(1e4, 1e4 * std::abs(z));
    cdouble current = -q;
    const int steps = 200;
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const double im = std::exp((1.0 - t) * std::log(height) + t * std::log(z.imag()));
        cdouble plus, minus;
        roots(cdouble(z.real(), im), plus, minus);
        current = std::abs(plus - current) <= std::abs(minus - current) ? plus : minus;
    }
    return current;
}

}  // namespace ssrlab
