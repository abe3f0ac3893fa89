#pragma once

// Matrix-free Krylov solvers for the structured-grid systems: CG for
// symmetric operators, BiCGStab otherwise, both with optional projection of
// the constant null space (periodic zero-mean problems are singular), plus a
// direct Thomas solve for the tridiagonal systems of 1D marches.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace homog {

struct LinearSolveReport {
    int iterations = 0;
    double residual = 0.0;  // final ||r|| / ||b|| (absolute if ||b|| = 0)
    std::string solver;
};

class SolverDiverged : public std::runtime_error {
public:
    SolverDiverged(const std::string& msg, LinearSolveReport rep)
        : std::runtime_error(msg + " [" + rep.solver + ": " + std::to_string(rep.iterations) +
                             " iterations, residual " + std::to_string(rep.residual) + "]"),
          report(std::move(rep)) {}
    LinearSolveReport report;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void remove_mean(std::span<double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double& x : v) x -= m;
}

}  // namespace detail

// Solves A x = b with symmetric positive (semi-)definite matrix-free A.
// When project_constants is set, the constant null space is projected out of
// b, of every residual, and of the returned x (zero-mean representative).
template <class Op>
LinearSolveReport conjugate_gradient(const Op& apply, std::span<const double> b,
                                     std::span<double> x, double tol_rel, int max_iter,
                                     bool project_constants = false) {
    const std::size_t n = b.size();
    std::vector<double> r(b.begin(), b.end());
    if (project_constants) detail::remove_mean(r);
    const double b_norm = detail::norm2(r);
    LinearSolveReport rep{0, 0.0, "cg"};
    for (double& xi : x) xi = 0.0;
    if (b_norm == 0.0) return rep;

    std::vector<double> p = r, Ap(n);
    double rr = detail::dot(r, r);
    for (int it = 1; it <= max_iter; ++it) {
        apply(std::span<const double>(p), std::span<double>(Ap));
        if (project_constants) detail::remove_mean(Ap);
        const double pAp = detail::dot(p, Ap);
        if (!(pAp > 0.0)) {
            rep.iterations = it;
            rep.residual = std::sqrt(rr) / b_norm;
            throw SolverDiverged("cg breakdown: non-positive curvature", rep);
        }
        const double alpha = rr / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        if (project_constants) detail::remove_mean(r);
        const double rr_next = detail::dot(r, r);
        rep.iterations = it;
        rep.residual = std::sqrt(rr_next) / b_norm;
        if (rep.residual <= tol_rel) {
            if (project_constants) detail::remove_mean(x);
            return rep;
        }
        const double beta = rr_next / rr;
        rr = rr_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    throw SolverDiverged("cg did not converge", rep);
}

// BiCGStab for non-symmetric operators (full-matrix coefficients).
template <class Op>
LinearSolveReport bicgstab(const Op& apply, std::span<const double> b, std::span<double> x,
                           double tol_rel, int max_iter, bool project_constants = false) {
    const std::size_t n = b.size();
    std::vector<double> r(b.begin(), b.end());
    if (project_constants) detail::remove_mean(r);
    const double b_norm = detail::norm2(r);
    LinearSolveReport rep{0, 0.0, "bicgstab"};
    for (double& xi : x) xi = 0.0;
    if (b_norm == 0.0) return rep;

    std::vector<double> r0 = r, p(n, 0.0), v(n, 0.0), s(n), t(n);
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    for (int it = 1; it <= max_iter; ++it) {
        const double rho_next = detail::dot(r0, r);
        if (rho_next == 0.0) {
            rep.iterations = it;
            rep.residual = detail::norm2(r) / b_norm;
            throw SolverDiverged("bicgstab breakdown: rho = 0", rep);
        }
        const double beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        apply(std::span<const double>(p), std::span<double>(v));
        if (project_constants) detail::remove_mean(v);
        alpha = rho / detail::dot(r0, v);
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        rep.iterations = it;
        if (detail::norm2(s) / b_norm <= tol_rel) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
            rep.residual = detail::norm2(s) / b_norm;
            if (project_constants) detail::remove_mean(x);
            return rep;
        }
        apply(std::span<const double>(s), std::span<double>(t));
        if (project_constants) detail::remove_mean(t);
        const double tt = detail::dot(t, t);
        if (tt == 0.0) {
            rep.residual = detail::norm2(s) / b_norm;
            throw SolverDiverged("bicgstab breakdown: t = 0", rep);
        }
        omega = detail::dot(t, s) / tt;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if (project_constants) detail::remove_mean(r);
        rep.residual = detail::norm2(r) / b_norm;
        if (rep.residual <= tol_rel) {
            if (project_constants) detail::remove_mean(x);
            return rep;
        }
        if (omega == 0.0) throw SolverDiverged("bicgstab breakdown: omega = 0", rep);
    }
    throw SolverDiverged("bicgstab did not converge", rep);
}

// Direct solve of a tridiagonal system (Dirichlet-eliminated interior rows):
// lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]. lower[0] and
// upper[n-1] are ignored. Overwrites rhs with the solution.
class TridiagonalSolver {
public:
    void factor(std::span<const double> lower, std::span<const double> diag,
                std::span<const double> upper) {
        const std::size_t n = diag.size();
        c_.resize(n);
        inv_d_.resize(n);
        lower_.assign(lower.begin(), lower.end());
        double d = diag[0];
        if (d == 0.0) throw std::invalid_argument("tridiagonal pivot is zero");
        inv_d_[0] = 1.0 / d;
        c_[0] = upper[0] * inv_d_[0];
        for (std::size_t i = 1; i < n; ++i) {
            d = diag[i] - lower[i] * c_[i - 1];
            if (d == 0.0) throw std::invalid_argument("tridiagonal pivot is zero");
            inv_d_[i] = 1.0 / d;
            if (i + 1 < n) c_[i] = upper[i] * inv_d_[i];
        }
    }

    void solve(std::span<double> rhs) const {
        const std::size_t n = inv_d_.size();
        rhs[0] *= inv_d_[0];
        for (std::size_t i = 1; i < n; ++i)
            rhs[i] = (rhs[i] - lower_[i] * rhs[i - 1]) * inv_d_[i];
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c_[i] * rhs[i + 1];
    }

private:
    std::vector<double> c_, inv_d_, lower_;
};

}  // namespace homog
