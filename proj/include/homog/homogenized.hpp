#pragma once

// The homogenized problem: -div(b grad u(.,t)) = f(.,t) on the macro box
// with zero Dirichlet data. It carries no time derivative and no initial
// condition; every output slice solves an independent elliptic problem.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "homog/effective.hpp"
#include "homog/linsolve.hpp"
#include "homog/macro.hpp"
#include "homog/parallel.hpp"

namespace homog {

struct HomogenizedResult {
    SpaceTimeField u;
    double max_residual = 0.0;
    int total_iterations = 0;
};

inline HomogenizedResult solve_homogenized(const EffectiveTensor& b, const MacroDomain& dom,
                                           double tol_rel = 1e-10) {
    dom.validate();
    if (b.dim != dom.dim)
        throw std::invalid_argument("effective tensor dimension does not match the domain");
    if (b.min_eig_sym() <= 0.0)
        throw std::invalid_argument("effective tensor is not positive definite");

    HomogenizedResult out;
    out.u = SpaceTimeField::like(dom);
    const std::size_t n = dom.interior_size();

    // f independent of t: one elliptic solve serves every slice
    const std::size_t t_slot = static_cast<std::size_t>(dom.dim);
    const bool time_varying = dom.f.depends_on(t_slot);
    const int solves = time_varying ? dom.n_t : 1;

    std::vector<double> residuals(solves, 0.0);
    std::vector<int> iterations(solves, 0);

    parallel_for(static_cast<std::size_t>(solves), [&](std::size_t k) {
        MacroOperator op(dom.dim, dom.n_x, dom.lo, dom.hi);
        op.set_constant_coefficient(b.b);
        const double t = dom.slice_time(static_cast<int>(k));
        std::vector<double> rhs(n);
        if (dom.dim == 1) {
            for (int i = 0; i < dom.n_x; ++i) {
                const double args[2] = {dom.coord(0, i), t};
                rhs[i] = dom.f(std::span<const double>(args, 2));
            }
        } else {
            for (int i1 = 0; i1 < dom.n_x; ++i1)
                for (int i2 = 0; i2 < dom.n_x; ++i2) {
                    const double args[3] = {dom.coord(0, i1), dom.coord(1, i2), t};
                    rhs[static_cast<std::size_t>(i1) * dom.n_x + i2] =
                        dom.f(std::span<const double>(args, 3));
                }
        }
        auto u_k = out.u.slice(static_cast<int>(k));
        if (dom.dim == 1) {
            // direct tridiagonal solve
            std::vector<double> lower(n), diag(n), upper(n);
            op.tridiagonal(0.0, lower, diag, upper);
            TridiagonalSolver ts;
            ts.factor(lower, diag, upper);
            std::vector<double> x(rhs);
            ts.solve(x);
            std::copy(x.begin(), x.end(), u_k.begin());
            // report the true relative residual of the direct solve
            std::vector<double> lu(n);
            op.apply(u_k, lu);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = lu[i] - rhs[i];
                num += d * d;
                den += rhs[i] * rhs[i];
            }
            residuals[k] = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
            iterations[k] = 1;
        } else {
            auto apply = [&op](std::span<const double> x, std::span<double> y) {
                op.apply(x, y);
            };
            // the constant-tensor cross stencil stays symmetric, so CG applies
            std::vector<double> x(n, 0.0);
            LinearSolveReport rep = conjugate_gradient(
                apply, rhs, std::span<double>(x),
                tol_rel, static_cast<int>(20 * n + 200));
            std::copy(x.begin(), x.end(), u_k.begin());
            residuals[k] = rep.residual;
            iterations[k] = rep.iterations;
        }
    });

    if (!time_varying)
        for (int k = 1; k < dom.n_t; ++k) {
            auto dst = out.u.slice(k);
            auto src = out.u.slice(0);
            std::copy(src.begin(), src.end(), dst.begin());
        }
    for (double r : residuals) out.max_residual = std::max(out.max_residual, r);
    for (int it : iterations) out.total_iterations += it;
    if (out.max_residual > tol_rel)
        throw SolverDiverged("homogenized slice solve missed its tolerance",
                             LinearSolveReport{out.total_iterations, out.max_residual, "direct"});
    return out;
}

}  // namespace homog
