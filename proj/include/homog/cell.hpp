#pragma once

// The three regime-dependent local problems on the unit cell: per-slice
// elliptic (below the critical scaling), time-periodic parabolic (on it),
// and elliptic with the S-averaged coefficient (above it). Discretization is
// conservative finite differences in flux form on the periodic grid; the
// effective tensor later reuses the exact same face fluxes.

#include <algorithm>
#include <limits>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/coefficient.hpp"
#include "homog/grid.hpp"
#include "homog/linsolve.hpp"
#include "homog/parallel.hpp"
#include "homog/rational.hpp"

namespace homog {

struct CellTolerances {
    double tol_cell = 1e-10;    // relative residual of each elliptic/step solve
    double tol_period = 1e-9;   // relative period-map fixed-point tolerance
    int max_periods = 200;      // period-map iteration cap
    int max_iterations = 0;     // 0: pick from problem size
};

class PeriodMapStalled : public std::runtime_error {
public:
    PeriodMapStalled(const std::string& msg, std::vector<double> history)
        : std::runtime_error(msg), contraction_history(std::move(history)) {}
    std::vector<double> contraction_history;
};

// Node samples of the coefficient at one fixed s (or of an S-average).
struct CoefficientSlice {
    int dim = 1;
    int n_y = 0;
    std::vector<MatN> node;  // row-major nodes
};

inline CoefficientSlice sample_slice(const CoefficientField& field, const CellGrid& grid,
                                     double s) {
    CoefficientSlice sl{grid.dim, grid.n_y, {}};
    sl.node.resize(grid.slice_size());
    const double h = grid.h();
    if (grid.dim == 1) {
        for (int i = 0; i < grid.n_y; ++i) sl.node[i] = field.evaluate(i * h, s);
    } else {
        for (int i1 = 0; i1 < grid.n_y; ++i1)
            for (int i2 = 0; i2 < grid.n_y; ++i2) {
                const double y[2] = {i1 * h, i2 * h};
                sl.node[grid.at(i1, i2)] = field.evaluate(std::span<const double>(y, 2), s);
            }
    }
    return sl;
}

inline CoefficientSlice sample_slice(const AveragedCoefficient& avg, const CellGrid& grid) {
    CoefficientSlice sl{grid.dim, grid.n_y, {}};
    sl.node.resize(grid.slice_size());
    const double h = grid.h();
    if (grid.dim == 1) {
        for (int i = 0; i < grid.n_y; ++i) sl.node[i] = avg.evaluate(i * h);
    } else {
        for (int i1 = 0; i1 < grid.n_y; ++i1)
            for (int i2 = 0; i2 < grid.n_y; ++i2) {
                const double y[2] = {i1 * h, i2 * h};
                sl.node[grid.at(i1, i2)] = avg.evaluate(std::span<const double>(y, 2));
            }
    }
    return sl;
}

// Discrete operator L = -div_h(a grad_h ·) on the periodic cell grid. Face
// coefficients are arithmetic averages of the adjacent node samples; the
// cross-derivative at a face uses the average of the centered differences at
// the two nodes the face joins. One instance serves one solve at a time (it
// keeps scratch flux buffers).
class CellOperator {
public:
    CellOperator(const CoefficientSlice& a, const CellGrid& grid)
        : dim_(grid.dim), n_(grid.n_y), h_(grid.h()) {
        if (a.dim != dim_ || a.n_y != n_)
            throw std::invalid_argument("coefficient slice does not match the cell grid");
        const std::size_t nodes = a.node.size();
        for (int d = 0; d < dim_; ++d) {
            face_[d].resize(nodes);
            for (std::size_t idx = 0; idx < nodes; ++idx) {
                const std::size_t nb = neighbor(idx, d, +1);
                MatN f = a.node[idx];
                for (std::size_t t = 0; t < f.e.size(); ++t)
                    f.e[t] = 0.5 * (f.e[t] + a.node[nb].e[t]);
                face_[d][idx] = f;
            }
        }
        diagonal_ = true;
        if (dim_ == 2)
            for (const MatN& f : face_[0])
                if (f(0, 1) != 0.0 || f(1, 0) != 0.0) {
                    diagonal_ = false;
                    break;
                }
        flux1_.resize(nodes);
        if (dim_ == 2) flux2_.resize(nodes);
    }

    int dim() const { return dim_; }
    int n() const { return n_; }
    std::size_t size() const { return face_[0].size(); }
    bool diagonal() const { return diagonal_; }

    // smallest eigenvalue of the symmetric part over every face coefficient
    double min_face_coercivity() const {
        double c0 = std::numeric_limits<double>::infinity();
        for (int d = 0; d < dim_; ++d)
            for (const MatN& f : face_[d]) c0 = std::min(c0, f.min_eig_sym());
        return c0;
    }

    // y = L x
    void apply(std::span<const double> x, std::span<double> y) const {
        compute_fluxes(x, /*add_ej=*/-1);
        divergence(y, -1.0);
    }

    // y = (mass) x + L x, used by the implicit parabolic step
    void apply_shifted(double mass, std::span<const double> x, std::span<double> y) const {
        apply(x, y);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += mass * x[i];
    }

    // right-hand side +div_h(a e_j) of the local problem for direction j
    std::vector<double> rhs(int j) const {
        std::vector<double> r(size());
        const std::size_t nodes = size();
        for (std::size_t idx = 0; idx < nodes; ++idx) flux1_[idx] = face_[0][idx](0, j);
        if (dim_ == 2)
            for (std::size_t idx = 0; idx < nodes; ++idx) flux2_[idx] = face_[1][idx](1, j);
        divergence(r, +1.0);
        return r;
    }

    // column j of the effective tensor: per-direction mean of the discrete
    // total flux a(e_j + grad chi) over all faces of that normal
    std::array<double, 2> mean_total_flux(std::span<const double> chi, int j) const {
        compute_fluxes(chi, j);
        std::array<double, 2> b{0.0, 0.0};
        const double scale = 1.0 / static_cast<double>(size());
        for (std::size_t idx = 0; idx < size(); ++idx) b[0] += flux1_[idx];
        b[0] *= scale;
        if (dim_ == 2) {
            for (std::size_t idx = 0; idx < size(); ++idx) b[1] += flux2_[idx];
            b[1] *= scale;
        }
        return b;
    }

private:
    int dim_, n_;
    double h_;
    bool diagonal_ = true;
    std::array<std::vector<MatN>, 2> face_;
    mutable std::vector<double> flux1_, flux2_;

    std::size_t neighbor(std::size_t idx, int axis, int step) const {
        if (dim_ == 1) {
            int i = static_cast<int>(idx) + step;
            if (i < 0) i += n_;
            if (i >= n_) i -= n_;
            return static_cast<std::size_t>(i);
        }
        int i1 = static_cast<int>(idx) / n_;
        int i2 = static_cast<int>(idx) % n_;
        (axis == 0 ? i1 : i2) += step;
        if (i1 < 0) i1 += n_;
        if (i1 >= n_) i1 -= n_;
        if (i2 < 0) i2 += n_;
        if (i2 >= n_) i2 -= n_;
        return static_cast<std::size_t>(i1) * n_ + i2;
    }

    // Fills flux1_/flux2_ with the face fluxes of x; when add_ej >= 0 the
    // constant-field contribution a e_j is added (total corrector flux).
    void compute_fluxes(std::span<const double> x, int add_ej) const {
        const std::size_t nodes = size();
        const double inv_h = 1.0 / h_;
        if (dim_ == 1) {
            for (std::size_t i = 0; i < nodes; ++i) {
                const std::size_t ip = neighbor(i, 0, +1);
                double f = face_[0][i](0, 0) * (x[ip] - x[i]) * inv_h;
                if (add_ej == 0) f += face_[0][i](0, 0);
                flux1_[i] = f;
            }
            return;
        }
        const double inv_4h = 1.0 / (4.0 * h_);
        for (std::size_t i = 0; i < nodes; ++i) {
            // face with normal 1 between i and i+e1
            {
                const std::size_t ie1 = neighbor(i, 0, +1);
                const double d1 = (x[ie1] - x[i]) * inv_h;
                const double d2 = (x[neighbor(i, 1, +1)] - x[neighbor(i, 1, -1)] +
                                   x[neighbor(ie1, 1, +1)] - x[neighbor(ie1, 1, -1)]) *
                                  inv_4h;
                const MatN& f = face_[0][i];
                double v = f(0, 0) * d1 + f(0, 1) * d2;
                if (add_ej >= 0) v += f(0, add_ej);
                flux1_[i] = v;
            }
            // face with normal 2 between i and i+e2
            {
                const std::size_t ie2 = neighbor(i, 1, +1);
                const double d2 = (x[ie2] - x[i]) * inv_h;
                const double d1 = (x[neighbor(i, 0, +1)] - x[neighbor(i, 0, -1)] +
                                   x[neighbor(ie2, 0, +1)] - x[neighbor(ie2, 0, -1)]) *
                                  inv_4h;
                const MatN& f = face_[1][i];
                double v = f(1, 0) * d1 + f(1, 1) * d2;
                if (add_ej >= 0) v += f(1, add_ej);
                flux2_[i] = v;
            }
        }
    }

    // y = sign * div_h(flux): y_i = sign/h * (F(i) - F(i - e_d)) summed over d
    void divergence(std::span<double> y, double sign) const {
        const std::size_t nodes = size();
        const double s = sign / h_;
        for (std::size_t i = 0; i < nodes; ++i) {
            double acc = flux1_[i] - flux1_[neighbor(i, 0, -1)];
            if (dim_ == 2) acc += flux2_[i] - flux2_[neighbor(i, 1, -1)];
            y[i] = s * acc;
        }
    }
};

// Corrector family chi_j on the cell grid; slice-major storage per direction.
// SuperCritical correctors are s-independent and carry a single slice.
struct CorrectorField {
    Regime regime = Regime::SubCritical;
    int dim = 1;
    int n_y = 0;
    int n_s = 1;
    std::vector<std::vector<double>> comp;  // comp[j], size n_s * nodes
    double max_residual = 0.0;              // worst relative solve residual
    int total_iterations = 0;

    std::size_t nodes() const {
        return dim == 1 ? static_cast<std::size_t>(n_y)
                        : static_cast<std::size_t>(n_y) * static_cast<std::size_t>(n_y);
    }
    std::span<const double> slice(int j, int k) const {
        return std::span<const double>(comp[j]).subspan(static_cast<std::size_t>(k) * nodes(),
                                                        nodes());
    }
    std::span<double> slice(int j, int k) {
        return std::span<double>(comp[j]).subspan(static_cast<std::size_t>(k) * nodes(), nodes());
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& c : comp)
            for (double v : c) m = std::max(m, std::abs(v));
        return m;
    }

    // |discrete y-mean| of every slice must stay below tol * max|chi|
    double worst_slice_mean() const {
        double worst = 0.0;
        for (const auto& c : comp) {
            const std::size_t nn = nodes();
            for (std::size_t k = 0; k * nn < c.size(); ++k) {
                double m = 0.0;
                for (std::size_t i = 0; i < nn; ++i) m += c[k * nn + i];
                worst = std::max(worst, std::abs(m / static_cast<double>(nn)));
            }
        }
        return worst;
    }
};

namespace detail {

inline int default_max_iter(std::size_t unknowns, int configured) {
    if (configured > 0) return configured;
    return static_cast<int>(20 * unknowns + 200);
}

inline double residual_norm(const CellOperator& op, std::span<const double> chi,
                            std::span<const double> rhs) {
    std::vector<double> r(rhs.size());
    op.apply(chi, r);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double d = r[i] - rhs[i];
        num += d * d;
        den += rhs[i] * rhs[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace detail

// One elliptic local problem at a fixed slice: L chi = div(a e_j), periodic,
// zero mean.
inline std::pair<std::vector<double>, LinearSolveReport> solve_elliptic_cell(
    const CoefficientSlice& a, const CellGrid& grid, int j,
    const CellTolerances& tol = CellTolerances{}) {
    CellOperator op(a, grid);
    const std::vector<double> rhs = op.rhs(j);
    std::vector<double> chi(rhs.size(), 0.0);
    const int max_iter = detail::default_max_iter(rhs.size(), tol.max_iterations);
    auto apply = [&op](std::span<const double> x, std::span<double> y) { op.apply(x, y); };
    LinearSolveReport rep;
    if (op.diagonal())
        rep = conjugate_gradient(apply, rhs, std::span<double>(chi), tol.tol_cell, max_iter,
                                 /*project_constants=*/true);
    else
        rep = bicgstab(apply, rhs, std::span<double>(chi), tol.tol_cell, max_iter,
                       /*project_constants=*/true);
    detail::remove_mean(chi);
    return {std::move(chi), std::move(rep)};
}

// Elliptic solves at every s-slice s_k = k/n_s (the SubCritical family). The
// slices are mutually independent and solved in parallel; an s-independent
// coefficient is solved once.
inline CorrectorField solve_elliptic_cell_family(const CoefficientField& field,
                                                 const CellGrid& grid,
                                                 const CellTolerances& tol = CellTolerances{}) {
    if (field.dim() != grid.dim)
        throw std::invalid_argument("coefficient dimension does not match the cell grid");
    CorrectorField out;
    out.regime = Regime::SubCritical;
    out.dim = grid.dim;
    out.n_y = grid.n_y;
    out.n_s = grid.n_s;
    const std::size_t nodes = grid.slice_size();
    out.comp.assign(grid.dim, std::vector<double>(static_cast<std::size_t>(grid.n_s) * nodes));

    const int n_solve_slices = field.depends_on_s() ? grid.n_s : 1;
    std::vector<double> residuals(static_cast<std::size_t>(n_solve_slices) * grid.dim, 0.0);
    std::vector<int> iters(residuals.size(), 0);
    parallel_for(static_cast<std::size_t>(n_solve_slices), [&](std::size_t k) {
        const CoefficientSlice a = sample_slice(field, grid, static_cast<double>(k) / grid.n_s);
        for (int j = 0; j < grid.dim; ++j) {
            auto [chi, rep] = solve_elliptic_cell(a, grid, j, tol);
            std::copy(chi.begin(), chi.end(), out.slice(j, static_cast<int>(k)).begin());
            residuals[k * grid.dim + j] = rep.residual;
            iters[k * grid.dim + j] = rep.iterations;
        }
    });
    if (!field.depends_on_s())
        for (int j = 0; j < grid.dim; ++j)
            for (int k = 1; k < grid.n_s; ++k) {
                auto dst = out.slice(j, k);
                auto src = out.slice(j, 0);
                std::copy(src.begin(), src.end(), dst.begin());
            }
    for (double r : residuals) out.max_residual = std::max(out.max_residual, r);
    for (int it : iters) out.total_iterations += it;
    return out;
}

// Time-periodic parabolic local problem, solved by implicit Euler over the
// period repeated until the period map has a fixed point. Warm-started from
// the elliptic corrector of the first slice, which is already exact whenever
// the coefficient has no s-dependence.
inline CorrectorField solve_parabolic_cell(const CoefficientField& field, const CellGrid& grid,
                                           const CellTolerances& tol = CellTolerances{}) {
    if (field.dim() != grid.dim)
        throw std::invalid_argument("coefficient dimension does not match the cell grid");
    CorrectorField out;
    out.regime = Regime::Critical;
    out.dim = grid.dim;
    out.n_y = grid.n_y;
    out.n_s = grid.n_s;
    const std::size_t nodes = grid.slice_size();
    out.comp.assign(grid.dim, std::vector<double>(static_cast<std::size_t>(grid.n_s) * nodes));

    // coefficient operators for slices s_1, ..., s_{n_s} (s_{n_s} == s_0);
    // an s-independent coefficient shares a single operator
    const bool varies = field.depends_on_s();
    std::vector<CellOperator> ops;
    ops.reserve(varies ? grid.n_s : 1);
    for (int m = 1; m <= (varies ? grid.n_s : 1); ++m) {
        const double s = static_cast<double>(m % grid.n_s) / grid.n_s;
        ops.emplace_back(sample_slice(field, grid, s), grid);
    }

    const double inv_ds = static_cast<double>(grid.n_s);
    const int max_iter = detail::default_max_iter(nodes, tol.max_iterations);
    std::vector<double> dir_res(grid.dim, 0.0);
    std::vector<int> dir_iters(grid.dim, 0);

    parallel_for(static_cast<std::size_t>(grid.dim), [&](std::size_t dir) {
        const int j = static_cast<int>(dir);
        // warm start from the elliptic corrector at s = s_1
        CoefficientSlice a0 = sample_slice(field, grid, 1.0 / grid.n_s);
        auto [state, rep0] = solve_elliptic_cell(a0, grid, j, tol);

        std::vector<double> rhs_step(nodes), next(nodes, 0.0), start(nodes);
        std::vector<double> history;
        bool converged = false;
        for (int period = 0; period < tol.max_periods && !converged; ++period) {
            start = state;
            for (int m = 0; m < grid.n_s; ++m) {
                const CellOperator& op = ops[varies ? static_cast<std::size_t>(m) : 0];
                // (inv_ds + L) chi^{m+1} = inv_ds chi^m + div(a e_j)
                std::vector<double> rhs = op.rhs(j);
                for (std::size_t i = 0; i < nodes; ++i)
                    rhs_step[i] = rhs[i] + inv_ds * state[i];
                auto apply = [&](std::span<const double> x, std::span<double> y) {
                    op.apply_shifted(inv_ds, x, y);
                };
                LinearSolveReport rep;
                if (op.diagonal())
                    rep = conjugate_gradient(apply, rhs_step, std::span<double>(next),
                                             tol.tol_cell, max_iter);
                else
                    rep = bicgstab(apply, rhs_step, std::span<double>(next), tol.tol_cell,
                                   max_iter);
                detail::remove_mean(next);
                state = next;
                dir_res[dir] = std::max(dir_res[dir], rep.residual);
                dir_iters[dir] += rep.iterations;
                // slice s_{m+1}; the final step wraps onto slice 0
                const int slice_idx = (m + 1) % grid.n_s;
                std::copy(state.begin(), state.end(), out.slice(j, slice_idx).begin());
            }
            double diff = 0.0, norm = 0.0;
            for (std::size_t i = 0; i < nodes; ++i) {
                const double d = state[i] - start[i];
                diff += d * d;
                norm += state[i] * state[i];
            }
            diff = std::sqrt(diff);
            norm = std::sqrt(norm);
            history.push_back(norm > 0.0 ? diff / norm : diff);
            converged = diff <= tol.tol_period * norm;
        }
        if (!converged)
            throw PeriodMapStalled(
                "period map did not reach a fixed point within " +
                    std::to_string(tol.max_periods) + " periods (direction " + std::to_string(j) +
                    ")",
                history);
    });

    for (double r : dir_res) out.max_residual = std::max(out.max_residual, r);
    for (int it : dir_iters) out.total_iterations += it;
    return out;
}

// Elliptic local problem with the S-averaged coefficient (single slice).
inline CorrectorField solve_averaged_cell(const AveragedCoefficient& avg, const CellGrid& grid,
                                          const CellTolerances& tol = CellTolerances{}) {
    if (avg.dim() != grid.dim)
        throw std::invalid_argument("averaged coefficient dimension does not match the grid");
    CorrectorField out;
    out.regime = Regime::SuperCritical;
    out.dim = grid.dim;
    out.n_y = grid.n_y;
    out.n_s = 1;
    const CoefficientSlice a = sample_slice(avg, grid);
    out.comp.resize(grid.dim);
    for (int j = 0; j < grid.dim; ++j) {
        auto [chi, rep] = solve_elliptic_cell(a, grid, j, tol);
        out.comp[j] = std::move(chi);
        out.max_residual = std::max(out.max_residual, rep.residual);
        out.total_iterations += rep.iterations;
    }
    return out;
}

}  // namespace homog
