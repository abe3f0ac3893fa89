#pragma once

// Direct simulation of the fine-scale problem
//   eps^q d_t u - div(a(x/eps, t/eps^r) grad u) = f,  u(.,0) = u0,  u|_boundary = 0
// by fully implicit Euler with the time step tied to the micro period
// eps^r / n_t_per_period. Oscillatory pairings against the march cannot be
// recovered from subsampled output slices, so observers hook into every step.

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/coefficient.hpp"
#include "homog/linsolve.hpp"
#include "homog/macro.hpp"
#include "homog/rational.hpp"

namespace homog {

struct FineScaleConfig {
    Rational q{1};
    Rational r{3};
    Rational epsilon{1, 8};  // must be of the form 1/k
    int n_x_per_cell = 16;
    int n_t_per_period = 32;
    MacroDomain dom;
    double tol_step = 1e-10;

    void validate() const {
        dom.validate();
        if (!(Rational(0) < q) || !(q < r))
            throw std::invalid_argument("exponents must satisfy 0 < q < r");
        if (epsilon.num() != 1 || epsilon.den() < 1)
            throw std::invalid_argument("epsilon must be of the form 1/k");
        if (n_x_per_cell < 2) throw std::invalid_argument("need n_x_per_cell >= 2");
        if (n_t_per_period < 2) throw std::invalid_argument("need n_t_per_period >= 2");
        for (int d = 0; d < dom.dim; ++d) {
            const double cells = (hi_lo(d)) * static_cast<double>(epsilon.den());
            if (std::abs(cells - std::round(cells)) > 1e-9 || std::round(cells) < 1.0)
                throw std::invalid_argument(
                    "the micro structure must tile the domain: extent / epsilon is not an "
                    "integer");
        }
        if (dom.dim == 2 && std::abs(hi_lo(0) - hi_lo(1)) > 1e-12)
            throw std::invalid_argument("2D fine-scale runs need equal extents per dimension");
        const double eps_v = epsilon.value();
        for (int d = 0; d < dom.dim; ++d)
            if (eps_v > hi_lo(d) + 1e-12)
                throw std::invalid_argument("epsilon exceeds the smallest domain extent");
    }

    double hi_lo(int d) const { return dom.hi[d] - dom.lo[d]; }
};

// Resolved discretization of one fine-scale run.
struct FineGridLayout {
    int n_x = 0;          // interior nodes per dimension
    double h = 0.0;       // grid spacing (equal per dimension by validation)
    long steps = 0;       // M; a multiple of (n_t - 1) so output times are exact
    double dt = 0.0;      // T / M
    double micro_period = 0.0;  // eps^r
    double eps_q = 0.0;         // eps^q
};

inline FineGridLayout plan_fine_run(const FineScaleConfig& cfg) {
    cfg.validate();
    FineGridLayout lay;
    const long k = cfg.epsilon.den();
    const long cells_per_extent = std::lround(cfg.hi_lo(0) * static_cast<double>(k));
    const long m_cells = cells_per_extent * cfg.n_x_per_cell;
    if (m_cells < 4) throw std::invalid_argument("fine grid is too coarse");
    lay.n_x = static_cast<int>(m_cells - 1);
    lay.h = cfg.hi_lo(0) / static_cast<double>(m_cells);

    const double eps_v = cfg.epsilon.value();
    lay.micro_period = std::pow(eps_v, cfg.r.value());
    lay.eps_q = std::pow(eps_v, cfg.q.value());
    const double nominal_dt = lay.micro_period / cfg.n_t_per_period;
    const double target_steps = cfg.dom.T / nominal_dt;
    const long chunks = std::max<long>(
        1, static_cast<long>(std::ceil(target_steps / (cfg.dom.n_t - 1) - 1e-9)));
    lay.steps = chunks * (cfg.dom.n_t - 1);
    lay.dt = cfg.dom.T / static_cast<double>(lay.steps);
    return lay;
}

// Hook into the implicit march. weight is the trapezoid quadrature weight of
// the reported time level over [0, T].
class StepObserver {
public:
    virtual ~StepObserver() = default;
    virtual void start(const FineGridLayout& lay, double weight, std::span<const double> u0) {
        (void)lay;
        (void)weight;
        (void)u0;
    }
    virtual void step(double t, double phase, double weight, std::span<const double> u) = 0;
    virtual void finish() {}
};

// Accumulated terms of the discrete energy identity
//   eps^q||u^M||^2 + sum eps^q||u^{n+1}-u^n||^2 + 2 sum dt (a grad u, grad u)
//     = eps^q||u0||^2 + 2 sum dt (f, u^{n+1}),
// which implicit Euler satisfies exactly up to linear-solver residuals.
struct EnergyReport {
    double eps_q = 0.0;
    double term_init = 0.0;       // eps^q ||u0||^2
    double term_final = 0.0;      // eps^q ||u^M||^2
    double term_jump = 0.0;       // eps^q sum ||u^{n+1} - u^n||^2
    double term_diffusion = 0.0;  // 2 sum dt (a grad u^{n+1}, grad u^{n+1})
    double term_source = 0.0;     // 2 sum dt (f^{n+1}, u^{n+1})
    double grad_l2t = 0.0;        // sum dt |u^{n+1}|_{H1}^2
    double f_l2t = 0.0;           // sum dt ||f^{n+1}||^2
    double u0_sq = 0.0;           // ||u0||^2
    double c0_faces = 0.0;        // min face coercivity over every operator used
    double poincare_c2 = 0.0;

    // continuous-identity defect; equals the non-negative dissipation term
    double defect() const { return term_source + term_init - term_final - term_diffusion; }
    // residual of the exact discrete identity (solver noise only)
    double identity_error() const { return defect() - term_jump; }
    double apriori_lhs() const { return grad_l2t; }
    double apriori_rhs() const {
        return eps_q / c0_faces * u0_sq + poincare_c2 / (c0_faces * c0_faces) * f_l2t;
    }
    bool apriori_ok(double slack = 1e-8) const {
        return apriori_lhs() <= apriori_rhs() * (1.0 + slack) + slack;
    }
};

struct FineScaleResult {
    SpaceTimeField u;
    FineGridLayout layout;
    EnergyReport energy;
    double max_residual = 0.0;
    long total_iterations = 0;
};

namespace detail {

// One assembled time-slice operator of the march: the Dirichlet flux
// operator plus, in 1D, the factored tridiagonal of (mass + L).
struct MarchOperator {
    MacroOperator op;
    TridiagonalSolver direct;  // 1D only
    MarchOperator(int dim, int n_x, std::array<double, 2> lo, std::array<double, 2> hi)
        : op(dim, n_x, lo, hi) {}
};

inline std::vector<MatN> sample_macro_coefficient(const CoefficientField& field,
                                                  const MacroDomain& dom, int n_x, double h,
                                                  double eps, double phase) {
    const int w = n_x + 2;
    std::vector<MatN> nodes(dom.dim == 1 ? static_cast<std::size_t>(w)
                                         : static_cast<std::size_t>(w) * w);
    if (dom.dim == 1) {
        for (int p = 0; p < w; ++p) {
            const double x = dom.lo[0] + p * h;
            nodes[p] = field.evaluate(x / eps, phase);
        }
    } else {
        for (int p1 = 0; p1 < w; ++p1)
            for (int p2 = 0; p2 < w; ++p2) {
                const double y[2] = {(dom.lo[0] + p1 * h) / eps, (dom.lo[1] + p2 * h) / eps};
                nodes[static_cast<std::size_t>(p1) * w + p2] =
                    field.evaluate(std::span<const double>(y, 2), phase);
            }
    }
    return nodes;
}

}  // namespace detail

inline FineScaleResult solve_finescale(const CoefficientField& field, const FineScaleConfig& cfg,
                                       std::span<StepObserver* const> observers = {}) {
    if (field.dim() != cfg.dom.dim)
        throw std::invalid_argument("coefficient dimension does not match the domain");
    const FineGridLayout lay = plan_fine_run(cfg);
    const MacroDomain& dom = cfg.dom;
    const double eps = cfg.epsilon.value();

    MacroDomain run_dom = dom;  // the grid the march actually uses
    run_dom.n_x = lay.n_x;

    FineScaleResult out;
    out.layout = lay;
    out.u = SpaceTimeField::like(run_dom);

    const std::size_t n = run_dom.interior_size();
    const double mass = lay.eps_q / lay.dt;
    const double vol = run_dom.dim == 1 ? lay.h : lay.h * lay.h;

    auto phase_of = [&](long n_step) {
        const double raw = static_cast<double>(n_step) * lay.dt / lay.micro_period;
        return raw - std::floor(raw);
    };

    // ---- operator cache ---------------------------------------------------
    // Reassembling a(x/eps, t/eps^r) every step is wasted work when the
    // coefficient has no s-dependence (one operator) or when the step phase
    // repeats exactly every n_t_per_period steps (dyadic eps^r and dt).
    const bool s_independent = !field.depends_on_s();
    long cache_period = 0;
    if (!s_independent) {
        const long p = cfg.n_t_per_period;
        bool periodic = true;
        for (long probe : {p, 2 * p, lay.steps, lay.steps - 1, 7 * p + 3}) {
            if (probe <= 0) continue;
            if (phase_of(probe) != phase_of(probe % p)) {
                periodic = false;
                break;
            }
        }
        if (periodic) cache_period = p;
    }

    std::vector<std::unique_ptr<detail::MarchOperator>> cache;
    double c0_faces = 0.0;
    bool c0_set = false;
    auto make_operator = [&](double phase) {
        auto mo = std::make_unique<detail::MarchOperator>(run_dom.dim, lay.n_x, run_dom.lo,
                                                          run_dom.hi);
        mo->op.set_coefficient(
            detail::sample_macro_coefficient(field, run_dom, lay.n_x, lay.h, eps, phase));
        if (run_dom.dim == 1) {
            std::vector<double> lower(n), diag(n), upper(n);
            mo->op.tridiagonal(mass, lower, diag, upper);
            mo->direct.factor(lower, diag, upper);
        }
        const double c0 = mo->op.min_face_coercivity();
        if (!c0_set || c0 < c0_faces) {
            c0_faces = c0;
            c0_set = true;
        }
        return mo;
    };
    if (s_independent) {
        cache.push_back(make_operator(0.0));
    } else if (cache_period > 0) {
        cache.reserve(cache_period);
        for (long c = 0; c < cache_period; ++c)
            cache.push_back(make_operator(phase_of(c == 0 ? cache_period : c)));
        // slot c holds the operator for steps with n % cache_period == c,
        // i.e. phase(c) (slot 0 wraps to the full period)
    }

    // ---- initial state ----------------------------------------------------
    std::vector<double> u(n), u_next(n), rhs(n), lu(n), f_now(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (run_dom.dim == 1) {
            const double x[1] = {run_dom.coord(0, static_cast<int>(i))};
            u[i] = dom.u0.valid() ? dom.u0(std::span<const double>(x, 1)) : 0.0;
        } else {
            const double x[2] = {run_dom.coord(0, static_cast<int>(i) / lay.n_x),
                                 run_dom.coord(1, static_cast<int>(i) % lay.n_x)};
            u[i] = dom.u0.valid() ? dom.u0(std::span<const double>(x, 2)) : 0.0;
        }
    }

    const std::size_t t_slot = static_cast<std::size_t>(run_dom.dim);
    const bool f_static = !dom.f.depends_on(t_slot);
    auto sample_f = [&](double t) {
        if (run_dom.dim == 1) {
            for (std::size_t i = 0; i < n; ++i) {
                const double args[2] = {run_dom.coord(0, static_cast<int>(i)), t};
                f_now[i] = dom.f(std::span<const double>(args, 2));
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double args[3] = {run_dom.coord(0, static_cast<int>(i) / lay.n_x),
                                        run_dom.coord(1, static_cast<int>(i) % lay.n_x), t};
                f_now[i] = dom.f(std::span<const double>(args, 3));
            }
        }
    };
    if (f_static) sample_f(0.0);

    // ---- energy ledger ----------------------------------------------------
    EnergyReport& en = out.energy;
    en.eps_q = lay.eps_q;
    en.poincare_c2 = poincare_constant(run_dom);
    double u0_sq = 0.0;
    for (double v : u) u0_sq += v * v;
    en.u0_sq = u0_sq * vol;
    en.term_init = lay.eps_q * en.u0_sq;

    // output slice 0 and observer start
    std::copy(u.begin(), u.end(), out.u.slice(0).begin());
    for (StepObserver* obs : observers)
        if (obs) obs->start(lay, 0.5 * lay.dt, u);

    const long slice_stride = lay.steps / (dom.n_t - 1);
    const int max_iter = static_cast<int>(20 * n + 200);

    std::unique_ptr<detail::MarchOperator> transient;  // uncached assembly
    for (long step = 1; step <= lay.steps; ++step) {
        const double t_new = (step == lay.steps)
                                 ? dom.T
                                 : static_cast<double>(step) * lay.dt;
        const double phase = phase_of(step);

        detail::MarchOperator* mo;
        if (s_independent)
            mo = cache[0].get();
        else if (cache_period > 0)
            mo = cache[static_cast<std::size_t>(step % cache_period)].get();
        else {
            transient = make_operator(phase);
            mo = transient.get();
        }

        if (!f_static) sample_f(t_new);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = mass * u[i] + f_now[i];

        LinearSolveReport rep;
        if (run_dom.dim == 1) {
            u_next = rhs;
            mo->direct.solve(u_next);
            rep.solver = "thomas";
            rep.iterations = 1;
        } else {
            auto apply = [&](std::span<const double> x, std::span<double> y) {
                mo->op.apply(x, y);
                for (std::size_t i = 0; i < n; ++i) y[i] += mass * x[i];
            };
            if (mo->op.diagonal())
                rep = conjugate_gradient(apply, rhs, std::span<double>(u_next), cfg.tol_step,
                                         max_iter);
            else
                rep = bicgstab(apply, rhs, std::span<double>(u_next), cfg.tol_step, max_iter);
        }

        // one true matvec per step: residual check + diffusion/energy terms
        mo->op.apply(u_next, lu);
        double res_sq = 0.0, rhs_sq = 0.0, a_form = 0.0, dot_fu = 0.0, jump_sq = 0.0,
               u_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r_i = mass * u_next[i] + lu[i] - rhs[i];
            res_sq += r_i * r_i;
            rhs_sq += rhs[i] * rhs[i];
            a_form += lu[i] * u_next[i];
            dot_fu += f_now[i] * u_next[i];
            const double d = u_next[i] - u[i];
            jump_sq += d * d;
            u_sq += u_next[i] * u_next[i];
        }
        rep.residual = rhs_sq > 0.0 ? std::sqrt(res_sq / rhs_sq) : std::sqrt(res_sq);
        if (rep.residual > cfg.tol_step)
            throw SolverDiverged("fine-scale step " + std::to_string(step) +
                                     " missed its tolerance",
                                 rep);
        out.max_residual = std::max(out.max_residual, rep.residual);
        out.total_iterations += rep.iterations;

        en.term_diffusion += 2.0 * lay.dt * a_form * vol;
        en.term_source += 2.0 * lay.dt * dot_fu * vol;
        en.term_jump += lay.eps_q * jump_sq * vol;
        en.grad_l2t += lay.dt * mo->op.dirichlet_form(u_next);
        double f_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) f_sq += f_now[i] * f_now[i];
        en.f_l2t += lay.dt * f_sq * vol;
        if (step == lay.steps) en.term_final = lay.eps_q * u_sq * vol;

        u.swap(u_next);

        const double w = (step == lay.steps) ? 0.5 * lay.dt : lay.dt;
        for (StepObserver* obs : observers)
            if (obs) obs->step(t_new, phase, w, u);

        if (step % slice_stride == 0)
            std::copy(u.begin(), u.end(),
                      out.u.slice(static_cast<int>(step / slice_stride)).begin());
    }

    en.c0_faces = c0_faces;
    for (StepObserver* obs : observers)
        if (obs) obs->finish();
    return out;
}

// Validates the accumulated energy identity and the a-priori bound
//   sum dt |u|_{H1}^2 <= eps^q C0^{-1} ||u0||^2 + C0^{-2} C2 ||f||^2.
struct EnergyCheck {
    double defect = 0.0;
    double identity_error = 0.0;
    double apriori_lhs = 0.0;
    double apriori_rhs = 0.0;
    bool defect_ok = false;
    bool apriori_ok = false;
    bool pass() const { return defect_ok && apriori_ok; }
};

inline EnergyCheck energy_identity_check(const EnergyReport& en, double defect_floor = -1e-8,
                                         double slack = 1e-8) {
    EnergyCheck c;
    c.defect = en.defect();
    c.identity_error = en.identity_error();
    c.apriori_lhs = en.apriori_lhs();
    c.apriori_rhs = en.apriori_rhs();
    c.defect_ok = c.defect >= defect_floor;
    c.apriori_ok = en.apriori_ok(slack);
    return c;
}

}  // namespace homog
