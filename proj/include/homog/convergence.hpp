#pragma once

// Numerical evaluation of the convergence pairings: weak pairings against
// battery test functions, oscillatory space-time pairings accumulated online
// while the fine-scale march runs, their limit values assembled from the
// correctors, and least-squares decay-exponent fits over an epsilon family.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/coefficient.hpp"
#include "homog/expression.hpp"
#include "homog/finescale.hpp"
#include "homog/macro.hpp"
#include "homog/testfunctions.hpp"

namespace homog {

namespace detail {

inline MacroDomain domain_of(const SpaceTimeField& u) {
    MacroDomain dom;
    dom.dim = u.dim;
    dom.lo = u.lo;
    dom.hi = u.hi;
    dom.T = u.T;
    dom.n_x = u.n_x;
    dom.n_t = u.n_t;
    return dom;
}

// v1 sampled at the interior nodes (dom.n_x per axis, row-major)
inline std::vector<double> sample_v1(const Expression& v1, const MacroDomain& dom) {
    const int n = dom.n_x;
    std::vector<double> out(dom.interior_size());
    if (dom.dim == 1) {
        for (int i = 0; i < n; ++i) {
            const double x[1] = {dom.coord(0, i)};
            out[static_cast<std::size_t>(i)] = v1(std::span<const double>(x, 1));
        }
    } else {
        std::size_t idx = 0;
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2, ++idx) {
                const double x[2] = {dom.coord(0, i1), dom.coord(1, i2)};
                out[idx] = v1(std::span<const double>(x, 2));
            }
    }
    return out;
}

// sum_i u_i w_i * cell_volume
inline double weighted_sum(std::span<const double> u, std::span<const double> w, double vol) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * w[i];
    return s * vol;
}

// sum over interior nodes of w_i * du/dx_d by centered differences with the
// zero boundary ring; accumulates one value per axis into g
inline void gradient_weighted_sums(std::span<const double> u, std::span<const double> w, int dim,
                                   int n, const std::array<double, 2>& h, double* g) {
    if (dim == 1) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double up = i + 1 < n ? u[static_cast<std::size_t>(i + 1)] : 0.0;
            const double um = i > 0 ? u[static_cast<std::size_t>(i - 1)] : 0.0;
            sum += w[static_cast<std::size_t>(i)] * (up - um);
        }
        g[0] += sum / (2.0 * h[0]);
        return;
    }
    double s1 = 0.0, s2 = 0.0;
    for (int i1 = 0; i1 < n; ++i1)
        for (int i2 = 0; i2 < n; ++i2) {
            const std::size_t idx =
                static_cast<std::size_t>(i1) * static_cast<std::size_t>(n) +
                static_cast<std::size_t>(i2);
            const double wv = w[idx];
            if (wv == 0.0) continue;
            const double up1 = i1 + 1 < n ? u[idx + static_cast<std::size_t>(n)] : 0.0;
            const double um1 = i1 > 0 ? u[idx - static_cast<std::size_t>(n)] : 0.0;
            const double up2 = i2 + 1 < n ? u[idx + 1] : 0.0;
            const double um2 = i2 > 0 ? u[idx - 1] : 0.0;
            s1 += wv * (up1 - um1);
            s2 += wv * (up2 - um2);
        }
    g[0] += s1 / (2.0 * h[0]);
    g[1] += s2 / (2.0 * h[1]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// post-hoc weak pairing on stored output slices
// ---------------------------------------------------------------------------

// integral of u(x,t) v1(x) c1(t) over space-time: trapezoid in t over the
// stored slices, node sum times cell volume in x
inline double weak_pairing(const SpaceTimeField& u, const Expression& v1, const TimeWindow& c1) {
    const MacroDomain dom = detail::domain_of(u);
    const auto w = detail::sample_v1(v1, dom);
    double vol = 1.0;
    for (int d = 0; d < u.dim; ++d) vol *= dom.h(d);
    const double dt = u.T / (u.n_t - 1);
    double acc = 0.0;
    for (int k = 0; k < u.n_t; ++k) {
        const double tw = (k == 0 || k == u.n_t - 1) ? 0.5 * dt : dt;
        const double c = c1.c1(u.slice_time(k));
        if (c == 0.0) continue;
        acc += tw * c * detail::weighted_sum(u.slice(k), w, vol);
    }
    return acc;
}

// |<u_a - u_b, v1 c1>| evaluated grid-by-grid (the pairing is linear in u, so
// each field is integrated on its own grid; time grids must match)
inline double weak_pairing_gap(const SpaceTimeField& u_a, const SpaceTimeField& u_b,
                               const TestFunctionSpec& test) {
    if (u_a.dim != u_b.dim || u_a.n_t != u_b.n_t)
        throw std::invalid_argument("weak_pairing_gap: fields must share dim and n_t");
    return std::abs(weak_pairing(u_a, test.v1, test.c1) - weak_pairing(u_b, test.v1, test.c1));
}

inline std::vector<double> weak_pairing_gaps(const SpaceTimeField& u_a, const SpaceTimeField& u_b,
                                             const std::vector<TestFunctionSpec>& battery) {
    std::vector<double> gaps;
    gaps.reserve(battery.size());
    for (const auto& t : battery) gaps.push_back(weak_pairing_gap(u_a, u_b, t));
    return gaps;
}

// ---------------------------------------------------------------------------
// online observers (accumulated during the fine-scale march)
// ---------------------------------------------------------------------------

// integral of u_eps(x,t) v1(x) d/dt[ eps^r c1(t) c2(t/eps^r) ] over space-time;
// vanishes in the limit because the capacity term is asymptotically negligible
class VillkorObserver final : public StepObserver {
  public:
    VillkorObserver(const MacroDomain& dom, double epsilon, const TestFunctionSpec& test)
        : dom_(dom), eps_(epsilon), test_(test), c2_ds_(test.c2.derivative(0)) {}

    void start(const FineGridLayout& lay, double weight, std::span<const double> u0) override {
        MacroDomain fine = dom_;
        fine.n_x = lay.n_x;
        w_ = detail::sample_v1(test_.v1, fine);
        vol_ = 1.0;
        for (int d = 0; d < dom_.dim; ++d) vol_ *= lay.h;
        micro_ = lay.micro_period;
        acc_ = weight * rate(0.0, 0.0) * detail::weighted_sum(u0, w_, vol_);
    }

    void step(double t, double phase, double weight, std::span<const double> u) override {
        const double r = rate(t, phase);
        if (r == 0.0) return;
        acc_ += weight * r * detail::weighted_sum(u, w_, vol_);
    }

    double value() const { return acc_; }

  private:
    double rate(double t, double phase) const {
        const double s[1] = {phase};
        const std::span<const double> sv(s, 1);
        return micro_ * test_.c1.c1_dt(t) * test_.c2(sv) + test_.c1.c1(t) * c2_ds_(sv);
    }

    MacroDomain dom_;
    double eps_;
    TestFunctionSpec test_;
    Expression c2_ds_;
    std::vector<double> w_;
    double vol_ = 0.0;
    double micro_ = 0.0;
    double acc_ = 0.0;
};

namespace detail {

// v1(x) v2(x/eps) on the interior nodes
inline std::vector<double> sample_oscillatory_weight(const MacroDomain& dom, double eps,
                                                     const Expression& v1, const Expression& v2) {
    const int n = dom.n_x;
    std::vector<double> w(dom.interior_size());
    if (dom.dim == 1) {
        for (int i = 0; i < n; ++i) {
            const double x[1] = {dom.coord(0, i)};
            const double y[1] = {wrap_unit(x[0] / eps)};
            w[static_cast<std::size_t>(i)] =
                v1(std::span<const double>(x, 1)) * v2(std::span<const double>(y, 1));
        }
    } else {
        std::size_t idx = 0;
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2, ++idx) {
                const double x[2] = {dom.coord(0, i1), dom.coord(1, i2)};
                const double y[2] = {wrap_unit(x[0] / eps), wrap_unit(x[1] / eps)};
                w[idx] = v1(std::span<const double>(x, 2)) * v2(std::span<const double>(y, 2));
            }
    }
    return w;
}

}  // namespace detail

// per-axis integral of du_eps/dx_d v1(x) v2(x/eps) c1(t) c2(t/eps^r) over
// space-time; gradients by centered differences with the zero boundary ring
class TwoScaleObserver final : public StepObserver {
  public:
    TwoScaleObserver(const MacroDomain& dom, double epsilon, const TestFunctionSpec& test)
        : dom_(dom), eps_(epsilon), test_(test) {}

    void start(const FineGridLayout& lay, double weight, std::span<const double> u0) override {
        MacroDomain fine = dom_;
        fine.n_x = lay.n_x;
        n_ = lay.n_x;
        h_ = {lay.h, lay.h};
        w_ = detail::sample_oscillatory_weight(fine, eps_, test_.v1, test_.v2);
        vol_ = 1.0;
        for (int d = 0; d < dom_.dim; ++d) vol_ *= lay.h;
        acc_.assign(static_cast<std::size_t>(dom_.dim), 0.0);
        accumulate(0.0, 0.0, weight, u0);
    }

    void step(double t, double phase, double weight, std::span<const double> u) override {
        accumulate(t, phase, weight, u);
    }

    const std::vector<double>& value() const { return acc_; }

  private:
    void accumulate(double t, double phase, double weight, std::span<const double> u) {
        const double s[1] = {phase};
        const double c = test_.c1.c1(t) * test_.c2(std::span<const double>(s, 1));
        if (c == 0.0) return;
        std::array<double, 2> g{0.0, 0.0};
        detail::gradient_weighted_sums(u, w_, dom_.dim, n_, h_, g.data());
        for (int d = 0; d < dom_.dim; ++d)
            acc_[static_cast<std::size_t>(d)] += weight * c * g[static_cast<std::size_t>(d)] * vol_;
    }

    MacroDomain dom_;
    double eps_;
    TestFunctionSpec test_;
    int n_ = 0;
    std::array<double, 2> h_{};
    std::vector<double> w_;
    double vol_ = 0.0;
    std::vector<double> acc_;
};

// integral of eps^{-1} u_eps(x,t) v1(x) v2(x/eps) c1(t) c2(t/eps^r); finite in
// the limit only because v2 has zero mean
class VeryWeakObserver final : public StepObserver {
  public:
    VeryWeakObserver(const MacroDomain& dom, double epsilon, const TestFunctionSpec& test)
        : dom_(dom), eps_(epsilon), test_(test) {}

    void start(const FineGridLayout& lay, double weight, std::span<const double> u0) override {
        MacroDomain fine = dom_;
        fine.n_x = lay.n_x;
        w_ = detail::sample_oscillatory_weight(fine, eps_, test_.v1, test_.v2);
        vol_ = 1.0;
        for (int d = 0; d < dom_.dim; ++d) vol_ *= lay.h;
        acc_ = weight * factor(0.0, 0.0) * detail::weighted_sum(u0, w_, vol_);
    }

    void step(double t, double phase, double weight, std::span<const double> u) override {
        const double c = factor(t, phase);
        if (c == 0.0) return;
        acc_ += weight * c * detail::weighted_sum(u, w_, vol_);
    }

    double value() const { return acc_; }

  private:
    double factor(double t, double phase) const {
        const double s[1] = {phase};
        return test_.c1.c1(t) * test_.c2(std::span<const double>(s, 1)) / eps_;
    }

    MacroDomain dom_;
    double eps_;
    TestFunctionSpec test_;
    std::vector<double> w_;
    double vol_ = 0.0;
    double acc_ = 0.0;
};

// ---------------------------------------------------------------------------
// limit values assembled from the correctors and the homogenized solution
// ---------------------------------------------------------------------------

// cell-side moments of the corrector against v2(y) c2(s):
//   p0      = integral of v2 c2 over Y x S
//   g[d][j] = integral of d(chi_j)/d(y_d) v2 c2
//   k[j]    = integral of chi_j v2 c2
struct CellMoments {
    int dim = 1;
    double p0 = 0.0;
    std::array<std::array<double, 2>, 2> g{};
    std::array<double, 2> k{};
};

inline CellMoments cell_moments(const CorrectorField& chi, const Expression& v2,
                                const Expression& c2) {
    CellMoments m;
    m.dim = chi.dim;
    const int dim = chi.dim;
    const int n = chi.n_y;
    const double hy = 1.0 / n;
    const std::size_t slice_nodes = chi.nodes();
    // v2 on the periodic cell grid
    std::vector<double> v2n(slice_nodes);
    if (dim == 1) {
        for (int i = 0; i < n; ++i) {
            const double y[1] = {i * hy};
            v2n[static_cast<std::size_t>(i)] = v2(std::span<const double>(y, 1));
        }
    } else {
        std::size_t idx = 0;
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2, ++idx) {
                const double y[2] = {i1 * hy, i2 * hy};
                v2n[idx] = v2(std::span<const double>(y, 2));
            }
    }
    double vol = 1.0;
    for (int d = 0; d < dim; ++d) vol *= hy;
    double v2_sum = 0.0;
    for (double v : v2n) v2_sum += v;

    // an s-independent corrector is stored as one slice; c2 still needs a
    // resolved s-quadrature
    const int n_s = chi.n_s == 1 ? 64 : chi.n_s;
    double c2_mean = 0.0;
    for (int ks = 0; ks < n_s; ++ks) {
        const double s[1] = {static_cast<double>(ks) / n_s};
        c2_mean += c2(std::span<const double>(s, 1));
    }
    c2_mean /= n_s;
    m.p0 = v2_sum * vol * c2_mean;

    auto wrap = [n](int i) { return (i % n + n) % n; };
    for (int j = 0; j < dim; ++j) {
        for (int ks = 0; ks < n_s; ++ks) {
            const int slice_idx = chi.n_s == 1 ? 0 : ks;
            const auto sl = chi.slice(j, slice_idx);
            const double s[1] = {static_cast<double>(ks) / n_s};
            const double c2s = c2(std::span<const double>(s, 1)) / n_s;
            double ksum = 0.0;
            std::array<double, 2> gsum{};
            if (dim == 1) {
                for (int i = 0; i < n; ++i) {
                    const double w = v2n[static_cast<std::size_t>(i)];
                    ksum += sl[static_cast<std::size_t>(i)] * w;
                    gsum[0] += w *
                               (sl[static_cast<std::size_t>(wrap(i + 1))] -
                                sl[static_cast<std::size_t>(wrap(i - 1))]) /
                               (2.0 * hy);
                }
            } else {
                for (int i1 = 0; i1 < n; ++i1)
                    for (int i2 = 0; i2 < n; ++i2) {
                        const std::size_t idx =
                            static_cast<std::size_t>(i1) * static_cast<std::size_t>(n) +
                            static_cast<std::size_t>(i2);
                        const double w = v2n[idx];
                        ksum += sl[idx] * w;
                        const std::size_t ip1 =
                            static_cast<std::size_t>(wrap(i1 + 1)) * static_cast<std::size_t>(n) +
                            static_cast<std::size_t>(i2);
                        const std::size_t im1 =
                            static_cast<std::size_t>(wrap(i1 - 1)) * static_cast<std::size_t>(n) +
                            static_cast<std::size_t>(i2);
                        const std::size_t ip2 =
                            static_cast<std::size_t>(i1) * static_cast<std::size_t>(n) +
                            static_cast<std::size_t>(wrap(i2 + 1));
                        const std::size_t im2 =
                            static_cast<std::size_t>(i1) * static_cast<std::size_t>(n) +
                            static_cast<std::size_t>(wrap(i2 - 1));
                        gsum[0] += w * (sl[ip1] - sl[im1]) / (2.0 * hy);
                        gsum[1] += w * (sl[ip2] - sl[im2]) / (2.0 * hy);
                    }
            }
            m.k[static_cast<std::size_t>(j)] += ksum * vol * c2s;
            for (int d = 0; d < dim; ++d)
                m.g[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)] +=
                    gsum[static_cast<std::size_t>(d)] * vol * c2s;
        }
    }
    return m;
}

// macro-side moments B_j = integral of d(u)/d(x_j) v1 c1 over Omega x (0,T)
inline std::array<double, 2> macro_gradient_moments(const SpaceTimeField& u, const Expression& v1,
                                                    const TimeWindow& c1) {
    const MacroDomain dom = detail::domain_of(u);
    const auto w = detail::sample_v1(v1, dom);
    std::array<double, 2> h{};
    double vol = 1.0;
    for (int d = 0; d < u.dim; ++d) {
        h[static_cast<std::size_t>(d)] = dom.h(d);
        vol *= dom.h(d);
    }
    const double dt = u.T / (u.n_t - 1);
    std::array<double, 2> acc{};
    for (int k = 0; k < u.n_t; ++k) {
        const double c = c1.c1(u.slice_time(k));
        if (c == 0.0) continue;
        const double tw = ((k == 0 || k == u.n_t - 1) ? 0.5 * dt : dt) * c;
        std::array<double, 2> g{0.0, 0.0};
        detail::gradient_weighted_sums(u.slice(k), w, u.dim, u.n_x, h, g.data());
        for (int d = 0; d < u.dim; ++d)
            acc[static_cast<std::size_t>(d)] += tw * g[static_cast<std::size_t>(d)] * vol;
    }
    return acc;
}

// limit of the two-scale gradient pairing: rhs_d = p0 B_d + sum_j g[d][j] B_j
inline std::vector<double> two_scale_limit(const CellMoments& m, const std::array<double, 2>& B) {
    std::vector<double> rhs(static_cast<std::size_t>(m.dim), 0.0);
    for (int d = 0; d < m.dim; ++d) {
        double v = m.p0 * B[static_cast<std::size_t>(d)];
        for (int j = 0; j < m.dim; ++j)
            v += m.g[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)] *
                 B[static_cast<std::size_t>(j)];
        rhs[static_cast<std::size_t>(d)] = v;
    }
    return rhs;
}

// limit of the very-weak pairing: sum_j k[j] * B_j
inline double very_weak_limit(const CellMoments& m, const std::array<double, 2>& B) {
    double v = 0.0;
    for (int j = 0; j < m.dim; ++j)
        v += m.k[static_cast<std::size_t>(j)] * B[static_cast<std::size_t>(j)];
    return v;
}

// ---------------------------------------------------------------------------
// decay-exponent fit
// ---------------------------------------------------------------------------

// least-squares slope p of log|v| against log(eps): values behaving like
// C eps^p fit to exponent p. Non-finite or zero values are excluded; fewer
// than three usable points is an error.
inline double fit_decay_exponent(std::span<const double> eps, std::span<const double> values) {
    if (eps.size() != values.size())
        throw std::invalid_argument("fit_decay_exponent: size mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double v = std::abs(values[i]);
        if (!(v > 0.0) || !std::isfinite(v)) continue;
        lx.push_back(std::log(eps[i]));
        ly.push_back(std::log(v));
    }
    if (lx.size() < 3)
        throw ValidationError("fit_decay_exponent: need at least 3 usable (epsilon, value) pairs");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (sxx == 0.0) throw ValidationError("fit_decay_exponent: all epsilon values coincide");
    return sxy / sxx;
}

}  // namespace homog
