#pragma once

// Admissible test functions for the convergence pairings: v1 vanishing on
// the boundary, a smooth time bump c1 supported strictly inside (0,T), a
// zero-mean Y-periodic v2, and an S-periodic c2.

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/expression.hpp"
#include "homog/macro.hpp"

namespace homog {

// smooth bump on (t0, t1), zero outside, normalized to peak 1:
// c1(t) = exp(4 - 1/(tau (1-tau))), tau = (t - t0)/(t1 - t0)
struct TimeWindow {
    double t0 = 0.0;
    double t1 = 1.0;

    double c1(double t) const {
        const double tau = (t - t0) / (t1 - t0);
        if (tau <= 0.0 || tau >= 1.0) return 0.0;
        return std::exp(4.0 - 1.0 / (tau * (1.0 - tau)));
    }
    double c1_dt(double t) const {
        const double tau = (t - t0) / (t1 - t0);
        if (tau <= 0.0 || tau >= 1.0) return 0.0;
        const double p = tau * (1.0 - tau);
        return c1(t) * (1.0 - 2.0 * tau) / (p * p) / (t1 - t0);
    }
};

struct TestFunctionSpec {
    std::string name;
    Expression v1;  // in x (vanishes on the boundary)
    TimeWindow c1;
    Expression v2;  // in y (zero mean)
    Expression c2;  // in s (1-periodic)
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, p);
}

}  // namespace detail

inline std::vector<std::string> v2_vars(int dim) {
    return dim == 1 ? std::vector<std::string>{"y"} : std::vector<std::string>{"y1", "y2"};
}

// throws ValidationError unless the Y-mean of v2 vanishes identically
inline void require_zero_mean(const Expression& v2, int dim) {
    std::vector<std::size_t> pvars(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) pvars[static_cast<std::size_t>(k)] = k;
    const double mean = v2.exact_mean(pvars);
    if (std::abs(mean) > 1e-12)
        throw ValidationError("v2 must have zero mean over the unit cell; '" + v2.text() +
                              "' has mean " + detail::fmt_double(mean));
}

// numerical boundary check: v1 must vanish on every face of the box
inline void require_boundary_zero(const Expression& v1, const MacroDomain& dom,
                                  int samples = 64) {
    double interior_max = 0.0;
    if (dom.dim == 1) {
        for (int i = 1; i < samples; ++i) {
            const double x[1] = {dom.lo[0] + (dom.hi[0] - dom.lo[0]) * i / samples};
            interior_max = std::max(interior_max, std::abs(v1(std::span<const double>(x, 1))));
        }
        for (double xb : {dom.lo[0], dom.hi[0]}) {
            const double x[1] = {xb};
            if (std::abs(v1(std::span<const double>(x, 1))) > 1e-9 * (1.0 + interior_max))
                throw ValidationError("v1 must vanish on the boundary: '" + v1.text() + "'");
        }
        return;
    }
    for (int i = 0; i <= samples; ++i)
        for (int j = 0; j <= samples; ++j) {
            const double x1 = dom.lo[0] + (dom.hi[0] - dom.lo[0]) * i / samples;
            const double x2 = dom.lo[1] + (dom.hi[1] - dom.lo[1]) * j / samples;
            const double x[2] = {x1, x2};
            const double v = std::abs(v1(std::span<const double>(x, 2)));
            const bool on_boundary = i == 0 || i == samples || j == 0 || j == samples;
            if (!on_boundary)
                interior_max = std::max(interior_max, v);
        }
    for (int i = 0; i <= samples; ++i)
        for (int j = 0; j <= samples; ++j) {
            const bool on_boundary = i == 0 || i == samples || j == 0 || j == samples;
            if (!on_boundary) continue;
            const double x[2] = {dom.lo[0] + (dom.hi[0] - dom.lo[0]) * i / samples,
                                 dom.lo[1] + (dom.hi[1] - dom.lo[1]) * j / samples};
            if (std::abs(v1(std::span<const double>(x, 2))) > 1e-9 * (1.0 + interior_max))
                throw ValidationError("v1 must vanish on the boundary: '" + v1.text() + "'");
        }
}

inline TestFunctionSpec make_test(const MacroDomain& dom, std::string name,
                                  const std::string& v1_text, TimeWindow window,
                                  const std::string& v2_text, const std::string& c2_text) {
    if (!(0.0 < window.t0 && window.t0 < window.t1 && window.t1 < dom.T))
        throw ValidationError("c1 window must satisfy 0 < t0 < t1 < T");
    TestFunctionSpec t;
    t.name = std::move(name);
    t.v1 = Expression::parse(v1_text, MacroDomain::u0_vars(dom.dim), MacroDomain::x_aliases(dom.dim));
    require_boundary_zero(t.v1, dom);
    t.c1 = window;
    const auto yv = v2_vars(dom.dim);
    std::map<std::string, std::size_t> y_alias =
        dom.dim == 1 ? std::map<std::string, std::size_t>{{"y1", 0}}
                     : std::map<std::string, std::size_t>{{"y", 0}};
    t.v2 = Expression::parse(v2_text, yv, y_alias);
    std::vector<std::size_t> y_slots(yv.size());
    for (std::size_t k = 0; k < yv.size(); ++k) y_slots[k] = k;
    t.v2.require_periodic(y_slots);
    require_zero_mean(t.v2, dom.dim);
    t.c2 = Expression::parse(c2_text, {"s"});
    const std::vector<std::size_t> s_slot{0};
    t.c2.require_periodic(s_slot);
    return t;
}

// Four smooth tests whose v1 all pair non-trivially with symmetric profiles;
// two share a v1 and differ in the time window.
inline std::vector<TestFunctionSpec> default_battery(const MacroDomain& dom) {
    auto xhat = [&](int d) {
        // (x_d - lo_d)/L_d as expression text
        const std::string var = dom.dim == 1 ? "x" : "x" + std::to_string(d + 1);
        return "(" + var + " - " + detail::fmt_double(dom.lo[d]) + ")/" +
               detail::fmt_double(dom.hi[d] - dom.lo[d]);
    };
    auto mode = [&](int k) {
        std::string s = "sin(" + std::to_string(k) + "*pi*" + xhat(0) + ")";
        if (dom.dim == 2) s += "*sin(" + std::to_string(k) + "*pi*" + xhat(1) + ")";
        return s;
    };
    const std::string v2 = dom.dim == 1 ? "sin(2*pi*y)" : "sin(2*pi*y1)";
    const std::string c2 = "1 + 0.5*cos(2*pi*s)";
    const double T = dom.T;
    std::vector<TestFunctionSpec> battery;
    battery.push_back(
        make_test(dom, "mode1-early", mode(1), TimeWindow{0.2 * T, 0.8 * T}, v2, c2));
    battery.push_back(
        make_test(dom, "mode1-late", mode(1), TimeWindow{0.5 * T, 0.9 * T}, v2, c2));
    battery.push_back(
        make_test(dom, "mode3", mode(3), TimeWindow{0.2 * T, 0.8 * T}, v2, c2));
    battery.push_back(make_test(dom, "mode1-squared", mode(1) + "*" + mode(1),
                                TimeWindow{0.3 * T, 0.7 * T}, v2, c2));
    return battery;
}

}  // namespace homog
