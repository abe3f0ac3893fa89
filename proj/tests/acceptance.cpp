// Acceptance gate: exercises every published accuracy and behavior guarantee
// of the toolkit end to end. Each criterion prints exactly one line,
//   [PASS] criterion N: <label> (<seconds>)
// or [FAIL] with an indented list of problems, and the process exits nonzero
// if any criterion fails. Criteria 6-11 share one resonance study so the
// expensive fine-scale marches run once.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "homog/config.hpp"
#include "homog/convergence.hpp"
#include "homog/parallel.hpp"
#include "homog/pipeline.hpp"

using homog::CellGrid;
using homog::CellTolerances;
using homog::CoefficientField;
using homog::CorrectorField;
using homog::EffectiveTensor;
using homog::ExperimentConfig;
using homog::Expression;
using homog::HarnessData;
using homog::MacroDomain;
using homog::parse_config;
using homog::Regime;
using nlohmann::json;

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

struct Checker {
    std::vector<std::string> problems;

    void require(bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
    }
    void require_close(double got, double want, double tol, const std::string& what) {
        if (!(std::abs(got - want) <= tol))
            problems.push_back(what + ": got " + homog::format_double(got) + ", want " +
                               homog::format_double(want) + " +/- " + homog::format_double(tol));
    }
};

int g_failures = 0;

void criterion(int id, const std::string& label, double limit_s,
               const std::function<void(Checker&)>& body) {
    Checker c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.problems.push_back(std::string("unhandled exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0.0 && secs > limit_s)
        c.problems.push_back("runtime " + homog::format_double(secs) + " s exceeded the " +
                             homog::format_double(limit_s) + " s budget");
    const bool pass = c.problems.empty();
    std::printf("[%s] criterion %d: %s (%.2f s)\n", pass ? "PASS" : "FAIL", id, label.c_str(),
                secs);
    for (const auto& p : c.problems) std::printf("         - %s\n", p.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double effective_scalar(const CoefficientField& a, const CellGrid& grid, Regime g,
                        const CellTolerances& tol) {
    const CorrectorField chi = homog::solve_correctors(a, grid, g, tol);
    return homog::effective_tensor(a, chi, grid).scalar();
}

// reference for the oscillation-dominated limit: 1 / mean(1/a) by a dense
// periodic rectangle rule (spectrally accurate for smooth periodic data)
double harmonic_mean_quadrature(const std::function<double(double)>& a, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += 1.0 / a(static_cast<double>(i) / n);
    return static_cast<double>(n) / acc;
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(std::abs(v[i]) < std::abs(v[i - 1]))) return false;
    return v.size() >= 2;
}

std::string vec_str(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += homog::format_double(v[i]);
    }
    return s + "]";
}

// Fast traveling wave: the pattern crosses eight cells per oscillation
// period, so the oscillation-resolved tensor (about 1.827) separates cleanly
// from both the slice-resolved (sqrt(3)) and time-averaged (2) tensors.
json resonance_json() {
    return json::parse(R"json({
        "name": "resonance",
        "coefficient": {"dim": 1, "kind": "expression",
                        "entries": [["2 + sin(2*pi*(y - 8*s))"]]},
        "exponents": {"q": 1, "r": 3},
        "cell": {"n_y": 128, "n_s": 128},
        "macro": {"lo": [0], "hi": [1], "T": 0.25, "n_x": 255, "n_t": 33, "f": "2"},
        "epsilons": [0.125, 0.0625, 0.03125],
        "fine": {"n_x_per_cell": 16, "n_t_per_period": 32}
    })json");
}

// Amplitude-modulated coefficient: the conductivity magnitude breathes in
// time uniformly in space, which drives a spatially coherent solution ripple
// of size epsilon^(r-q) — the signal the capacity pairings must detect.
json modulated_json() {
    auto j = resonance_json();
    j["name"] = "modulated";
    j["coefficient"]["entries"][0][0] = "(2 + sin(2*pi*y)) * (1 + 0.5*cos(2*pi*s))";
    return j;
}

json veryweak_json() {
    return json::parse(R"json({
        "name": "very-weak",
        "coefficient": {"dim": 1, "kind": "expression", "entries": [["2 + sin(2*pi*y)"]]},
        "exponents": {"q": 1, "r": "5/2"},
        "cell": {"n_y": 256, "n_s": 2},
        "macro": {"lo": [0], "hi": [1], "T": 0.25, "n_x": 255, "n_t": 33, "f": "2"},
        "epsilons": [0.125, 0.0625, 0.03125],
        "fine": {"n_x_per_cell": 16, "n_t_per_period": 32}
    })json");
}

}  // namespace

int main() {
    homog::set_thread_count(4);
    std::printf("acceptance gate: %d worker threads\n", homog::thread_count());

    const CellTolerances ctol;

    // shared state across criteria 6-11, built lazily so each criterion can
    // stand alone if an earlier one fails
    std::optional<ExperimentConfig> cfg6;   // resonance family (traveling wave)
    std::optional<HarnessData> hd6;
    std::string csv6;     // first harness report, baseline for determinism
    std::string sum6;
    std::optional<ExperimentConfig> cfg8;   // modulated family (breathing magnitude)
    std::optional<HarnessData> hd8;
    std::optional<ExperimentConfig> cfg3;
    std::string csv3;     // first laminate tensor report

    auto ensure_resonance = [&]() {
        if (hd6) return;
        cfg6 = parse_config(resonance_json(), ".", "resonance");
        hd6 = homog::run_harness(*cfg6);
        const auto rep = homog::harness_report(*cfg6, *hd6);
        csv6 = rep.csv;
        sum6 = rep.summary.dump(2);
    };
    auto ensure_modulated = [&]() {
        if (hd8) return;
        cfg8 = parse_config(modulated_json(), ".", "modulated");
        hd8 = homog::run_harness(*cfg8);
    };

    // -----------------------------------------------------------------------
    criterion(1, "identity coefficient collapses to the identity tensor", 1.0, [&](Checker& c) {
        for (int dim : {1, 2}) {
            const auto a = CoefficientField::identity(dim);
            const CellGrid grid(dim, dim == 1 ? 64 : 32, 8);
            for (Regime g : {Regime::SubCritical, Regime::Critical, Regime::SuperCritical}) {
                const CorrectorField chi = homog::solve_correctors(a, grid, g, ctol);
                const EffectiveTensor b = homog::effective_tensor(a, chi, grid);
                const std::string tag =
                    std::to_string(dim) + "D/" + homog::regime_name(g);
                c.require(chi.max_abs() <= 1e-13,
                          tag + ": correctors are not identically zero (max " +
                              homog::format_double(chi.max_abs()) + ")");
                for (int i = 0; i < dim; ++i)
                    for (int j = 0; j < dim; ++j)
                        c.require_close(b.b(i, j), i == j ? 1.0 : 0.0, 1e-12,
                                        tag + ": entry b(" + std::to_string(i + 1) + "," +
                                            std::to_string(j + 1) + ")");
            }
        }
    });

    // -----------------------------------------------------------------------
    criterion(2, "1D oscillatory limit reproduces the harmonic mean at second order", 5.0,
              [&](Checker& c) {
        const auto a = CoefficientField::from_expressions(1, {{"2 + sin(2*pi*y)"}});
        const double ref = harmonic_mean_quadrature(
            [](double y) { return 2.0 + std::sin(2.0 * std::numbers::pi * y); }, 1 << 20);
        c.require_close(ref, kSqrt3, 1e-12, "quadrature reference vs sqrt(3)");

        std::vector<double> errs;
        double b512 = 0.0;
        for (int n : {128, 256, 512}) {
            const double b = effective_scalar(a, CellGrid(1, n, 2), Regime::SubCritical, ctol);
            errs.push_back(std::abs(b - ref));
            if (n == 512) b512 = b;
        }
        for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
            const double order = std::log2(errs[i] / errs[i + 1]);
            c.require(order >= 1.8 && order <= 2.2,
                      "refinement order " + homog::format_double(order) +
                          " outside [1.8, 2.2] (errors " + vec_str(errs) + ")");
        }
        c.require_close(b512, 1.7320508, 5e-5, "finest-grid value");
    });

    // -----------------------------------------------------------------------
    criterion(3, "2D laminate splits into harmonic and arithmetic means", 30.0, [&](Checker& c) {
        auto j = json::parse(R"json({
            "name": "laminate",
            "coefficient": {"dim": 2, "kind": "expression",
                            "entries": [["2 + sin(2*pi*y1)", "0"],
                                        ["0", "2 + sin(2*pi*y1)"]]},
            "exponents": {"q": 1, "r": "5/2"},
            "cell": {"n_y": 128, "n_s": 2},
            "macro": {"lo": [0, 0], "hi": [1, 1], "T": 0.25, "n_x": 31, "n_t": 5, "f": "1"}
        })json");
        cfg3 = parse_config(j, ".", "laminate");
        const CorrectorField chi =
            homog::solve_correctors(*cfg3->coefficient, cfg3->cell, cfg3->regime, ctol);
        const EffectiveTensor b = homog::effective_tensor(*cfg3->coefficient, chi, cfg3->cell);
        csv3 = homog::effective_csv(*cfg3, b, std::nullopt);
        c.require_close(b.b(0, 0), kSqrt3, 1e-3, "b11 vs the harmonic mean");
        c.require_close(b.b(1, 1), 2.0, 1e-3, "b22 vs the arithmetic mean");
        c.require(std::abs(b.b(0, 1)) <= 1e-8 && std::abs(b.b(1, 0)) <= 1e-8,
                  "off-diagonal entries exceed 1e-8");
    });

    // -----------------------------------------------------------------------
    criterion(4, "all three regimes agree for a time-independent coefficient", 60.0,
              [&](Checker& c) {
        const auto a = CoefficientField::from_expressions(1, {{"2 + sin(2*pi*y)"}});
        const CellGrid grid(1, 256, 128);
        std::vector<double> vals;
        for (Regime g : {Regime::SubCritical, Regime::Critical, Regime::SuperCritical})
            vals.push_back(effective_scalar(a, grid, g, ctol));
        for (std::size_t i = 0; i < vals.size(); ++i)
            for (std::size_t j = i + 1; j < vals.size(); ++j)
                c.require(std::abs(vals[i] - vals[j]) <= 1e-6,
                          "pairwise disagreement " + vec_str(vals));
    });

    // -----------------------------------------------------------------------
    criterion(5, "traveling wave separates the three regime values", 60.0, [&](Checker& c) {
        const auto a = CoefficientField::from_expressions(1, {{"2 + sin(2*pi*(y - s))"}});
        const CellGrid grid(1, 128, 128);
        const double b_sub = effective_scalar(a, grid, Regime::SubCritical, ctol);
        const double b_crit = effective_scalar(a, grid, Regime::Critical, ctol);
        const double b_super = effective_scalar(a, grid, Regime::SuperCritical, ctol);
        c.require_close(b_super, 2.0, 1e-8, "time-averaged value");
        c.require_close(b_sub, kSqrt3, 1e-3, "slice-resolved value");
        c.require(b_crit > kSqrt3 + 1e-3 && b_crit < 2.0 - 1e-3,
                  "oscillation-resolved value " + homog::format_double(b_crit) +
                      " is not strictly between the other regimes");
    });

    // -----------------------------------------------------------------------
    criterion(6, "resonant scaling is recognized by the weak pairings", 0.0, [&](Checker& c) {
        ensure_resonance();
        c.require(cfg6->regime == Regime::Critical, "exponents q=1, r=3 must resolve as critical");
        c.require(hd6->runs.size() == 3, "expected three epsilon runs");
        c.require(hd6->b_sub && hd6->b_super, "comparison tensors missing");
        const std::size_t last = hd6->runs.size() - 1;
        for (std::size_t t = 0; t < cfg6->battery.size(); ++t) {
            const std::string& name = cfg6->battery[t].name;
            const double gc = hd6->weak_gap[last][t];
            const double gs = hd6->weak_gap_sub[last][t];
            const double gp = hd6->weak_gap_super[last][t];
            c.require(gc <= 0.5 * gs,
                      name + ": gap vs oscillation-resolved solution (" +
                          homog::format_double(gc) + ") is not half of the slice-resolved gap (" +
                          homog::format_double(gs) + ")");
            c.require(gc <= 0.5 * gp,
                      name + ": gap vs oscillation-resolved solution (" +
                          homog::format_double(gc) + ") is not half of the time-averaged gap (" +
                          homog::format_double(gp) + ")");
        }
    });

    // -----------------------------------------------------------------------
    criterion(7, "every fine-scale run satisfies the energy contract", 0.0, [&](Checker& c) {
        ensure_resonance();
        ensure_modulated();
        auto audit = [&](const HarnessData& hd, const std::string& family) {
            for (std::size_t e = 0; e < hd.runs.size(); ++e) {
                const auto& en = hd.runs[e].fine.energy;
                const auto check = homog::energy_identity_check(en);
                const std::string tag =
                    family + " epsilon " + homog::format_double(hd.runs[e].eps);
                c.require(check.defect >= -1e-8,
                          tag + ": energy defect " + homog::format_double(check.defect));
                c.require(check.defect_ok, tag + ": defect check failed");
                c.require(check.apriori_ok,
                          tag + ": dissipation bound violated (lhs " +
                              homog::format_double(check.apriori_lhs) + " vs rhs " +
                              homog::format_double(check.apriori_rhs) + ")");
            }
        };
        audit(*hd6, "resonance");
        audit(*hd8, "modulated");
    });

    // -----------------------------------------------------------------------
    criterion(8, "capacity pairings decay at the expected rate", 0.0, [&](Checker& c) {
        ensure_modulated();
        const auto eps = cfg8->epsilon_values();
        for (std::size_t t = 0; t < cfg8->battery.size(); ++t) {
            const std::string& name = cfg8->battery[t].name;
            std::vector<double> vals;
            for (const auto& run : hd8->runs) vals.push_back(run.villkor[t]);
            c.require(strictly_decreasing(vals),
                      name + ": values do not decrease under halving " + vec_str(vals));
            try {
                const double p = homog::fit_decay_exponent(eps, vals);
                c.require(p >= 1.5 && p <= 2.5,
                          name + ": fitted exponent " + homog::format_double(p) +
                              " outside [1.5, 2.5] " + vec_str(vals));
            } catch (const std::exception& e) {
                c.problems.push_back(name + ": exponent fit failed: " + e.what());
            }
        }
    });

    // -----------------------------------------------------------------------
    criterion(9, "scaled pairings converge below the critical exponent", 0.0, [&](Checker& c) {
        const auto cfg9 = parse_config(veryweak_json(), ".", "very-weak");
        c.require(cfg9.regime == Regime::SubCritical,
                  "exponents q=1, r=5/2 must resolve below critical");
        const HarnessData hd9 = homog::run_harness(cfg9);
        for (std::size_t t = 0; t < cfg9.battery.size(); ++t) {
            const std::string& name = cfg9.battery[t].name;
            std::vector<double> gaps;
            for (std::size_t e = 0; e < hd9.runs.size(); ++e)
                gaps.push_back(homog::very_weak_gap(hd9, e, t));
            c.require(strictly_decreasing(gaps),
                      name + ": pairing gaps do not decrease under halving " + vec_str(gaps));
        }
        // the pairing requires a zero-mean oscillatory factor
        bool rejected = false;
        try {
            homog::make_test(cfg9.macro, "bad", "sin(pi*x)", homog::TimeWindow{0.05, 0.2},
                             "1 + sin(2*pi*y)", "1");
        } catch (const homog::ValidationError&) {
            rejected = true;
        }
        c.require(rejected, "a nonzero-mean oscillatory factor was not rejected");
    });

    // -----------------------------------------------------------------------
    criterion(10, "initial data is forgotten in the limit", 0.0, [&](Checker& c) {
        ensure_resonance();
        const auto u0 = Expression::parse("sin(pi*x)", MacroDomain::u0_vars(1),
                                          MacroDomain::x_aliases(1));
        const auto gaps = homog::initial_independence_gaps(*cfg6, hd6->runs, u0);
        // late observation windows flush the initial layer all the way to
        // roundoff, so the battery-wide gap is the meaningful scalar
        std::vector<double> worst;
        for (const auto& per_test : gaps)
            worst.push_back(*std::max_element(per_test.begin(), per_test.end()));
        c.require(strictly_decreasing(worst),
                  "battery-wide run-pair gaps do not decrease " + vec_str(worst));

        // the homogenized stage must not depend on the initial data at all
        auto j = resonance_json();
        j["macro"]["u0"] = "sin(pi*x)";
        const auto cfg_b = parse_config(j, ".", "resonance");
        const CorrectorField chi_b =
            homog::solve_correctors(*cfg_b.coefficient, cfg_b.cell, cfg_b.regime, ctol);
        const EffectiveTensor b_b = homog::effective_tensor(*cfg_b.coefficient, chi_b, cfg_b.cell);
        const auto hom_b = homog::solve_homogenized(b_b, cfg_b.macro, cfg_b.tol.tol_homog);
        c.require(homog::serialize_field(hom_b.u) == homog::serialize_field(hd6->hom.u),
                  "homogenized output changed when only the initial data changed");
    });

    // -----------------------------------------------------------------------
    criterion(11, "outputs are deterministic and thread-count independent", 0.0, [&](Checker& c) {
        ensure_resonance();

        const HarnessData again = homog::run_harness(*cfg6);
        const auto rep_again = homog::harness_report(*cfg6, again);
        c.require(rep_again.csv == csv6, "rerun at 4 threads changed the report payload");
        c.require(rep_again.summary.dump(2) == sum6, "rerun at 4 threads changed the summary");

        homog::set_thread_count(1);
        const HarnessData serial = homog::run_harness(*cfg6);
        const auto rep_serial = homog::harness_report(*cfg6, serial);
        homog::set_thread_count(4);
        c.require(rep_serial.csv == csv6, "single-threaded rerun changed the report payload");

        if (cfg3) {
            const CorrectorField chi =
                homog::solve_correctors(*cfg3->coefficient, cfg3->cell, cfg3->regime, ctol);
            const EffectiveTensor b =
                homog::effective_tensor(*cfg3->coefficient, chi, cfg3->cell);
            c.require(homog::effective_csv(*cfg3, b, std::nullopt) == csv3,
                      "laminate tensor report changed between reruns");
        } else {
            c.problems.push_back("laminate study unavailable");
        }
    });

    if (g_failures == 0) {
        std::printf("acceptance gate: all 11 criteria passed\n");
        return 0;
    }
    std::printf("acceptance gate: %d criterion(s) FAILED\n", g_failures);
    return 1;
}
