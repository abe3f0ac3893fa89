#pragma once

// Pipeline orchestration shared by the command-line tool and the test
// harness: regime dispatch for the local problems, artifact store with a
// manifest (config hash + per-file content hashes, used to flag stale
// outputs), the epsilon sweep with online pairing observers, and the report
// writers (CSV rows and JSON summary).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "homog/cell.hpp"
#include "homog/config.hpp"
#include "homog/convergence.hpp"
#include "homog/effective.hpp"
#include "homog/finescale.hpp"
#include "homog/homogenized.hpp"
#include "homog/io.hpp"
#include "homog/log.hpp"
#include "homog/parallel.hpp"

namespace homog {

// ---------------------------------------------------------------------------
// regime dispatch
// ---------------------------------------------------------------------------

inline CorrectorField solve_correctors(const CoefficientField& a, const CellGrid& grid,
                                       Regime regime, const CellTolerances& tol) {
    switch (regime) {
        case Regime::SubCritical:
            return solve_elliptic_cell_family(a, grid, tol);
        case Regime::Critical:
            return solve_parabolic_cell(a, grid, tol);
        case Regime::SuperCritical: {
            AveragedCoefficient avg(std::make_shared<CoefficientField>(a), grid.n_s);
            return solve_averaged_cell(avg, grid, tol);
        }
    }
    throw std::logic_error("unreachable regime");
}

// ---------------------------------------------------------------------------
// artifact store with stale detection
// ---------------------------------------------------------------------------

class ArtifactStore {
  public:
    explicit ArtifactStore(const ExperimentConfig& cfg) : dir_(cfg.output), hash_(cfg.hash) {
        std::error_code ec;
        const auto mpath = dir_ / "manifest.json";
        if (std::filesystem::exists(mpath, ec)) {
            try {
                manifest_ = nlohmann::json::parse(read_file(mpath));
            } catch (const std::exception&) {
                manifest_ = nlohmann::json::object();
            }
            const std::string prev = manifest_.value("config_sha1", "");
            if (!prev.empty() && prev != hash_) {
                stale_ = true;
                log_warn("artifacts in '" + dir_.string() +
                         "' were produced by a different config (stale; they will be ignored "
                         "and overwritten)");
            }
        }
        if (!manifest_.is_object()) manifest_ = nlohmann::json::object();
        manifest_["name"] = cfg.name;
        manifest_["config_sha1"] = hash_;
        manifest_["config"] = nlohmann::json::parse(cfg.echo);
        if (stale_ || !manifest_.contains("artifacts") || !manifest_["artifacts"].is_object())
            manifest_["artifacts"] = nlohmann::json::object();
    }

    const std::filesystem::path& dir() const { return dir_; }

    void put(const std::string& name, const std::string& bytes) {
        atomic_write(dir_ / name, bytes);
        manifest_["artifacts"][name] = Sha1::hash(bytes);
        flush();
    }

    // bytes of an artifact recorded under the current config, or nullopt if
    // missing or stale
    std::optional<std::string> get(const std::string& name) const {
        if (stale_) return std::nullopt;
        if (!manifest_["artifacts"].contains(name)) return std::nullopt;
        const auto path = dir_ / name;
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) return std::nullopt;
        std::string bytes;
        try {
            bytes = read_file(path);
        } catch (const IoError&) {
            return std::nullopt;
        }
        if (Sha1::hash(bytes) != manifest_["artifacts"][name].get<std::string>()) {
            log_warn("artifact '" + name + "' does not match its recorded hash (stale); ignoring");
            return std::nullopt;
        }
        return bytes;
    }

    void flush() { atomic_write(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

  private:
    std::filesystem::path dir_;
    std::string hash_;
    nlohmann::json manifest_ = nlohmann::json::object();
    bool stale_ = false;
};

// ---------------------------------------------------------------------------
// staged runs (cell -> effective -> homogenize), with artifact reuse
// ---------------------------------------------------------------------------

inline CorrectorField run_cell_stage(const ExperimentConfig& cfg, ArtifactStore& store) {
    CorrectorField chi =
        solve_correctors(*cfg.coefficient, cfg.cell, cfg.regime, cfg.tol.cell_tolerances());
    store.put("correctors.bin", serialize_corrector(chi));
    nlohmann::json rep;
    rep["regime"] = regime_name(chi.regime);
    rep["max_residual"] = chi.max_residual;
    rep["total_iterations"] = chi.total_iterations;
    rep["max_abs"] = chi.max_abs();
    rep["worst_slice_mean"] = chi.worst_slice_mean();
    store.put("cell.json", rep.dump(2) + "\n");
    return chi;
}

// reuse the stored correctors when they match the current config
inline CorrectorField obtain_correctors(const ExperimentConfig& cfg, ArtifactStore& store) {
    if (auto bytes = store.get("correctors.bin")) {
        try {
            CorrectorField chi = read_corrector(store.dir() / "correctors.bin");
            if (chi.regime == cfg.regime && chi.dim == cfg.cell.dim && chi.n_y == cfg.cell.n_y) {
                log_info("reusing correctors.bin");
                return chi;
            }
        } catch (const IoError&) {
        }
    }
    return run_cell_stage(cfg, store);
}

inline std::string effective_csv(const ExperimentConfig& cfg, const EffectiveTensor& b,
                                 const std::optional<BoundsReport1D>& bounds) {
    std::string csv = "regime,q,r,n_y,n_s,b11,b12,b21,b22,c0,lower_ok,upper_ok\n";
    std::vector<std::string> row;
    row.push_back(regime_name(b.regime));
    row.push_back(cfg.q.str());
    row.push_back(cfg.r.str());
    row.push_back(std::to_string(b.n_y));
    row.push_back(std::to_string(b.n_s));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            row.push_back(i < b.dim && j < b.dim ? format_double(b.b(i, j)) : "");
    row.push_back(format_double(b.c0_estimate));
    if (bounds) {
        row.push_back(bounds->lower_ok ? "1" : "0");
        row.push_back(bounds->upper_ok ? "1" : "0");
    } else {
        row.push_back("na");
        row.push_back("na");
    }
    csv += csv_line(row);
    return csv;
}

struct EffectiveStage {
    CorrectorField chi;
    EffectiveTensor b;
    std::optional<BoundsReport1D> bounds;
};

inline EffectiveStage run_effective_stage(const ExperimentConfig& cfg, ArtifactStore& store) {
    EffectiveStage st;
    st.chi = obtain_correctors(cfg, store);
    st.b = effective_tensor(*cfg.coefficient, st.chi, cfg.cell);
    if (cfg.cell.dim == 1) st.bounds = check_bounds_1d(*cfg.coefficient, st.b, cfg.cell);
    store.put("effective.csv", effective_csv(cfg, st.b, st.bounds));
    if (st.bounds && !st.bounds->pass())
        log_warn("effective value violates the 1D harmonic/arithmetic-mean bounds");
    return st;
}

inline HomogenizedResult run_homogenize_stage(const ExperimentConfig& cfg, ArtifactStore& store,
                                              const EffectiveTensor& b) {
    HomogenizedResult hom = solve_homogenized(b, cfg.macro, cfg.tol.tol_homog);
    store.put("u_hom.bin", serialize_field(hom.u));
    return hom;
}

// ---------------------------------------------------------------------------
// epsilon sweep with observers
// ---------------------------------------------------------------------------

struct EpsRun {
    double eps = 0.0;
    FineScaleResult fine;
    // per battery test
    std::vector<double> villkor;
    std::vector<std::vector<double>> two_scale_lhs;  // [test][axis]
    std::vector<double> very_weak_lhs;
};

inline EpsRun run_one_eps(const ExperimentConfig& cfg, const Rational& eps,
                          const Expression* u0_override = nullptr) {
    EpsRun run;
    run.eps = eps.value();
    FineScaleConfig fc = cfg.fine_config(eps);
    if (u0_override) fc.dom.u0 = *u0_override;

    std::vector<std::unique_ptr<VillkorObserver>> villkor;
    std::vector<std::unique_ptr<TwoScaleObserver>> two_scale;
    std::vector<std::unique_ptr<VeryWeakObserver>> very_weak;
    std::vector<StepObserver*> obs;
    for (const auto& test : cfg.battery) {
        villkor.push_back(std::make_unique<VillkorObserver>(fc.dom, eps.value(), test));
        two_scale.push_back(std::make_unique<TwoScaleObserver>(fc.dom, eps.value(), test));
        very_weak.push_back(std::make_unique<VeryWeakObserver>(fc.dom, eps.value(), test));
        obs.push_back(villkor.back().get());
        obs.push_back(two_scale.back().get());
        obs.push_back(very_weak.back().get());
    }
    run.fine = solve_finescale(*cfg.coefficient, fc, obs);
    for (std::size_t t = 0; t < cfg.battery.size(); ++t) {
        run.villkor.push_back(villkor[t]->value());
        run.two_scale_lhs.push_back(two_scale[t]->value());
        run.very_weak_lhs.push_back(very_weak[t]->value());
    }
    return run;
}

// independent runs per epsilon; each run is internally single-threaded, so
// results do not depend on the thread count
inline std::vector<EpsRun> run_sweep(const ExperimentConfig& cfg,
                                     const Expression* u0_override = nullptr) {
    std::vector<EpsRun> runs(cfg.epsilons.size());
    parallel_for(cfg.epsilons.size(), [&](std::size_t i) {
        runs[i] = run_one_eps(cfg, cfg.epsilons[i], u0_override);
    });
    return runs;
}

// ---------------------------------------------------------------------------
// harness: full in-memory pipeline + pairing analysis
// ---------------------------------------------------------------------------

struct HarnessData {
    CorrectorField chi;
    EffectiveTensor b;
    std::optional<BoundsReport1D> bounds;
    HomogenizedResult hom;

    // critical-regime comparison solutions (only when regime == Critical)
    std::optional<EffectiveTensor> b_sub, b_super;
    std::optional<HomogenizedResult> hom_sub, hom_super;

    std::vector<EpsRun> runs;                        // descending epsilon
    std::vector<std::vector<double>> weak_gap;       // [eps][test], vs hom
    std::vector<std::vector<double>> weak_gap_sub;   // [eps][test]
    std::vector<std::vector<double>> weak_gap_super;  // [eps][test]

    std::vector<CellMoments> moments;           // per test
    std::vector<std::array<double, 2>> macro_b;  // per test (gradient moments)
    std::vector<std::vector<double>> two_scale_rhs;  // [test][axis]
    std::vector<double> very_weak_rhs;               // per test
};

inline HarnessData run_harness(const ExperimentConfig& cfg) {
    HarnessData hd;
    const CellTolerances ctol = cfg.tol.cell_tolerances();
    hd.chi = solve_correctors(*cfg.coefficient, cfg.cell, cfg.regime, ctol);
    hd.b = effective_tensor(*cfg.coefficient, hd.chi, cfg.cell);
    if (cfg.cell.dim == 1) hd.bounds = check_bounds_1d(*cfg.coefficient, hd.b, cfg.cell);
    hd.hom = solve_homogenized(hd.b, cfg.macro, cfg.tol.tol_homog);

    if (cfg.regime == Regime::Critical && !cfg.epsilons.empty()) {
        const CorrectorField chi_sub =
            solve_correctors(*cfg.coefficient, cfg.cell, Regime::SubCritical, ctol);
        const CorrectorField chi_super =
            solve_correctors(*cfg.coefficient, cfg.cell, Regime::SuperCritical, ctol);
        hd.b_sub = effective_tensor(*cfg.coefficient, chi_sub, cfg.cell);
        hd.b_super = effective_tensor(*cfg.coefficient, chi_super, cfg.cell);
        hd.hom_sub = solve_homogenized(*hd.b_sub, cfg.macro, cfg.tol.tol_homog);
        hd.hom_super = solve_homogenized(*hd.b_super, cfg.macro, cfg.tol.tol_homog);
    }

    hd.runs = run_sweep(cfg);

    for (const auto& run : hd.runs) {
        hd.weak_gap.push_back(weak_pairing_gaps(run.fine.u, hd.hom.u, cfg.battery));
        if (hd.hom_sub)
            hd.weak_gap_sub.push_back(weak_pairing_gaps(run.fine.u, hd.hom_sub->u, cfg.battery));
        if (hd.hom_super)
            hd.weak_gap_super.push_back(
                weak_pairing_gaps(run.fine.u, hd.hom_super->u, cfg.battery));
    }

    for (const auto& test : cfg.battery) {
        hd.moments.push_back(cell_moments(hd.chi, test.v2, test.c2));
        hd.macro_b.push_back(macro_gradient_moments(hd.hom.u, test.v1, test.c1));
        hd.two_scale_rhs.push_back(two_scale_limit(hd.moments.back(), hd.macro_b.back()));
        hd.very_weak_rhs.push_back(very_weak_limit(hd.moments.back(), hd.macro_b.back()));
    }
    return hd;
}

// gap of the two-scale pairing for test t along axis d at epsilon index e
inline double two_scale_gap(const HarnessData& hd, std::size_t e, std::size_t t, int d) {
    return std::abs(hd.runs[e].two_scale_lhs[t][static_cast<std::size_t>(d)] -
                    hd.two_scale_rhs[t][static_cast<std::size_t>(d)]);
}

inline double very_weak_gap(const HarnessData& hd, std::size_t e, std::size_t t) {
    return std::abs(hd.runs[e].very_weak_lhs[t] - hd.very_weak_rhs[t]);
}

// ---------------------------------------------------------------------------
// initial-data independence
// ---------------------------------------------------------------------------

// pairing gaps between runs that differ only in the initial data; reuses the
// already-computed primary runs
inline std::vector<std::vector<double>> initial_independence_gaps(
    const ExperimentConfig& cfg, const std::vector<EpsRun>& primary_runs,
    const Expression& u0_b) {
    const std::vector<EpsRun> alt = run_sweep(cfg, &u0_b);
    std::vector<std::vector<double>> gaps;
    for (std::size_t i = 0; i < primary_runs.size(); ++i)
        gaps.push_back(weak_pairing_gaps(primary_runs[i].fine.u, alt[i].fine.u, cfg.battery));
    return gaps;
}

// ---------------------------------------------------------------------------
// report writers
// ---------------------------------------------------------------------------

namespace detail {

inline bool monotone_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(std::abs(v[i]) < std::abs(v[i - 1]))) return false;
    return v.size() >= 2;
}

inline std::string fit_cell(const std::vector<double>& eps, const std::vector<double>& vals) {
    try {
        return format_double(fit_decay_exponent(eps, vals));
    } catch (const std::exception&) {
        return "";
    }
}

}  // namespace detail

struct HarnessReport {
    std::string csv;
    nlohmann::json summary;
};

inline HarnessReport harness_report(const ExperimentConfig& cfg, const HarnessData& hd) {
    HarnessReport rep;
    rep.csv = "experiment-id,quantity,epsilon,value,fitted-exponent\n";
    nlohmann::json& sum = rep.summary;
    sum["name"] = cfg.name;
    sum["config_sha1"] = cfg.hash;
    sum["regime"] = regime_name(cfg.regime);
    {
        nlohmann::json bj = nlohmann::json::array();
        for (int i = 0; i < hd.b.dim; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < hd.b.dim; ++j) row.push_back(hd.b.b(i, j));
            bj.push_back(row);
        }
        sum["b"] = bj;
        sum["c0"] = hd.b.c0_estimate;
    }
    if (hd.bounds) {
        sum["bounds"] = {{"lower", hd.bounds->lower},
                         {"upper", hd.bounds->upper},
                         {"lower_ok", hd.bounds->lower_ok},
                         {"upper_ok", hd.bounds->upper_ok}};
    }
    nlohmann::json monotone = nlohmann::json::object();
    nlohmann::json exponents = nlohmann::json::object();

    const std::vector<double> eps_vals = cfg.epsilon_values();
    auto emit = [&](const std::string& quantity, const std::vector<double>& values,
                    bool with_fit) {
        const std::string fit = with_fit ? detail::fit_cell(eps_vals, values) : "";
        for (std::size_t i = 0; i < values.size(); ++i)
            rep.csv += csv_line({cfg.name, quantity, format_double(eps_vals[i]),
                                 format_double(values[i]), fit});
        monotone[quantity] = detail::monotone_decreasing(values);
        if (with_fit && !fit.empty()) exponents[quantity] = std::stod(fit);
    };

    const std::size_t n_eps = hd.runs.size();
    for (std::size_t t = 0; t < cfg.battery.size(); ++t) {
        const std::string& name = cfg.battery[t].name;
        std::vector<double> vals(n_eps);
        for (std::size_t e = 0; e < n_eps; ++e) vals[e] = hd.weak_gap[e][t];
        emit("weak_gap[" + name + "]", vals, true);
    }
    if (hd.hom_sub && hd.hom_super && n_eps > 0) {
        for (std::size_t t = 0; t < cfg.battery.size(); ++t) {
            const std::string& name = cfg.battery[t].name;
            std::vector<double> vs(n_eps), vp(n_eps);
            for (std::size_t e = 0; e < n_eps; ++e) {
                vs[e] = hd.weak_gap_sub[e][t];
                vp[e] = hd.weak_gap_super[e][t];
            }
            emit("weak_gap_sub[" + name + "]", vs, false);
            emit("weak_gap_super[" + name + "]", vp, false);
        }
        // selection ratios at the smallest epsilon
        nlohmann::json ratios = nlohmann::json::object();
        const std::size_t last = n_eps - 1;
        for (std::size_t t = 0; t < cfg.battery.size(); ++t) {
            const std::string& name = cfg.battery[t].name;
            const double rc = hd.weak_gap[last][t];
            const double rs = rc / hd.weak_gap_sub[last][t];
            const double rp = rc / hd.weak_gap_super[last][t];
            rep.csv += csv_line({cfg.name, "regime_ratio_sub[" + name + "]",
                                 format_double(eps_vals[last]), format_double(rs), ""});
            rep.csv += csv_line({cfg.name, "regime_ratio_super[" + name + "]",
                                 format_double(eps_vals[last]), format_double(rp), ""});
            ratios[name] = {{"sub", rs}, {"super", rp}};
        }
        sum["regime_ratios"] = ratios;
    }
    for (std::size_t t = 0; t < cfg.battery.size(); ++t) {
        const std::string& name = cfg.battery[t].name;
        std::vector<double> vals(n_eps);
        for (std::size_t e = 0; e < n_eps; ++e) vals[e] = hd.runs[e].villkor[t];
        emit("villkor[" + name + "]", vals, true);
    }
    for (std::size_t t = 0; t < cfg.battery.size(); ++t) {
        const std::string& name = cfg.battery[t].name;
        for (int d = 0; d < cfg.macro.dim; ++d) {
            std::vector<double> vals(n_eps);
            for (std::size_t e = 0; e < n_eps; ++e) vals[e] = two_scale_gap(hd, e, t, d);
            emit("two_scale_gap[" + name + "][x" + std::to_string(d + 1) + "]", vals, true);
        }
    }
    for (std::size_t t = 0; t < cfg.battery.size(); ++t) {
        const std::string& name = cfg.battery[t].name;
        std::vector<double> vals(n_eps);
        for (std::size_t e = 0; e < n_eps; ++e) vals[e] = very_weak_gap(hd, e, t);
        emit("very_weak_gap[" + name + "]", vals, true);
    }
    {
        std::vector<double> defect(n_eps), ident(n_eps), margin(n_eps);
        bool apriori_all = true;
        for (std::size_t e = 0; e < n_eps; ++e) {
            const EnergyReport& en = hd.runs[e].fine.energy;
            defect[e] = en.defect();
            ident[e] = en.identity_error();
            margin[e] = en.apriori_rhs() - en.apriori_lhs();
            apriori_all = apriori_all && en.apriori_ok();
        }
        for (std::size_t e = 0; e < n_eps; ++e) {
            rep.csv += csv_line({cfg.name, "energy_defect", format_double(eps_vals[e]),
                                 format_double(defect[e]), ""});
            rep.csv += csv_line({cfg.name, "energy_identity_error",
                                 format_double(eps_vals[e]), format_double(ident[e]), ""});
            rep.csv += csv_line({cfg.name, "apriori_margin", format_double(eps_vals[e]),
                                 format_double(margin[e]), ""});
        }
        if (n_eps > 0) {
            sum["energy"] = {{"apriori_ok", apriori_all},
                             {"min_defect", *std::min_element(defect.begin(), defect.end())}};
        }
    }
    sum["monotone"] = monotone;
    sum["fitted_exponents"] = exponents;
    return rep;
}

inline void write_harness(const ExperimentConfig& cfg, const HarnessData& hd,
                          ArtifactStore& store) {
    const HarnessReport rep = harness_report(cfg, hd);
    store.put("harness.csv", rep.csv);
    store.put("summary.json", rep.summary.dump(2) + "\n");
    for (std::size_t e = 0; e < hd.runs.size(); ++e) {
        char idx[16];
        std::snprintf(idx, sizeof(idx), "%03zu", e);
        store.put("fine_" + std::string(idx) + ".bin", serialize_field(hd.runs[e].fine.u));
    }
    store.put("u_hom.bin", serialize_field(hd.hom.u));
    store.put("effective.csv", effective_csv(cfg, hd.b, hd.bounds));
}

inline nlohmann::json energy_json(const EnergyReport& en) {
    nlohmann::json j;
    j["term_init"] = en.term_init;
    j["term_final"] = en.term_final;
    j["term_jump"] = en.term_jump;
    j["term_diffusion"] = en.term_diffusion;
    j["term_source"] = en.term_source;
    j["defect"] = en.defect();
    j["identity_error"] = en.identity_error();
    j["grad_l2t"] = en.grad_l2t;
    j["c0_faces"] = en.c0_faces;
    j["poincare_c2"] = en.poincare_c2;
    j["apriori_lhs"] = en.apriori_lhs();
    j["apriori_rhs"] = en.apriori_rhs();
    j["apriori_ok"] = en.apriori_ok();
    return j;
}

// human-readable validation summary for the `validate` subcommand
inline std::string validate_report(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "config '" << cfg.name << "' is valid\n";
    os << "  coefficient: dim " << cfg.coefficient->dim()
       << (cfg.coefficient->depends_on_s() ? ", time-dependent" : ", time-independent") << "\n";
    os << "  exponents: q=" << cfg.q.str() << " r=" << cfg.r.str() << " -> "
       << regime_name(cfg.regime) << "\n";
    os << "  cell grid: n_y=" << cfg.cell.n_y << " n_s=" << cfg.cell.n_s << "\n";
    os << "  macro grid: n_x=" << cfg.macro.n_x << " n_t=" << cfg.macro.n_t << " T=" << cfg.macro.T
       << "\n";
    os << "  battery: " << cfg.battery.size() << " tests\n";
    for (const Rational& eps : cfg.epsilons) {
        const FineScaleConfig fc = cfg.fine_config(eps);
        fc.validate();
        const FineGridLayout lay = plan_fine_run(fc);
        os << "  epsilon " << eps.str() << ": n_x=" << lay.n_x << " steps=" << lay.steps
           << "\n";
    }
    os << "  config hash: " << cfg.hash << "\n";
    return os.str();
}

}  // namespace homog
