#pragma once

// Experiment configuration: JSON schema, validation, canonical echo + hash,
// and tolerance overrides.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "homog/coefficient.hpp"
#include "homog/finescale.hpp"
#include "homog/grid.hpp"
#include "homog/io.hpp"
#include "homog/macro.hpp"
#include "homog/rational.hpp"
#include "homog/sha1.hpp"
#include "homog/testfunctions.hpp"

namespace homog {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Tolerances {
    double tol_cell = 1e-10;
    double tol_period = 1e-9;
    double tol_fine = 1e-10;
    double tol_homog = 1e-10;
    int max_periods = 200;
    int n_check = 64;

    CellTolerances cell_tolerances() const {
        CellTolerances t;
        t.tol_cell = tol_cell;
        t.tol_period = tol_period;
        t.max_periods = max_periods;
        return t;
    }
};

struct ExperimentConfig {
    std::string name;
    std::shared_ptr<CoefficientField> coefficient;
    Rational q{1, 1};
    Rational r{3, 1};
    Regime regime = Regime::Critical;
    CellGrid cell;
    MacroDomain macro;
    std::vector<Rational> epsilons;  // strictly descending
    int n_x_per_cell = 16;
    int n_t_per_period = 32;
    std::vector<TestFunctionSpec> battery;
    Tolerances tol;
    std::filesystem::path output;

    std::string echo;  // canonical serialized form
    std::string hash;  // content hash of the echo

    std::vector<double> epsilon_values() const {
        std::vector<double> v;
        v.reserve(epsilons.size());
        for (const Rational& e : epsilons) v.push_back(e.value());
        return v;
    }

    FineScaleConfig fine_config(const Rational& epsilon) const {
        FineScaleConfig fc;
        fc.q = q;
        fc.r = r;
        fc.epsilon = epsilon;
        fc.n_x_per_cell = n_x_per_cell;
        fc.n_t_per_period = n_t_per_period;
        fc.dom = macro;
        fc.tol_step = tol.tol_fine;
        return fc;
    }
};

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const std::string& key, const char* what) {
    if (!j.contains(key)) throw ConfigError(std::string(what) + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(what) + ": bad value for '" + key + "': " + e.what());
    }
}

template <class T>
T json_get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

inline Rational parse_rational_field(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("exponents: missing '" + key + "'");
    const auto& v = j.at(key);
    try {
        if (v.is_string()) return Rational::parse(v.get<std::string>());
        if (v.is_number_integer()) return Rational(v.get<long long>(), 1);
    } catch (const std::exception& e) {
        throw ConfigError("exponents." + key + ": " + e.what());
    }
    throw ConfigError("exponents." + key + ": expected an integer or a rational string like \"5/2\"");
}

inline Rational parse_epsilon_entry(const nlohmann::json& v) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        try {
            return Rational::parse(s);
        } catch (const std::exception& e) {
            // accept decimal strings ("0.25") the same way numeric entries are
            std::size_t pos = 0;
            double x = 0.0;
            try {
                x = std::stod(s, &pos);
            } catch (...) {
                pos = 0;
            }
            if (pos != s.size() || s.empty())
                throw ConfigError(std::string("epsilons: ") + e.what());
            return parse_epsilon_entry(nlohmann::json(x));
        }
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (!(x > 0.0)) throw ConfigError("epsilons must be positive");
        const long long k = std::llround(1.0 / x);
        if (k >= 1 && std::abs(x - 1.0 / static_cast<double>(k)) <= 1e-12 * x)
            return Rational(1, k);
        throw ConfigError("numeric epsilon entries must equal 1/k; use a rational string");
    }
    throw ConfigError("epsilons entries must be numbers or rational strings");
}

}  // namespace detail

inline std::shared_ptr<CoefficientField> parse_coefficient(
    const nlohmann::json& j, const std::filesystem::path& base_dir) {
    const int dim = detail::json_get<int>(j, "dim", "coefficient");
    if (dim != 1 && dim != 2) throw ConfigError("coefficient.dim must be 1 or 2");
    const std::string kind = detail::json_get<std::string>(j, "kind", "coefficient");
    if (kind == "expression" || kind == "analytic-expression") {
        const auto entries =
            detail::json_get<std::vector<std::vector<std::string>>>(j, "entries", "coefficient");
        if (entries.size() != static_cast<std::size_t>(dim))
            throw ConfigError("coefficient.entries must be a dim x dim matrix of expressions");
        for (const auto& row : entries)
            if (row.size() != static_cast<std::size_t>(dim))
                throw ConfigError("coefficient.entries must be a dim x dim matrix of expressions");
        try {
            return std::make_shared<CoefficientField>(
                CoefficientField::from_expressions(dim, entries));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("coefficient.entries: ") + e.what());
        }
    }
    if (kind == "tabulated" || kind == "tabulated-grid") {
        const auto grid = detail::json_get<std::vector<int>>(j, "grid", "coefficient");
        if (grid.size() != 2 || grid[0] < 2 || grid[1] < 1)
            throw ConfigError("coefficient.grid must be [n_y, n_s] with n_y >= 2, n_s >= 1");
        const std::string rel = detail::json_get<std::string>(j, "data", "coefficient");
        const std::filesystem::path data_path =
            std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel)
                                                     : base_dir / rel;
        std::vector<double> data;
        try {
            data = read_f64_array(data_path);
        } catch (const IoError& e) {
            throw ConfigError(std::string("coefficient.data: ") + e.what());
        }
        try {
            return std::make_shared<CoefficientField>(
                CoefficientField::tabulated(dim, {grid[0], grid[1]}, std::move(data)));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("coefficient: ") + e.what());
        }
    }
    throw ConfigError("coefficient.kind must be 'expression' or 'tabulated'");
}

inline ExperimentConfig parse_config(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir,
                                     const std::string& name_hint,
                                     const std::map<std::string, std::string>& tol_overrides = {}) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    ExperimentConfig cfg;
    cfg.name = detail::json_get_or<std::string>(j, "name", name_hint);
    if (cfg.name.empty()) throw ConfigError("config needs a non-empty 'name'");

    if (!j.contains("coefficient")) throw ConfigError("missing 'coefficient' block");
    cfg.coefficient = parse_coefficient(j.at("coefficient"), base_dir);
    const int dim = cfg.coefficient->dim();

    if (!j.contains("exponents")) throw ConfigError("missing 'exponents' block");
    cfg.q = detail::parse_rational_field(j.at("exponents"), "q");
    cfg.r = detail::parse_rational_field(j.at("exponents"), "r");
    if (!(Rational(0, 1) < cfg.q) || !(cfg.q < cfg.r))
        throw ConfigError("exponents must satisfy 0 < q < r");
    cfg.regime = classify_regime(cfg.q, cfg.r);

    if (!j.contains("cell")) throw ConfigError("missing 'cell' block");
    try {
        cfg.cell = CellGrid(dim, detail::json_get<int>(j.at("cell"), "n_y", "cell"),
                            detail::json_get<int>(j.at("cell"), "n_s", "cell"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("cell: ") + e.what());
    }

    if (!j.contains("macro")) throw ConfigError("missing 'macro' block");
    {
        const auto& m = j.at("macro");
        cfg.macro.dim = dim;
        const auto lo = detail::json_get<std::vector<double>>(m, "lo", "macro");
        const auto hi = detail::json_get<std::vector<double>>(m, "hi", "macro");
        if (lo.size() != static_cast<std::size_t>(dim) ||
            hi.size() != static_cast<std::size_t>(dim))
            throw ConfigError("macro.lo and macro.hi must have one entry per dimension");
        for (int d = 0; d < dim; ++d) {
            cfg.macro.lo[d] = lo[static_cast<std::size_t>(d)];
            cfg.macro.hi[d] = hi[static_cast<std::size_t>(d)];
        }
        cfg.macro.T = detail::json_get<double>(m, "T", "macro");
        cfg.macro.n_x = detail::json_get<int>(m, "n_x", "macro");
        cfg.macro.n_t = detail::json_get<int>(m, "n_t", "macro");
        const std::string f_text = detail::json_get<std::string>(m, "f", "macro");
        const std::string u0_text = detail::json_get_or<std::string>(m, "u0", "0");
        try {
            cfg.macro.f = Expression::parse(f_text, MacroDomain::f_vars(dim),
                                            MacroDomain::x_aliases(dim));
            cfg.macro.u0 = Expression::parse(u0_text, MacroDomain::u0_vars(dim),
                                             MacroDomain::x_aliases(dim));
            cfg.macro.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("macro: ") + e.what());
        }
    }

    if (j.contains("epsilons")) {
        for (const auto& v : j.at("epsilons"))
            cfg.epsilons.push_back(detail::parse_epsilon_entry(v));
        for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
            if (!(Rational(0, 1) < cfg.epsilons[i]))
                throw ConfigError("epsilons must be positive");
            if (i > 0 && !(cfg.epsilons[i] < cfg.epsilons[i - 1]))
                throw ConfigError("epsilons must be sorted in strictly descending order");
        }
    }

    if (j.contains("fine")) {
        cfg.n_x_per_cell = detail::json_get_or<int>(j.at("fine"), "n_x_per_cell", 16);
        cfg.n_t_per_period = detail::json_get_or<int>(j.at("fine"), "n_t_per_period", 32);
        if (cfg.n_x_per_cell < 2 || cfg.n_t_per_period < 2)
            throw ConfigError("fine: n_x_per_cell and n_t_per_period must be >= 2");
    }

    if (j.contains("tolerances")) {
        const auto& t = j.at("tolerances");
        cfg.tol.tol_cell = detail::json_get_or<double>(t, "tol_cell", cfg.tol.tol_cell);
        cfg.tol.tol_period = detail::json_get_or<double>(t, "tol_period", cfg.tol.tol_period);
        cfg.tol.tol_fine = detail::json_get_or<double>(t, "tol_fine", cfg.tol.tol_fine);
        cfg.tol.tol_homog = detail::json_get_or<double>(t, "tol_homog", cfg.tol.tol_homog);
        cfg.tol.max_periods = detail::json_get_or<int>(t, "max_periods", cfg.tol.max_periods);
        cfg.tol.n_check = detail::json_get_or<int>(t, "n_check", cfg.tol.n_check);
    }
    for (const auto& [key, val] : tol_overrides) {
        try {
            if (key == "tol_cell")
                cfg.tol.tol_cell = std::stod(val);
            else if (key == "tol_period")
                cfg.tol.tol_period = std::stod(val);
            else if (key == "tol_fine")
                cfg.tol.tol_fine = std::stod(val);
            else if (key == "tol_homog")
                cfg.tol.tol_homog = std::stod(val);
            else if (key == "max_periods")
                cfg.tol.max_periods = std::stoi(val);
            else if (key == "n_check")
                cfg.tol.n_check = std::stoi(val);
            else
                throw ConfigError("unknown tolerance key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad tolerance override value for '" + key + "': " + val);
        }
    }
    if (!(cfg.tol.tol_cell > 0) || !(cfg.tol.tol_period > 0) || !(cfg.tol.tol_fine > 0) ||
        !(cfg.tol.tol_homog > 0) || cfg.tol.max_periods < 1 || cfg.tol.n_check < 2)
        throw ConfigError("tolerances must be positive (max_periods >= 1, n_check >= 2)");

    if (j.contains("battery")) {
        for (const auto& b : j.at("battery")) {
            const std::string bname =
                detail::json_get_or<std::string>(b, "name", "test" + std::to_string(cfg.battery.size() + 1));
            try {
                cfg.battery.push_back(make_test(
                    cfg.macro, bname, detail::json_get<std::string>(b, "v1", "battery"),
                    TimeWindow{detail::json_get<double>(b, "t0", "battery"),
                               detail::json_get<double>(b, "t1", "battery")},
                    detail::json_get<std::string>(b, "v2", "battery"),
                    detail::json_get<std::string>(b, "c2", "battery")));
            } catch (const std::exception& e) {
                throw ConfigError("battery entry '" + bname + "': " + e.what());
            }
        }
    } else {
        cfg.battery = default_battery(cfg.macro);
    }

    cfg.output = detail::json_get_or<std::string>(j, "output", "out/" + cfg.name);
    if (cfg.output.is_relative()) cfg.output = base_dir / cfg.output;

    // canonical echo: nlohmann sorts keys, so dump() is deterministic
    cfg.echo = j.dump(2);
    cfg.hash = Sha1::hash(cfg.echo);
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    const std::map<std::string, std::string>& tol_overrides = {}) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": JSON parse error: " + e.what());
    }
    const std::string hint = path.stem().string();
    return parse_config(j, path.has_parent_path() ? path.parent_path() : ".", hint,
                        tol_overrides);
}

}  // namespace homog
