#pragma once

// The Y- and S-periodic conductivity matrix a(y,s): analytic-expression and
// tabulated-grid kinds, validation (periodicity by construction or by
// wraparound, symmetry detection, coercivity on a sample grid), and the
// S-average used above the critical temporal scaling.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/expression.hpp"

namespace homog {

// Dense d x d matrix value, d <= 2.
struct MatN {
    int dim = 1;
    std::array<double, 4> e{};  // row-major

    static MatN zero(int d) { return MatN{d, {0, 0, 0, 0}}; }
    static MatN identity(int d) {
        MatN m = zero(d);
        for (int i = 0; i < d; ++i) m(i, i) = 1.0;
        return m;
    }
    double operator()(int i, int j) const { return e[static_cast<std::size_t>(i) * dim + j]; }
    double& operator()(int i, int j) { return e[static_cast<std::size_t>(i) * dim + j]; }

    // smallest eigenvalue of the symmetric part
    double min_eig_sym() const {
        if (dim == 1) return e[0];
        const double a = (*this)(0, 0), d = (*this)(1, 1);
        const double b = 0.5 * ((*this)(0, 1) + (*this)(1, 0));
        const double mid = 0.5 * (a + d);
        const double rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
        return mid - rad;
    }
    double max_abs() const {
        double m = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m = std::max(m, std::abs((*this)(i, j)));
        return m;
    }
};

class CoercivityViolation : public std::runtime_error {
public:
    CoercivityViolation(const std::string& msg, std::array<double, 2> y, double s, double lam)
        : std::runtime_error(msg), y_(y), s_(s), lambda_(lam) {}
    std::array<double, 2> y() const { return y_; }
    double s() const { return s_; }
    double lambda() const { return lambda_; }

private:
    std::array<double, 2> y_;
    double s_;
    double lambda_;
};

// wraps any real onto [0,1)
inline double wrap_unit(double x) {
    const double w = x - std::floor(x);
    return w == 1.0 ? 0.0 : w;
}

class CoefficientField {
public:
    enum class Kind { Expression, Tabulated };

    // entries[i][j] are expressions in (y, s) for dim 1 or (y1, y2, s) for dim 2
    static CoefficientField from_expressions(int dim,
                                             const std::vector<std::vector<std::string>>& entries) {
        check_dim(dim);
        if (entries.size() != static_cast<std::size_t>(dim))
            throw std::invalid_argument("coefficient entries must form a " + std::to_string(dim) +
                                        "x" + std::to_string(dim) + " matrix");
        CoefficientField f;
        f.kind_ = Kind::Expression;
        f.dim_ = dim;
        std::vector<std::string> vars;
        std::map<std::string, std::size_t> aliases;
        if (dim == 1) {
            vars = {"y", "s"};
            aliases = {{"y1", 0}};
        } else {
            vars = {"y1", "y2", "s"};
            aliases = {{"y", 0}};
        }
        const std::size_t s_slot = vars.size() - 1;
        std::vector<std::size_t> periodic(vars.size());
        for (std::size_t k = 0; k < vars.size(); ++k) periodic[k] = k;
        for (int i = 0; i < dim; ++i) {
            if (entries[i].size() != static_cast<std::size_t>(dim))
                throw std::invalid_argument("coefficient entry row " + std::to_string(i) +
                                            " has wrong length");
            for (int j = 0; j < dim; ++j) {
                Expression e = Expression::parse(entries[i][j], vars, aliases);
                e.require_periodic(periodic);
                f.exprs_.push_back(std::move(e));
            }
        }
        f.depends_on_s_ = false;
        for (const auto& e : f.exprs_) f.depends_on_s_ = f.depends_on_s_ || e.depends_on(s_slot);
        f.detect_structure();
        return f;
    }

    static CoefficientField identity(int dim) {
        std::vector<std::vector<std::string>> entries(dim, std::vector<std::string>(dim, "0"));
        for (int i = 0; i < dim; ++i) entries[i][i] = "1";
        return from_expressions(dim, entries);
    }

    // grid = {n_y, n_s} (dim 1) or {n_y1, n_y2, n_s} (dim 2); data is
    // row-major over (y..., s, i, j) node samples of a continuous field.
    static CoefficientField tabulated(int dim, const std::vector<int>& grid,
                                      std::vector<double> data) {
        check_dim(dim);
        if (grid.size() != static_cast<std::size_t>(dim) + 1)
            throw std::invalid_argument("tabulated grid must list " + std::to_string(dim + 1) +
                                        " extents");
        std::size_t expect = static_cast<std::size_t>(dim) * dim;
        for (int n : grid) {
            if (n < 1) throw std::invalid_argument("tabulated grid extents must be positive");
            expect *= static_cast<std::size_t>(n);
        }
        if (data.size() != expect)
            throw std::invalid_argument("tabulated data has " + std::to_string(data.size()) +
                                        " values, expected " + std::to_string(expect));
        CoefficientField f;
        f.kind_ = Kind::Tabulated;
        f.dim_ = dim;
        f.grid_ = grid;
        f.data_ = std::move(data);
        f.depends_on_s_ = f.tabulated_depends_on_s();
        f.detect_structure();
        return f;
    }

    int dim() const { return dim_; }
    Kind kind() const { return kind_; }
    bool depends_on_s() const { return depends_on_s_; }
    bool is_diagonal() const { return diagonal_; }
    bool is_symmetric() const { return symmetric_; }

    MatN evaluate(std::span<const double> y, double s) const {
        if (y.size() != static_cast<std::size_t>(dim_))
            throw std::invalid_argument("evaluate: point has wrong dimension");
        MatN m = MatN::zero(dim_);
        if (kind_ == Kind::Expression) {
            std::array<double, 3> args{};
            for (int k = 0; k < dim_; ++k) args[k] = wrap_unit(y[k]);
            args[dim_] = wrap_unit(s);
            const std::span<const double> av(args.data(), static_cast<std::size_t>(dim_) + 1);
            for (int i = 0; i < dim_; ++i)
                for (int j = 0; j < dim_; ++j) m(i, j) = exprs_[idx(i, j)](av);
        } else {
            for (int i = 0; i < dim_; ++i)
                for (int j = 0; j < dim_; ++j) m(i, j) = interp(y, s, i, j);
        }
        return m;
    }

    MatN evaluate(double y, double s) const {
        const double p[1] = {y};
        return evaluate(std::span<const double>(p, 1), s);
    }

    double scalar(double y, double s) const { return evaluate(y, s)(0, 0); }

    // Minimum over an (n_check)^(N+1) sample grid of the smallest eigenvalue
    // of the symmetric part. Rejects non-coercive and unbounded fields.
    double verify_coercivity(int n_check = 64) const {
        if (n_check < 2) throw std::invalid_argument("verify_coercivity needs n_check >= 2");
        double c0 = 0.0;
        bool first = true;
        std::array<double, 2> worst_y{};
        double worst_s = 0.0;
        for_each_sample(n_check, [&](std::span<const double> y, double s) {
            const MatN m = evaluate(y, s);
            if (!std::isfinite(m.max_abs()))
                throw CoercivityViolation("coefficient is not finite at a sample point",
                                          to2(y), s, m.min_eig_sym());
            const double lam = m.min_eig_sym();
            if (first || lam < c0) {
                c0 = lam;
                first = false;
                worst_y = to2(y);
                worst_s = s;
            }
        });
        if (c0 <= 0.0)
            throw CoercivityViolation("coefficient is not coercive: min symmetric eigenvalue " +
                                          std::to_string(c0),
                                      worst_y, worst_s, c0);
        return c0;
    }

    double max_entry(int n_check = 64) const {
        double m = 0.0;
        for_each_sample(n_check, [&](std::span<const double> y, double s) {
            m = std::max(m, evaluate(y, s).max_abs());
        });
        return m;
    }

private:
    Kind kind_ = Kind::Expression;
    int dim_ = 1;
    bool depends_on_s_ = false;
    bool diagonal_ = true;
    bool symmetric_ = true;
    std::vector<Expression> exprs_;  // row-major dim x dim
    std::vector<int> grid_;
    std::vector<double> data_;

    static void check_dim(int dim) {
        if (dim < 1 || dim > 2) throw std::invalid_argument("coefficient dim must be 1 or 2");
    }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * dim_ + j; }

    static std::array<double, 2> to2(std::span<const double> y) {
        std::array<double, 2> r{0.0, 0.0};
        for (std::size_t k = 0; k < y.size() && k < 2; ++k) r[k] = y[k];
        return r;
    }

    bool tabulated_depends_on_s() const {
        const int n_s = grid_.back();
        if (n_s <= 1) return false;
        // constant across s-slices?
        const std::size_t slice = data_.size() / static_cast<std::size_t>(n_s);
        // layout is (y..., s, i, j): the s axis is NOT outermost, so compare
        // per (y, i, j) block instead
        const std::size_t entry = static_cast<std::size_t>(dim_) * dim_;
        const std::size_t per_y = static_cast<std::size_t>(n_s) * entry;
        const std::size_t n_ynodes = data_.size() / per_y;
        for (std::size_t yk = 0; yk < n_ynodes; ++yk)
            for (std::size_t ej = 0; ej < entry; ++ej) {
                const double v0 = data_[yk * per_y + ej];
                for (int sk = 1; sk < n_s; ++sk)
                    if (data_[yk * per_y + static_cast<std::size_t>(sk) * entry + ej] != v0)
                        return true;
            }
        (void)slice;
        return false;
    }

    void detect_structure() {
        diagonal_ = true;
        symmetric_ = true;
        if (dim_ == 1) return;
        // sample-based structure detection on a modest grid
        const int n = 16;
        for_each_sample(n, [&](std::span<const double> y, double s) {
            const MatN m = evaluate(y, s);
            if (m(0, 1) != 0.0 || m(1, 0) != 0.0) diagonal_ = false;
            if (std::abs(m(0, 1) - m(1, 0)) > 1e-12 * (1.0 + m.max_abs())) symmetric_ = false;
        });
    }

    template <class Fn>
    void for_each_sample(int n, Fn&& fn) const {
        const double step = 1.0 / n;
        if (dim_ == 1) {
            for (int iy = 0; iy < n; ++iy)
                for (int is = 0; is < n; ++is) {
                    const double y[1] = {iy * step};
                    fn(std::span<const double>(y, 1), is * step);
                }
        } else {
            for (int i1 = 0; i1 < n; ++i1)
                for (int i2 = 0; i2 < n; ++i2)
                    for (int is = 0; is < n; ++is) {
                        const double y[2] = {i1 * step, i2 * step};
                        fn(std::span<const double>(y, 2), is * step);
                    }
        }
    }

    double interp(std::span<const double> y, double s, int i, int j) const {
        // multilinear interpolation with periodic wraparound on every axis
        const int axes = dim_ + 1;
        std::array<int, 3> n{};
        std::array<double, 3> pos{};
        for (int k = 0; k < axes; ++k) n[k] = grid_[k];
        for (int k = 0; k < dim_; ++k) pos[k] = wrap_unit(y[k]) * n[k];
        pos[dim_] = wrap_unit(s) * n[dim_];
        std::array<int, 3> lo{};
        std::array<double, 3> w{};
        for (int k = 0; k < axes; ++k) {
            lo[k] = static_cast<int>(std::floor(pos[k]));
            w[k] = pos[k] - lo[k];
            if (lo[k] >= n[k]) {  // pos == n[k] after roundoff
                lo[k] = 0;
                w[k] = 0.0;
            }
        }
        const std::size_t entry = static_cast<std::size_t>(dim_) * dim_;
        auto value_at = [&](std::array<int, 3> node) {
            std::size_t flat = 0;
            for (int k = 0; k < axes; ++k) {
                int idx_k = node[k] % n[k];
                flat = flat * static_cast<std::size_t>(n[k]) + static_cast<std::size_t>(idx_k);
            }
            return data_[flat * entry + static_cast<std::size_t>(i) * dim_ + j];
        };
        double acc = 0.0;
        const int corners = 1 << axes;
        for (int c = 0; c < corners; ++c) {
            double weight = 1.0;
            std::array<int, 3> node = lo;
            for (int k = 0; k < axes; ++k) {
                if (c & (1 << k)) {
                    node[k] = lo[k] + 1;
                    weight *= w[k];
                } else {
                    weight *= 1.0 - w[k];
                }
            }
            if (weight != 0.0) acc += weight * value_at(node);
        }
        return acc;
    }
};

// Lazy S-average ā(y) = ∫_S a(y,s) ds by the periodic rectangle rule, which
// is spectrally accurate for smooth periodic integrands.
class AveragedCoefficient {
public:
    AveragedCoefficient(std::shared_ptr<const CoefficientField> base, int n_s)
        : base_(std::move(base)), n_s_(n_s) {
        if (n_s_ < 2) throw std::invalid_argument("time_average needs n_s >= 2");
    }

    int dim() const { return base_->dim(); }

    MatN evaluate(std::span<const double> y) const {
        if (!base_->depends_on_s()) return base_->evaluate(y, 0.0);
        MatN acc = MatN::zero(base_->dim());
        for (int k = 0; k < n_s_; ++k) {
            const MatN m = base_->evaluate(y, static_cast<double>(k) / n_s_);
            for (std::size_t t = 0; t < acc.e.size(); ++t) acc.e[t] += m.e[t];
        }
        for (double& v : acc.e) v /= n_s_;
        return acc;
    }

    MatN evaluate(double y) const {
        const double p[1] = {y};
        return evaluate(std::span<const double>(p, 1));
    }

private:
    std::shared_ptr<const CoefficientField> base_;
    int n_s_;
};

inline AveragedCoefficient time_average(std::shared_ptr<const CoefficientField> field, int n_s) {
    return AveragedCoefficient(std::move(field), n_s);
}

}  // namespace homog
