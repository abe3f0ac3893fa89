#pragma once

// Macroscopic domain: an axis-aligned box with homogeneous Dirichlet data,
// uniform grid with n_x interior nodes per dimension, plus the conservative
// flux-form operator -div(a grad u) on it. The same stencil family as the
// cell problems, with the periodic wrap replaced by a frozen zero boundary
// ring.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/coefficient.hpp"
#include "homog/expression.hpp"

namespace homog {

struct MacroDomain {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    double T = 1.0;
    int n_x = 127;  // interior nodes per dimension
    int n_t = 65;   // output time slices (including t = 0 and t = T)
    Expression f;   // source f(x, t)
    Expression u0;  // initial datum u0(x), used only by the fine-scale march

    static std::vector<std::string> f_vars(int dim) {
        return dim == 1 ? std::vector<std::string>{"x", "t"}
                        : std::vector<std::string>{"x1", "x2", "t"};
    }
    static std::vector<std::string> u0_vars(int dim) {
        return dim == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x1", "x2"};
    }
    static std::map<std::string, std::size_t> x_aliases(int dim) {
        return dim == 1 ? std::map<std::string, std::size_t>{{"x1", 0}}
                        : std::map<std::string, std::size_t>{{"x", 0}};
    }

    void validate() const {
        if (dim < 1 || dim > 2) throw std::invalid_argument("macro domain dim must be 1 or 2");
        for (int d = 0; d < dim; ++d)
            if (!(hi[d] > lo[d])) throw std::invalid_argument("macro domain extents must be positive");
        if (!(T > 0.0)) throw std::invalid_argument("macro domain needs T > 0");
        if (n_x < 3) throw std::invalid_argument("macro domain needs n_x >= 3");
        if (n_t < 2) throw std::invalid_argument("macro domain needs n_t >= 2");
        if (!f.valid()) throw std::invalid_argument("macro domain is missing the source f");
    }

    double h(int d) const { return (hi[d] - lo[d]) / (n_x + 1); }
    std::size_t interior_size() const {
        return dim == 1 ? static_cast<std::size_t>(n_x)
                        : static_cast<std::size_t>(n_x) * static_cast<std::size_t>(n_x);
    }
    double slice_time(int k) const { return T * static_cast<double>(k) / (n_t - 1); }

    // interior node coordinates; p in [0, n_x) per dimension
    double coord(int d, int p) const { return lo[d] + (p + 1) * h(d); }
};

// u on interior nodes x n_t output slices; boundary values are identically
// zero and stored implicitly.
struct SpaceTimeField {
    int dim = 1;
    int n_x = 0;
    int n_t = 0;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    double T = 0.0;
    std::vector<double> data;  // slice-major: n_t x interior

    std::size_t interior_size() const {
        return dim == 1 ? static_cast<std::size_t>(n_x)
                        : static_cast<std::size_t>(n_x) * static_cast<std::size_t>(n_x);
    }
    std::span<const double> slice(int k) const {
        return std::span<const double>(data).subspan(static_cast<std::size_t>(k) * interior_size(),
                                                     interior_size());
    }
    std::span<double> slice(int k) {
        return std::span<double>(data).subspan(static_cast<std::size_t>(k) * interior_size(),
                                               interior_size());
    }
    double slice_time(int k) const { return T * static_cast<double>(k) / (n_t - 1); }

    static SpaceTimeField like(const MacroDomain& dom) {
        SpaceTimeField f;
        f.dim = dom.dim;
        f.n_x = dom.n_x;
        f.n_t = dom.n_t;
        f.lo = dom.lo;
        f.hi = dom.hi;
        f.T = dom.T;
        f.data.assign(static_cast<std::size_t>(dom.n_t) * dom.interior_size(), 0.0);
        return f;
    }
};

// -div(a grad u) with zero Dirichlet ring, variable (or constant) matrix
// coefficient sampled at all (n_x+2)^dim nodes. Faces take the arithmetic
// average of the adjacent node samples; cross-derivatives at a face average
// the centered differences of the two nodes it joins.
class MacroOperator {
public:
    MacroOperator(int dim, int n_x, std::array<double, 2> lo, std::array<double, 2> hi)
        : dim_(dim), m_(n_x) {
        if (dim < 1 || dim > 2) throw std::invalid_argument("operator dim must be 1 or 2");
        if (n_x < 1) throw std::invalid_argument("operator needs n_x >= 1");
        for (int d = 0; d < dim; ++d) h_[d] = (hi[d] - lo[d]) / (n_x + 1);
        full_.assign(full_size(), 0.0);
    }

    int dim() const { return dim_; }
    int n_x() const { return m_; }
    std::size_t interior_size() const {
        return dim_ == 1 ? static_cast<std::size_t>(m_)
                         : static_cast<std::size_t>(m_) * static_cast<std::size_t>(m_);
    }

    // node samples over the full grid including the boundary ring,
    // row-major with extent (n_x + 2) per dimension
    void set_coefficient(std::vector<MatN> nodes) {
        if (nodes.size() != full_size())
            throw std::invalid_argument("coefficient sample count does not match the grid");
        build_faces(nodes);
    }

    void set_constant_coefficient(const MatN& b) {
        std::vector<MatN> nodes(full_size(), b);
        build_faces(nodes);
    }

    bool diagonal() const { return diagonal_; }
    // smallest eigenvalue of the symmetric part over all faces actually used
    double min_face_coercivity() const { return min_face_coercivity_; }

    // y = -div(a grad u), u given on interior nodes
    void apply(std::span<const double> u, std::span<double> y) const {
        pad(u);
        const double* uf = full_.data();
        if (dim_ == 1) {
            const double inv_h2 = 1.0 / (h_[0] * h_[0]);
            for (int i = 0; i < m_; ++i) {
                const int p = i + 1;  // full index
                const double fr = face_[0][p](0, 0) * (uf[p + 1] - uf[p]);
                const double fl = face_[0][p - 1](0, 0) * (uf[p] - uf[p - 1]);
                y[i] = -(fr - fl) * inv_h2;
            }
            return;
        }
        const int w = m_ + 2;
        const double inv_h1 = 1.0 / h_[0], inv_h2 = 1.0 / h_[1];
        auto f1 = [&](int p1, int p2) {  // flux through face (p1+1/2, p2)
            const std::size_t p = static_cast<std::size_t>(p1) * w + p2;
            const MatN& a = face_[0][p];
            const double d1 = (uf[p + w] - uf[p]) * inv_h1;
            double v = a(0, 0) * d1;
            if (!diagonal_) {
                const double d2 = (uf[p + 1] - uf[p - 1] + uf[p + w + 1] - uf[p + w - 1]) *
                                  (0.25 * inv_h2);
                v += a(0, 1) * d2;
            }
            return v;
        };
        auto f2 = [&](int p1, int p2) {  // flux through face (p1, p2+1/2)
            const std::size_t p = static_cast<std::size_t>(p1) * w + p2;
            const MatN& a = face_[1][p];
            const double d2 = (uf[p + 1] - uf[p]) * inv_h2;
            double v = a(1, 1) * d2;
            if (!diagonal_) {
                const double d1 = (uf[p + w] - uf[p - w] + uf[p + w + 1] - uf[p - w + 1]) *
                                  (0.25 * inv_h1);
                v += a(1, 0) * d1;
            }
            return v;
        };
        for (int i1 = 0; i1 < m_; ++i1)
            for (int i2 = 0; i2 < m_; ++i2) {
                const int p1 = i1 + 1, p2 = i2 + 1;
                double acc = (f1(p1, p2) - f1(p1 - 1, p2)) * inv_h1 +
                             (f2(p1, p2) - f2(p1, p2 - 1)) * inv_h2;
                y[static_cast<std::size_t>(i1) * m_ + i2] = -acc;
            }
    }

    // coefficient Dirichlet form (a grad u, grad u)_h = (Lu, u)_h, by matvec
    double coefficient_form(std::span<const double> u) const {
        std::vector<double> lu(u.size());
        apply(u, lu);
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += lu[i] * u[i];
        return s * cell_volume();
    }

    // plain squared H10 seminorm: sum over all faces of (Du)^2 h^dim
    double dirichlet_form(std::span<const double> u) const {
        pad(u);
        const double* uf = full_.data();
        double s = 0.0;
        if (dim_ == 1) {
            for (int p = 0; p <= m_; ++p) {
                const double d = (uf[p + 1] - uf[p]) / h_[0];
                s += d * d;
            }
            return s * cell_volume();
        }
        const int w = m_ + 2;
        for (int p1 = 0; p1 <= m_; ++p1)
            for (int p2 = 1; p2 <= m_; ++p2) {
                const std::size_t p = static_cast<std::size_t>(p1) * w + p2;
                const double d = (uf[p + w] - uf[p]) / h_[0];
                s += d * d;
            }
        for (int p1 = 1; p1 <= m_; ++p1)
            for (int p2 = 0; p2 <= m_; ++p2) {
                const std::size_t p = static_cast<std::size_t>(p1) * w + p2;
                const double d = (uf[p + 1] - uf[p]) / h_[1];
                s += d * d;
            }
        return s * cell_volume();
    }

    double cell_volume() const { return dim_ == 1 ? h_[0] : h_[0] * h_[1]; }

    // tridiagonal rows (1D only) for direct solves: mass + L
    void tridiagonal(double mass, std::span<double> lower, std::span<double> diag,
                     std::span<double> upper) const {
        if (dim_ != 1) throw std::logic_error("tridiagonal rows exist only in 1D");
        const double inv_h2 = 1.0 / (h_[0] * h_[0]);
        for (int i = 0; i < m_; ++i) {
            const int p = i + 1;
            const double al = face_[0][p - 1](0, 0), ar = face_[0][p](0, 0);
            lower[i] = -al * inv_h2;
            upper[i] = -ar * inv_h2;
            diag[i] = mass + (al + ar) * inv_h2;
        }
    }

private:
    int dim_, m_;
    std::array<double, 2> h_{1.0, 1.0};
    bool diagonal_ = true;
    double min_face_coercivity_ = 0.0;
    std::array<std::vector<MatN>, 2> face_;  // face_[d][p]: between full node p and p + e_d
    mutable std::vector<double> full_;

    std::size_t full_size() const {
        const std::size_t w = static_cast<std::size_t>(m_) + 2;
        return dim_ == 1 ? w : w * w;
    }

    void build_faces(const std::vector<MatN>& nodes) {
        const int w = m_ + 2;
        diagonal_ = true;
        bool first = true;
        for (int d = 0; d < dim_; ++d) {
            face_[d].assign(full_size(), MatN::zero(dim_));
            const std::size_t stride = (dim_ == 1 || d == 0) ? (dim_ == 1 ? 1 : w) : 1;
            const int lim1 = dim_ == 1 ? 1 : (d == 0 ? w - 1 : w);
            const int lim2 = dim_ == 1 ? w - 1 : (d == 0 ? w : w - 1);
            for (int a1 = 0; a1 < lim1; ++a1)
                for (int a2 = 0; a2 < lim2; ++a2) {
                    const std::size_t p = dim_ == 1 ? static_cast<std::size_t>(a2)
                                                    : static_cast<std::size_t>(a1) * w + a2;
                    MatN f = nodes[p];
                    const MatN& nb = nodes[p + stride];
                    for (std::size_t t = 0; t < f.e.size(); ++t)
                        f.e[t] = 0.5 * (f.e[t] + nb.e[t]);
                    face_[d][p] = f;
                    if (dim_ == 2 && (f(0, 1) != 0.0 || f(1, 0) != 0.0)) diagonal_ = false;
                    const double lam = f.min_eig_sym();
                    if (first || lam < min_face_coercivity_) {
                        min_face_coercivity_ = lam;
                        first = false;
                    }
                }
        }
    }

    void pad(std::span<const double> u) const {
        if (u.size() != interior_size())
            throw std::invalid_argument("operator input does not match the interior size");
        if (dim_ == 1) {
            full_[0] = 0.0;
            full_[static_cast<std::size_t>(m_) + 1] = 0.0;
            for (int i = 0; i < m_; ++i) full_[static_cast<std::size_t>(i) + 1] = u[i];
            return;
        }
        const int w = m_ + 2;
        std::fill(full_.begin(), full_.end(), 0.0);
        for (int i1 = 0; i1 < m_; ++i1) {
            const std::size_t dst = static_cast<std::size_t>(i1 + 1) * w + 1;
            const std::size_t src = static_cast<std::size_t>(i1) * m_;
            for (int i2 = 0; i2 < m_; ++i2) full_[dst + i2] = u[src + i2];
        }
    }
};

// reciprocal of the smallest eigenvalue of the discrete Dirichlet Laplacian
// (per-dimension closed form), the constant in ||u||^2 <= C2 |u|_{H1}^2
inline double poincare_constant(const MacroDomain& dom) {
    double lambda = 0.0;
    for (int d = 0; d < dom.dim; ++d) {
        const double h = dom.h(d);
        const double L = dom.hi[d] - dom.lo[d];
        const double s = std::sin(std::numbers::pi * h / (2.0 * L));
        lambda += 4.0 / (h * h) * s * s;
    }
    return 1.0 / lambda;
}

}  // namespace homog
