#pragma once

// Assembly of the effective conductivity tensor b from the correctors:
// column j is the (Y x S)-mean of the discrete total flux a(e_j + grad
// chi_j), computed with exactly the face stencil the cell solves used, and
// the rectangle rule over the s-slices.

#include <algorithm>
#include <limits>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/coefficient.hpp"
#include "homog/grid.hpp"
#include "homog/rational.hpp"

namespace homog {

struct EffectiveTensor {
    int dim = 1;
    Regime regime = Regime::SubCritical;
    MatN b;
    int n_y = 0;
    int n_s = 1;
    double c0_estimate = 0.0;   // worst face coercivity seen while assembling
    double max_residual = 0.0;  // worst residual across the cell solves

    double scalar() const { return b(0, 0); }
    double min_eig_sym() const { return b.min_eig_sym(); }
};

inline EffectiveTensor effective_tensor(const CoefficientField& field,
                                        const CorrectorField& correctors, const CellGrid& grid) {
    if (correctors.dim != grid.dim || correctors.n_y != grid.n_y)
        throw std::invalid_argument("correctors were solved on a different grid");
    EffectiveTensor out;
    out.dim = grid.dim;
    out.regime = correctors.regime;
    out.b = MatN::zero(grid.dim);
    out.n_y = grid.n_y;
    out.n_s = grid.n_s;
    out.max_residual = correctors.max_residual;

    if (correctors.regime == Regime::SuperCritical) {
        if (correctors.n_s != 1)
            throw std::invalid_argument("a supercritical corrector must carry one slice");
        // the same rectangle rule in s that the averaged cell problem used
        const AveragedCoefficient avg(
            std::make_shared<CoefficientField>(field), grid.n_s);
        const CellOperator op(sample_slice(avg, grid), grid);
        out.c0_estimate = op.min_face_coercivity();
        for (int j = 0; j < grid.dim; ++j) {
            const auto col = op.mean_total_flux(correctors.slice(j, 0), j);
            for (int i = 0; i < grid.dim; ++i) out.b(i, j) = col[i];
        }
        return out;
    }

    if (correctors.n_s != grid.n_s)
        throw std::invalid_argument("corrector slice count does not match the grid");
    // rectangle rule over slices s_k = k/n_s; an s-independent coefficient
    // has identical slices, so one term suffices
    const int terms = field.depends_on_s() ? grid.n_s : 1;
    out.c0_estimate = std::numeric_limits<double>::infinity();
    for (int k = 0; k < terms; ++k) {
        const CellOperator op(sample_slice(field, grid, static_cast<double>(k) / grid.n_s), grid);
        out.c0_estimate = std::min(out.c0_estimate, op.min_face_coercivity());
        for (int j = 0; j < grid.dim; ++j) {
            const auto col = op.mean_total_flux(correctors.slice(j, k), j);
            for (int i = 0; i < grid.dim; ++i) out.b(i, j) += col[i];
        }
    }
    for (double& v : out.b.e) v /= terms;
    return out;
}

// Classical two-sided sanity bounds in 1D: the minimum over s of the
// harmonic mean must not exceed b, and the full arithmetic mean must not
// fall below it. Both sides are computed from the same face-averaged
// discrete coefficient the assembly used. Report-only.
struct BoundsReport1D {
    double lower = 0.0;  // min over s of the discrete harmonic mean
    double upper = 0.0;  // discrete arithmetic mean over y and s
    double value = 0.0;
    bool lower_ok = false;
    bool upper_ok = false;
    bool pass() const { return lower_ok && upper_ok; }
};

inline BoundsReport1D check_bounds_1d(const CoefficientField& field, const EffectiveTensor& b,
                                      const CellGrid& grid, double tol = 1e-8) {
    if (field.dim() != 1 || b.dim != 1)
        throw std::invalid_argument("the two-sided bounds are a 1D check");
    BoundsReport1D rep;
    rep.value = b.scalar();
    double lower = 0.0;
    double mean_all = 0.0;
    for (int k = 0; k < grid.n_s; ++k) {
        const double s = static_cast<double>(k) / grid.n_s;
        double inv_sum = 0.0, sum = 0.0;
        for (int i = 0; i < grid.n_y; ++i) {
            const double a0 = field.scalar(static_cast<double>(i) / grid.n_y, s);
            const double a1 = field.scalar(static_cast<double>(i + 1) / grid.n_y, s);
            const double face = 0.5 * (a0 + a1);
            inv_sum += 1.0 / face;
            sum += face;
        }
        const double harmonic = grid.n_y / inv_sum;
        if (k == 0 || harmonic < lower) lower = harmonic;
        mean_all += sum / grid.n_y;
    }
    rep.lower = lower;
    rep.upper = mean_all / grid.n_s;
    rep.lower_ok = rep.value >= rep.lower - tol;
    rep.upper_ok = rep.value <= rep.upper + tol;
    return rep;
}

}  // namespace homog
