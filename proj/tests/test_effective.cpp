#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "homog/cell.hpp"
#include "homog/coefficient.hpp"
#include "homog/effective.hpp"

using homog::AveragedCoefficient;
using homog::CellGrid;
using homog::CoefficientField;
using homog::CorrectorField;
using homog::effective_tensor;
using homog::EffectiveTensor;
using homog::Regime;
using homog::check_bounds_1d;
using homog::solve_averaged_cell;
using homog::solve_elliptic_cell_family;
using homog::solve_parabolic_cell;
using Catch::Matchers::WithinAbs;

namespace {
constexpr double pi = std::numbers::pi;
const double sqrt3 = std::sqrt(3.0);

CoefficientField scalar1d(const std::string& text) {
    return CoefficientField::from_expressions(1, {{text}});
}

// independent reassembly: discrete harmonic mean of the face coefficients
double harmonic_mean_faces(const CoefficientField& a, int n, double s) {
    double inv_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double ai = a.scalar(static_cast<double>(i) / n, s);
        const double aip = a.scalar(static_cast<double>(i + 1) / n, s);
        inv_sum += 1.0 / (0.5 * (ai + aip));
    }
    return n / inv_sum;
}
}  // namespace

TEST_CASE("identity coefficient yields the identity tensor in every regime") {
    for (int dim : {1, 2}) {
        const auto a = CoefficientField::identity(dim);
        const CellGrid grid(dim, 16, 4);
        const AveragedCoefficient avg(std::make_shared<CoefficientField>(a), grid.n_s);
        for (const CorrectorField& chi :
             {solve_elliptic_cell_family(a, grid), solve_parabolic_cell(a, grid),
              solve_averaged_cell(avg, grid)}) {
            CHECK(chi.max_abs() == 0.0);
            const EffectiveTensor b = effective_tensor(a, chi, grid);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j)
                    CHECK_THAT(b.b(i, j), WithinAbs(i == j ? 1.0 : 0.0, 1e-15));
        }
    }
}

TEST_CASE("1D effective value equals the discrete harmonic mean of the faces") {
    const auto a = scalar1d("2 + sin(2*pi*y)");
    const CellGrid grid(1, 256, 2);
    const CorrectorField chi = solve_elliptic_cell_family(a, grid);
    const EffectiveTensor b = effective_tensor(a, chi, grid);

    const double oracle = harmonic_mean_faces(a, grid.n_y, 0.0);
    CHECK_THAT(b.scalar(), WithinAbs(oracle, 1e-10));

    // and the discrete value converges to the analytic harmonic mean sqrt(3)
    CHECK_THAT(b.scalar(), WithinAbs(sqrt3, 1e-4));
    CHECK(b.c0_estimate >= 1.0);
    CHECK(b.max_residual <= 1e-10);
    CHECK(b.regime == Regime::SubCritical);
}

TEST_CASE("grid refinement converges quadratically to the harmonic mean") {
    const auto a = scalar1d("2 + sin(2*pi*y)");
    double prev_err = 0.0;
    for (int k = 0; k < 2; ++k) {
        const int n = k == 0 ? 64 : 128;
        const CellGrid grid(1, n, 2);
        const EffectiveTensor b =
            effective_tensor(a, solve_elliptic_cell_family(a, grid), grid);
        const double err = std::abs(b.scalar() - sqrt3);
        if (k == 1) {
            const double order = std::log2(prev_err / err);
            CHECK(order > 1.8);
            CHECK(order < 2.2);
        }
        prev_err = err;
    }
}

TEST_CASE("s-dependent subcritical tensor averages the per-slice fluxes") {
    // traveling wave: every slice has the same harmonic mean, so the s-average
    // changes nothing and the tensor matches the per-slice oracle
    const auto a = scalar1d("2 + sin(2*pi*(y - s))");
    const CellGrid grid(1, 64, 8);
    const EffectiveTensor b = effective_tensor(a, solve_elliptic_cell_family(a, grid), grid);
    CHECK_THAT(b.scalar(), WithinAbs(harmonic_mean_faces(a, grid.n_y, 0.0), 1e-9));
}

TEST_CASE("supercritical tensor sees only the s-averaged coefficient") {
    // the oscillation is odd in s: the s-average is the constant 2
    const auto a = scalar1d("2 + sin(2*pi*y)*cos(2*pi*s)");
    const CellGrid grid(1, 64, 32);
    const AveragedCoefficient avg(std::make_shared<CoefficientField>(a), grid.n_s);
    const EffectiveTensor b = effective_tensor(a, solve_averaged_cell(avg, grid), grid);
    CHECK_THAT(b.scalar(), WithinAbs(2.0, 1e-12));
    CHECK(b.n_s == 32);
}

TEST_CASE("2D laminate tensor is diag(harmonic mean, arithmetic mean)") {
    const auto a = CoefficientField::from_expressions(
        2, {{"2 + sin(2*pi*y1)", "0"}, {"0", "2 + sin(2*pi*y1)"}});
    const CellGrid grid(2, 64, 2);
    const EffectiveTensor b = effective_tensor(a, solve_elliptic_cell_family(a, grid), grid);

    const auto a1 = scalar1d("2 + sin(2*pi*y)");
    CHECK_THAT(b.b(0, 0), WithinAbs(harmonic_mean_faces(a1, grid.n_y, 0.0), 1e-9));
    CHECK_THAT(b.b(1, 1), WithinAbs(2.0, 1e-12));
    CHECK_THAT(b.b(0, 1), WithinAbs(0.0, 1e-12));
    CHECK_THAT(b.b(1, 0), WithinAbs(0.0, 1e-12));
    CHECK(b.min_eig_sym() > 1.0);
}

TEST_CASE("two-sided 1D bounds bracket the effective value") {
    const auto a = scalar1d("2 + sin(2*pi*y)");
    const CellGrid grid(1, 128, 2);
    const EffectiveTensor b = effective_tensor(a, solve_elliptic_cell_family(a, grid), grid);
    const auto rep = check_bounds_1d(a, b, grid);
    CHECK(rep.lower_ok);
    CHECK(rep.upper_ok);
    CHECK(rep.lower <= b.scalar());
    CHECK(b.scalar() <= rep.upper);
    CHECK_THAT(rep.lower, WithinAbs(sqrt3, 5e-4));
    CHECK_THAT(rep.upper, WithinAbs(2.0, 1e-12));

    const CellGrid grid2(2, 16, 2);
    const auto a2 = CoefficientField::identity(2);
    const EffectiveTensor b2 =
        effective_tensor(a2, solve_elliptic_cell_family(a2, grid2), grid2);
    CHECK_THROWS_AS(check_bounds_1d(a2, b2, grid2), std::invalid_argument);
}

TEST_CASE("effective assembly rejects mismatched correctors") {
    const auto a = scalar1d("2 + sin(2*pi*y)");
    const CellGrid grid(1, 32, 2);
    const CorrectorField chi = solve_elliptic_cell_family(a, grid);
    const CellGrid other(1, 64, 2);
    CHECK_THROWS_AS(effective_tensor(a, chi, other), std::invalid_argument);
}

TEST_CASE("scaling the coefficient scales the tensor linearly") {
    const auto a = scalar1d("2 + sin(2*pi*y)");
    const auto a5 = scalar1d("5*(2 + sin(2*pi*y))");
    const CellGrid grid(1, 64, 2);
    const double b = effective_tensor(a, solve_elliptic_cell_family(a, grid), grid).scalar();
    const double b5 = effective_tensor(a5, solve_elliptic_cell_family(a5, grid), grid).scalar();
    CHECK_THAT(b5, WithinAbs(5.0 * b, 1e-9));
}
