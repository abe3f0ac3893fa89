#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "homog/linsolve.hpp"

using homog::bicgstab;
using homog::conjugate_gradient;
using homog::SolverDiverged;
using homog::TridiagonalSolver;
using Catch::Matchers::WithinAbs;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("conjugate gradient solves a small SPD system") {
    // A = [[4,1],[1,3]], b = [1,2]  =>  x = (1/11, 7/11)
    auto apply = [](std::span<const double> x, std::span<double> y) {
        y[0] = 4.0 * x[0] + x[1];
        y[1] = x[0] + 3.0 * x[1];
    };
    const std::vector<double> b = {1.0, 2.0};
    std::vector<double> x(2);
    const auto rep = conjugate_gradient(apply, b, std::span<double>(x), 1e-14, 50);
    CHECK_THAT(x[0], WithinAbs(1.0 / 11.0, 1e-12));
    CHECK_THAT(x[1], WithinAbs(7.0 / 11.0, 1e-12));
    CHECK(rep.residual <= 1e-14);
    CHECK(rep.iterations <= 3);
    CHECK(rep.solver == "cg");
}

TEST_CASE("conjugate gradient with constant projection solves a periodic stencil") {
    // periodic second-difference stencil; right-hand side is a discrete
    // Fourier mode, an exact eigenvector with eigenvalue 2 - 2 cos(2 pi / n)
    const int n = 8;
    auto apply = [n](std::span<const double> x, std::span<double> y) {
        for (int i = 0; i < n; ++i) {
            const int im = (i + n - 1) % n, ip = (i + 1) % n;
            y[i] = 2.0 * x[i] - x[im] - x[ip];
        }
    };
    std::vector<double> b(n);
    for (int i = 0; i < n; ++i) b[i] = std::sin(2.0 * pi * i / n);
    std::vector<double> x(n);
    conjugate_gradient(apply, b, std::span<double>(x), 1e-13, 100, /*project_constants=*/true);

    const double lambda = 2.0 - 2.0 * std::cos(2.0 * pi / n);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
        CHECK_THAT(x[i], WithinAbs(b[i] / lambda, 1e-10));
        mean += x[i];
    }
    // the returned representative of the quotient space has zero mean
    CHECK_THAT(mean / n, WithinAbs(0.0, 1e-13));
}

TEST_CASE("constant projection removes an incompatible right-hand side component") {
    const int n = 4;
    auto apply = [n](std::span<const double> x, std::span<double> y) {
        for (int i = 0; i < n; ++i) {
            const int im = (i + n - 1) % n, ip = (i + 1) % n;
            y[i] = 2.0 * x[i] - x[im] - x[ip];
        }
    };
    // constant rhs lies entirely in the null space: projected problem is x = 0
    const std::vector<double> b = {3.0, 3.0, 3.0, 3.0};
    std::vector<double> x(n, 1.0);
    const auto rep =
        conjugate_gradient(apply, b, std::span<double>(x), 1e-13, 50, /*project_constants=*/true);
    for (double v : x) CHECK(v == 0.0);
    CHECK(rep.iterations == 0);
}

TEST_CASE("bicgstab solves a non-symmetric system") {
    // A = [[2,1],[0,1]], b = [3,1]  =>  x = (1,1)
    auto apply = [](std::span<const double> x, std::span<double> y) {
        y[0] = 2.0 * x[0] + x[1];
        y[1] = x[1];
    };
    const std::vector<double> b = {3.0, 1.0};
    std::vector<double> x(2);
    const auto rep = bicgstab(apply, b, std::span<double>(x), 1e-13, 50);
    CHECK_THAT(x[0], WithinAbs(1.0, 1e-11));
    CHECK_THAT(x[1], WithinAbs(1.0, 1e-11));
    CHECK(rep.solver == "bicgstab");
}

TEST_CASE("solvers throw when the iteration budget runs out") {
    const int n = 40;
    auto apply = [n](std::span<const double> x, std::span<double> y) {
        for (int i = 0; i < n; ++i) y[i] = static_cast<double>(i + 1) * x[i];
    };
    const std::vector<double> b(n, 1.0);
    std::vector<double> x(n);
    try {
        conjugate_gradient(apply, b, std::span<double>(x), 1e-14, 3);
        FAIL("expected SolverDiverged");
    } catch (const SolverDiverged& e) {
        CHECK(e.report.iterations == 3);
        CHECK(e.report.residual > 1e-14);
    }
    CHECK_THROWS_AS(bicgstab(apply, b, std::span<double>(x), 1e-14, 2), SolverDiverged);
}

TEST_CASE("zero right-hand side returns zero without iterating") {
    auto apply = [](std::span<const double> x, std::span<double> y) {
        y[0] = 2.0 * x[0];
    };
    const std::vector<double> b = {0.0};
    std::vector<double> x = {7.0};
    const auto rep = conjugate_gradient(apply, b, std::span<double>(x), 1e-12, 10);
    CHECK(x[0] == 0.0);
    CHECK(rep.iterations == 0);
}

TEST_CASE("tridiagonal elimination reproduces a hand-solved system") {
    // [[2,1,0],[1,2,1],[0,1,2]] x = [1,2,3]  =>  x = (1/2, 0, 3/2)
    const std::vector<double> lower = {0.0, 1.0, 1.0};
    const std::vector<double> diag = {2.0, 2.0, 2.0};
    const std::vector<double> upper = {1.0, 1.0, 0.0};
    TridiagonalSolver ts;
    ts.factor(lower, diag, upper);
    std::vector<double> x = {1.0, 2.0, 3.0};
    ts.solve(x);
    CHECK_THAT(x[0], WithinAbs(0.5, 1e-14));
    CHECK_THAT(x[1], WithinAbs(0.0, 1e-14));
    CHECK_THAT(x[2], WithinAbs(1.5, 1e-14));

    // refactoring with new data reuses the object
    ts.factor(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 4.0},
              std::vector<double>{0.0, 0.0});
    std::vector<double> y = {5.0, 8.0};
    ts.solve(y);
    CHECK_THAT(y[0], WithinAbs(5.0, 1e-15));
    CHECK_THAT(y[1], WithinAbs(2.0, 1e-15));
}

TEST_CASE("tridiagonal elimination rejects a zero pivot") {
    TridiagonalSolver ts;
    CHECK_THROWS_AS(ts.factor(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0},
                              std::vector<double>{1.0, 0.0}),
                    std::invalid_argument);
}
