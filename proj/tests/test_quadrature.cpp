#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "lophoton/quadrature.hpp"

using namespace lophoton;
using Catch::Matchers::WithinRel;

TEST_CASE("gauss-kronrod reproduces closed forms", "[quadrature]") {
    // Gaussian moment: int_0^inf v exp(-v^2/c^2) dv = c^2/2, truncated far out.
    const double c = 4.9;
    auto r = quadrature::integrate([&](double v) { return v * std::exp(-v * v / (c * c)); }, 0.0, 8.0 * c);
    CHECK_THAT(r.value, WithinRel(c * c / 2.0, 1e-12));

    // int_0^inf x^10 exp(-x^2) dx = Gamma(11/2) / 2
    auto m = quadrature::integrate([](double x) { return std::pow(x, 10) * std::exp(-x * x); }, 0.0, 12.0);
    CHECK_THAT(m.value, WithinRel(std::tgamma(5.5) / 2.0, 1e-10));

    // Bose integral: int_0^inf x^2 / (e^x - 1) dx = 2 zeta(3)
    auto bose = quadrature::integrate([](double x) { return x == 0.0 ? 0.0 : x * x / std::expm1(x); }, 0.0, 80.0,
                                      {1e-12, 0.0, 4000});
    CHECK_THAT(bose.value, WithinRel(2.0 * 1.2020569031595942, 1e-11));

    auto osc = quadrature::integrate([](double x) { return std::sin(x); }, 0.0, 40.0 * std::numbers::pi,
                                     {1e-10, 1e-13, 4000});
    CHECK(std::abs(osc.value) < 1e-10);
}

TEST_CASE("error estimate tracks the requested tolerance", "[quadrature]") {
    auto f = [](double v) {
        const double x = v / 0.5;
        const double em = -std::expm1(-x);
        return v == 0.0 ? 0.0 : std::pow(v, 10) * std::exp(-v * v / 24.01) * std::exp(-x) / (em * em);
    };
    double previous = std::numeric_limits<double>::infinity();
    for (double tol = 1e-4; tol >= 1e-12; tol /= 2.0) {
        auto r = quadrature::integrate(f, 0.0, 39.2, {tol, 0.0, 4000});
        CHECK(r.error <= tol * std::abs(r.value));
        CHECK(r.error <= previous);
        previous = r.error;
    }
}

TEST_CASE("divergent integrals exhaust the budget", "[quadrature]") {
    try {
        quadrature::integrate([](double x) { return 1.0 / x; }, 0.0, 1.0, {1e-10, 0.0, 200});
        FAIL("expected QuadratureFailure");
    } catch (const error& e) {
        CHECK(e.code() == errc::quadrature_failure);
    }
}
