#include <catch_amalgamated.hpp>

#include "lophoton/polarization.hpp"

using namespace lophoton;
using Catch::Matchers::WithinAbs;

namespace {

double max_abs(const JonesMatrix& m) {
    return m.cwiseAbs().maxCoeff();
}

// Phase-insensitive equality of 2x2 operators: m = e^{i phi} n.
bool equal_up_to_phase(const JonesMatrix& m, const JonesMatrix& n, double tol) {
    Eigen::Index r = 0, c = 0;
    n.cwiseAbs().maxCoeff(&r, &c);
    const complex phase = m(r, c) / n(r, c);
    return std::abs(std::abs(phase) - 1.0) < tol && max_abs(m - phase * n) < tol;
}

}  // namespace

TEST_CASE("basis states", "[polarization]") {
    const double s = M_SQRT1_2;
    CHECK((basis_state(pol::H) - JonesVector(1, 0)).norm() == 0.0);
    CHECK((basis_state(pol::A) - JonesVector(s, -s)).norm() < 1e-15);
    CHECK(std::abs(basis_state(pol::R).dot(basis_state(pol::L))) < 1e-15);
    CHECK((basis_state("R") - JonesVector(s, complex(0, -s))).norm() < 1e-15);
    for (auto p : all_pols) CHECK_THAT(basis_state(p).norm(), WithinAbs(1.0, 1e-12));

    try {
        basis_state("h");
        FAIL("expected UnknownLabel");
    } catch (const error& e) {
        CHECK(e.code() == errc::unknown_label);
    }
}

TEST_CASE("six states form three mutually unbiased bases", "[polarization]") {
    auto basis_of = [](pol p) { return static_cast<int>(p) / 2; };
    for (auto a : all_pols)
        for (auto b : all_pols) {
            const double overlap = std::norm(basis_state(a).dot(basis_state(b)));
            if (a == b)
                CHECK_THAT(overlap, WithinAbs(1.0, 1e-12));
            else if (basis_of(a) == basis_of(b))
                CHECK_THAT(overlap, WithinAbs(0.0, 1e-12));
            else
                CHECK_THAT(overlap, WithinAbs(0.5, 1e-12));
        }
}

TEST_CASE("half-wave plate", "[polarization]") {
    JonesMatrix z;
    z << 1, 0, 0, -1;
    CHECK(max_abs(hwp(0.0) - z) < 1e-15);

    const JonesMatrix h = hwp(degrees(22.5));
    CHECK(max_abs(projector(JonesVector(h * basis_state(pol::H))) - projector(pol::D)) < 1e-12);
    CHECK(max_abs(projector(JonesVector(h * basis_state(pol::V))) - projector(pol::A)) < 1e-12);

    const JonesMatrix swap = hwp(degrees(45.0));
    CHECK(max_abs(projector(JonesVector(swap * basis_state(pol::H))) - projector(pol::V)) < 1e-12);

    for (int k = 0; k < 100; ++k) {
        const JonesMatrix m = hwp(0.0731 * k - 2.0);
        CHECK(max_abs(m * m - JonesMatrix::Identity()) < 1e-12);
        CHECK(max_abs(m.adjoint() * m - JonesMatrix::Identity()) < 1e-12);
        CHECK(max_abs(m - m.adjoint()) < 1e-15);
    }
}

TEST_CASE("quarter-wave plate", "[polarization]") {
    JonesMatrix expected;
    expected << 1, 0, 0, complex(0, 1);
    CHECK(equal_up_to_phase(qwp(0.0), expected, 1e-12));

    const JonesVector out = qwp(degrees(45.0)) * basis_state(pol::H);
    const double circ = std::max(std::norm(basis_state(pol::R).dot(out)), std::norm(basis_state(pol::L).dot(out)));
    CHECK_THAT(circ, WithinAbs(1.0, 1e-12));

    for (int k = 0; k < 50; ++k) {
        const double theta = 0.113 * k - 1.3;
        const JonesMatrix q = qwp(theta);
        CHECK(max_abs(q.adjoint() * q - JonesMatrix::Identity()) < 1e-12);
        CHECK(equal_up_to_phase(q * q, hwp(theta), 1e-12));
    }
}

TEST_CASE("projectors", "[polarization]") {
    JonesMatrix h;
    h << 1, 0, 0, 0;
    CHECK(max_abs(projector(pol::H) - h) < 1e-15);
    JonesMatrix d;
    d << 0.5, 0.5, 0.5, 0.5;
    CHECK(max_abs(projector(pol::D) - d) < 1e-15);
    for (auto [a, b] : {std::pair{pol::H, pol::V}, {pol::D, pol::A}, {pol::R, pol::L}})
        CHECK(max_abs(projector(a) + projector(b) - JonesMatrix::Identity()) < 1e-12);
    for (auto p : all_pols) {
        const JonesMatrix m = projector(p);
        CHECK(max_abs(m * m - m) < 1e-12);
        CHECK(max_abs(m - m.adjoint()) < 1e-15);
        CHECK_THAT(m.trace().real(), WithinAbs(1.0, 1e-12));
    }
}
