#include "gridloop/acpf.hpp"
#include "gridloop/errors.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

using namespace gridloop;
using namespace gridloop::acpf;

TEST_CASE("zero injection gives the closed-form no-load profile") {
    const auto c = testing::chain_case(3);
    const auto adm = build_admittance(c);
    const auto sol = solve_pf(adm, Vec::Zero(3), Vec::Zero(3), c.substation().voltage);

    const CVec expect = adm.Y.partialPivLu().solve(CVec(-adm.y_bar * c.substation().voltage));
    CHECK((sol.v - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(sol.residual < 1e-12);
    CHECK((sol.v_mag - sol.v.cwiseAbs()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-bus solve matches the scalar quadratic oracle") {
    const auto c = testing::two_bus_case();
    const auto adm = build_admittance(c);
    Vec p(1), q(1);
    p << 0.1;
    q << 0.0;
    const auto sol = solve_pf(adm, p, q, Complex(1.0, 0.0));
    CHECK(sol.residual <= 1e-9);
    const double oracle = testing::single_line_vmag({0.01, 0.02}, 1.0, 0.1, 0.0);
    CHECK(sol.v_mag[0] == doctest::Approx(oracle).epsilon(1e-8));

    // loaded and reactive variants
    for (double pp : {-0.5, -0.1, 0.3}) {
        for (double qq : {-0.2, 0.0, 0.2}) {
            p << pp;
            q << qq;
            const auto s2 = solve_pf(adm, p, q, Complex(1.0, 0.0));
            const double vm = testing::single_line_vmag({0.01, 0.02}, 1.0, pp, qq);
            CHECK(s2.v_mag[0] == doctest::Approx(vm).epsilon(1e-8));
        }
    }
}

TEST_CASE("two-line chain matches the Newton oracle") {
    const auto c = testing::chain_case(2);
    const auto adm = build_admittance(c);
    Vec p(2), q(2);
    p << 0.2, -0.15;
    q << -0.05, 0.1;
    const auto sol = solve_pf(adm, p, q, Complex(1.0, 0.0));
    const CVec oracle = testing::newton_pf(adm, p, q, Complex(1.0, 0.0));
    CHECK((sol.v_mag - oracle.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("far-infeasible injection diverges") {
    const auto c = testing::two_bus_case();
    const auto adm = build_admittance(c);
    Vec p(1), q(1);
    p << 100.0;
    q << 0.0;
    CHECK_THROWS_AS(solve_pf(adm, p, q, Complex(1.0, 0.0)), DivergenceError);
}

TEST_CASE("collapse floor catches heavy loading before a low-voltage branch") {
    const auto c = testing::two_bus_case();
    const auto adm = build_admittance(c);
    Vec p(1), q(1);
    p << -20.0;  // drawing 20 pu through a 0.01+0.02j line cannot hold voltage
    q << 0.0;
    CHECK_THROWS_AS(solve_pf(adm, p, q, Complex(1.0, 0.0)), DivergenceError);
}

TEST_CASE("residual contract holds on random feasible injections") {
    const auto c = testing::chain_case(5);
    const auto adm = build_admittance(c);
    testing::TestRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Vec p(5), q(5);
        for (int i = 0; i < 5; ++i) {
            p[i] = rng.uniform(-0.3, 0.3);
            q[i] = rng.uniform(-0.3, 0.3);
        }
        const auto sol = solve_pf(adm, p, q, Complex(1.0, 0.0));
        // recompute the mismatch from scratch
        CVec v = sol.v;
        const CVec inj = adm.Y * v + adm.y_bar * Complex(1.0, 0.0);
        double worst = 0.0;
        for (int i = 0; i < 5; ++i)
            worst = std::max(worst, std::abs(Complex(p[i], q[i]) - v[i] * std::conj(inj[i])));
        CHECK(worst <= 1e-9);
        CHECK(sol.residual <= 1e-9);
    }
}

TEST_CASE("injection strictly raises |v| on the radial two-bus case") {
    const auto c = testing::two_bus_case();
    const auto adm = build_admittance(c);
    double prev = 0.0;
    bool first = true;
    for (double pp = -0.5; pp <= 0.5; pp += 0.1) {
        Vec p(1), q(1);
        p << pp;
        q << 0.0;
        const double vm = solve_pf(adm, p, q, Complex(1.0, 0.0)).v_mag[0];
        if (!first) CHECK(vm > prev);
        prev = vm;
        first = false;
    }
}

TEST_CASE("prefactored plant solver reproduces one-shot solves") {
    const auto c = testing::chain_case(4);
    const auto adm = build_admittance(c);
    const PlantSolver plant(adm, Complex(1.0, 0.0));
    Vec p = Vec::Constant(4, 0.05), q = Vec::Constant(4, -0.02);
    const auto a = plant.solve(p, q);
    const auto b = solve_pf(adm, p, q, Complex(1.0, 0.0));
    CHECK((a.v - b.v).cwiseAbs().maxCoeff() == 0.0);
}
