#include "gridloop/errors.hpp"
#include "gridloop/sensing.hpp"

#include <doctest.h>

#include <cmath>

using namespace gridloop;
using namespace gridloop::sensing;

namespace {

MeasurementPlan default_plan(int n, std::uint64_t seed = 1) {
    MeasurementPlan plan;
    plan.v_sensors = {1, n / 2 + 1, n};  // near-substation, mid-feeder, end-of-feeder
    plan.sigma_v = Vec::Constant(3, 0.01);
    plan.sigma_p = Vec::Constant(n, 0.5);
    plan.sigma_q = Vec::Constant(n, 0.5);
    plan.seed = seed;
    plan.validate_and_clamp(n);
    return plan;
}

TrueState flat_state(int n) {
    return TrueState{Vec::Constant(n, 0.1), Vec::Constant(n, -0.05), Vec::Constant(n, 1.02)};
}

} // namespace

TEST_CASE("noiseless validation mode reproduces the true voltages") {
    const int n = 6;
    MeasurementPlan plan = default_plan(n);
    plan.sigma_v.setZero();  // clamped to 1e-12 by validation
    plan.validate_and_clamp(n);
    const auto snap = take_measurements(plan, flat_state(n), 3, Vec::Zero(n), Vec::Zero(n));
    for (size_t s = 0; s < plan.v_sensors.size(); ++s)
        CHECK(std::abs(snap.v_meas[s] - 1.02) < 1e-9);
}

TEST_CASE("the default plan carries three sensors with 1%/50% noise levels") {
    const MeasurementPlan plan = default_plan(36);
    CHECK(plan.sensor_count() == 3);
    CHECK(plan.sigma_v[0] == 0.01);
    CHECK(plan.sigma_p[17] == 0.5);
    CHECK(plan.sigma_q[35] == 0.5);
}

TEST_CASE("identical arguments produce identical snapshots") {
    const int n = 5;
    const MeasurementPlan plan = default_plan(n, 77);
    const Vec nom_p = Vec::Constant(n, 0.08), nom_q = Vec::Constant(n, -0.02);
    const auto a = take_measurements(plan, flat_state(n), 9, nom_p, nom_q);
    const auto b = take_measurements(plan, flat_state(n), 9, nom_p, nom_q);
    CHECK(a.v_meas == b.v_meas);
    CHECK((a.p_pseudo - b.p_pseudo).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.q_pseudo - b.q_pseudo).cwiseAbs().maxCoeff() == 0.0);

    // sensor noise refreshes across iterations, pseudo draws do not
    const auto c = take_measurements(plan, flat_state(n), 10, nom_p, nom_q);
    CHECK(c.v_meas != a.v_meas);
    CHECK((c.p_pseudo - a.p_pseudo).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.q_pseudo - a.q_pseudo).cwiseAbs().maxCoeff() == 0.0);

    // and a different seed moves everything
    MeasurementPlan other = plan;
    other.seed = 78;
    const auto d = take_measurements(other, flat_state(n), 9, nom_p, nom_q);
    CHECK(d.v_meas != a.v_meas);
    CHECK((d.p_pseudo - a.p_pseudo).cwiseAbs().minCoeff() != 0.0);
}

TEST_CASE("snapshot keeps the true voltages for error accounting") {
    const int n = 4;
    const auto snap = take_measurements(default_plan(n), flat_state(n), 0,
                                        Vec::Zero(n), Vec::Zero(n));
    CHECK((snap.true_v - Vec::Constant(n, 1.02)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample std of the sensor noise matches the configured sigma") {
    const CounterRng rng(123);
    const int draws = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double z = rng.normal(static_cast<std::uint64_t>(i), 5, Quantity::VoltageMag);
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / draws;
    const double std = std::sqrt(sum_sq / draws - mean * mean);
    CHECK(std::abs(std - 1.0) < 0.02);
    CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("plans with bad sensors or negative sigmas are rejected") {
    MeasurementPlan plan = default_plan(5);
    plan.v_sensors = {0};
    plan.sigma_v = Vec::Constant(1, 0.01);
    CHECK_THROWS_AS(plan.validate_and_clamp(5), ValidationError);

    MeasurementPlan neg = default_plan(5);
    neg.sigma_p[2] = -0.1;
    CHECK_THROWS_AS(neg.validate_and_clamp(5), ValidationError);

    MeasurementPlan misaligned = default_plan(5);
    misaligned.sigma_v = Vec::Constant(2, 0.01);
    CHECK_THROWS_AS(misaligned.validate_and_clamp(5), DimensionError);
}
