#include "gridloop/errors.hpp"
#include "gridloop/scenario.hpp"

#include <doctest.h>

#include <string>

using namespace gridloop;
using namespace gridloop::scenario;

namespace {

const std::string kDataDir = GRIDLOOP_DATA_DIR;

std::string minimal_scenario(const std::string& extra_problem = "",
                             const std::string& extra_loop = "") {
    return R"({
      "case_path": "case37.json",
      "problem": {"v_lo": 0.95, "v_hi": 1.05)" + extra_problem + R"(},
      "plan": {"v_sensors": [1, 27, 29], "seed": 7},
      "loop": {"mode": "se_feedback")" + extra_loop + R"(}
    })";
}

} // namespace

TEST_CASE("bundled scenario parses, builds and certifies") {
    const Scenario s = load_scenario(kDataDir + "/scenario37_se.json");
    CHECK(s.plan.v_sensors == std::vector<int>{1, 27, 29});
    CHECK(s.problem.boxes.size() == 21);
    REQUIRE(s.loop.eps.has_value());  // pinned inside the certified range

    const BuiltScenario built = build_scenario(s, kDataDir);
    CHECK(built.net.bus_count() == 36);
    CHECK(built.config.eps == *s.loop.eps);
    CHECK(built.config.eps < built.certificate.eps_max);
    CHECK(built.config.plan.sigma_p.size() == 36);
    CHECK(built.problem.constraint_count() == 72);
    // unlisted buses are pinned at nominal
    CHECK(built.problem.p_min[0] == built.problem.p_max[0]);
    // listed PV buses can curtail
    CHECK(built.problem.p_min[31 - 1] < built.problem.p_max[31 - 1]);
}

TEST_CASE("auto step size resolves to 0.9 eps_max") {
    const Scenario s = load_scenario(kDataDir + "/scenario5_linear.json");
    CHECK_FALSE(s.loop.eps.has_value());
    const BuiltScenario built = build_scenario(s, kDataDir);
    CHECK(built.config.eps == doctest::Approx(0.9 * built.certificate.eps_max));
}

TEST_CASE("defaults are materialized") {
    const Scenario s = parse_scenario(minimal_scenario());
    CHECK(s.problem.eta == 1e-3);
    CHECK(s.loop.max_iters == 5000);
    CHECK(s.loop.stop_tol == 1e-7);
    CHECK(s.outputs.trace_path == "trace.csv");
    CHECK(s.plan.sigma_v.size() == 3);
    CHECK(s.plan.sigma_v[0] == 0.01);
    CHECK(std::get<double>(s.plan.sigma_p) == 0.5);
}

TEST_CASE("unknown keys are rejected at every level") {
    CHECK_THROWS_AS(parse_scenario(R"({"case_path": "x", "problem": {"v_lo": 0.9, "v_hi": 1.1},
        "plan": {"v_sensors": [], "seed": 1}, "loop": {"mode": "linear_model"},
        "bogus_key": 1})"),
                    ParseError);
    CHECK_THROWS_AS(parse_scenario(minimal_scenario(", \"volt_band\": 1")), ParseError);
    CHECK_THROWS_AS(parse_scenario(minimal_scenario("", ", \"epsilon\": 0.1")), ParseError);
}

TEST_CASE("invariants are enforced") {
    CHECK_THROWS_AS(parse_scenario(R"({"case_path": "x",
        "problem": {"v_lo": 1.05, "v_hi": 0.95},
        "plan": {"v_sensors": [], "seed": 1}, "loop": {"mode": "linear_model"}})"),
                    ValidationError);
    CHECK_THROWS_AS(parse_scenario(minimal_scenario(", \"eta\": 0.0")), ValidationError);
    CHECK_THROWS_AS(parse_scenario(minimal_scenario("", ", \"eps\": -1.0")), ValidationError);
    CHECK_THROWS_AS(parse_scenario(minimal_scenario("", ", \"eps\": \"fast\"")), ParseError);
    CHECK_THROWS_AS(parse_scenario(minimal_scenario("", ", \"max_iters\": 0")), ValidationError);
}

TEST_CASE("explicit eps outside the certified range is rejected at build") {
    Scenario s = load_scenario(kDataDir + "/scenario37_se.json");
    s.loop.eps = 10.0;  // far beyond eps_max
    CHECK_THROWS_AS(build_scenario(s, kDataDir), ValidationError);
}

TEST_CASE("echo round-trips to an identical structure") {
    const Scenario a = load_scenario(kDataDir + "/scenario37_se.json");
    const Scenario b = parse_scenario(scenario_to_json(a));
    CHECK(a == b);

    // a maximal synthetic scenario: explicit eps, per-bus sigma arrays,
    // explicit linearization point, cost overrides
    std::string text = R"({
      "case_path": "nowhere.json",
      "linearization_point": {"mode": "explicit", "p": [0.1, 0.2], "q": [0.0, -0.1]},
      "problem": {
        "v_lo": 0.9, "v_hi": 1.1, "eta": 0.02,
        "default_c2_p": 2.0, "default_c2_q": 0.2,
        "costs": [{"bus": 2, "c2_p": 1.5, "c2_q": 0.3, "p_target": 0.25}],
        "boxes": [{"bus": 1, "p_min": 0.0, "p_max": 0.4, "q_min": -0.1, "q_max": 0.1}]
      },
      "plan": {"v_sensors": [2], "sigma_v": [0.02], "sigma_p": [0.4, 0.6],
               "sigma_q": 0.5, "seed": 42},
      "loop": {"mode": "linear_model", "eps": 0.001, "max_iters": 100, "stop_tol": 1e-9,
               "use_estimate_at_sensed": true},
      "outputs": {"trace_path": "t.csv", "summary_path": "s.json"}
    })";
    const Scenario c = parse_scenario(text);
    const Scenario d = parse_scenario(scenario_to_json(c));
    CHECK(c == d);
    CHECK(d.loop.eps.has_value());
    CHECK(*d.loop.eps == 0.001);
    CHECK(std::get<std::vector<double>>(d.plan.sigma_p) == std::vector<double>{0.4, 0.6});
}

TEST_CASE("duplicate and unknown bus references are rejected") {
    CHECK_THROWS_AS(
        parse_scenario(minimal_scenario(
            ", \"boxes\": [{\"bus\": 4, \"p_min\": 0, \"p_max\": 1, \"q_min\": 0, \"q_max\": 0},"
            "{\"bus\": 4, \"p_min\": 0, \"p_max\": 1, \"q_min\": 0, \"q_max\": 0}]")),
        ValidationError);

    Scenario s = load_scenario(kDataDir + "/scenario37_se.json");
    s.problem.boxes.push_back({99, 0.0, 1.0, 0.0, 0.0});
    CHECK_THROWS_AS(build_scenario(s, kDataDir), ValidationError);
}
