#pragma once

#include "gridloop/controller.hpp"
#include "gridloop/loop.hpp"
#include "gridloop/netmodel.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gridloop::scenario {

struct LinearizationPoint {
    enum class Mode { Zero, Nominal, Explicit };
    Mode mode = Mode::Zero;
    std::vector<double> p, q;  // Explicit only

    bool operator==(const LinearizationPoint&) const = default;
};

struct CostSpec {
    int bus = 0;
    double c2_p = 1.0;
    double c2_q = 1.0;
    std::optional<double> p_target;  // defaults to the bus nominal

    bool operator==(const CostSpec&) const = default;
};

struct BoxSpec {
    int bus = 0;
    double p_min = 0.0, p_max = 0.0, q_min = 0.0, q_max = 0.0;

    bool operator==(const BoxSpec&) const = default;
};

/// Scalar sigmas broadcast over buses at build time.
using SigmaSpec = std::variant<double, std::vector<double>>;

struct ProblemSpec {
    double v_lo = 0.95;
    double v_hi = 1.05;
    double eta = 1e-3;
    double default_c2_p = 1.0;
    double default_c2_q = 1.0;
    std::vector<CostSpec> costs;  // sorted by bus
    std::vector<BoxSpec> boxes;   // sorted by bus; listed buses are the controllable set

    bool operator==(const ProblemSpec&) const = default;
};

struct PlanSpec {
    std::vector<int> v_sensors;
    std::vector<double> sigma_v;  // per sensor
    SigmaSpec sigma_p{0.5};
    SigmaSpec sigma_q{0.5};
    std::uint64_t seed = 1;

    bool operator==(const PlanSpec&) const = default;
};

struct LoopSpec {
    std::string mode = "se_feedback";
    std::optional<double> eps;  // empty means "auto" = 0.9 eps_max
    int max_iters = 5000;
    double stop_tol = 1e-7;
    bool use_estimate_at_sensed = false;

    bool operator==(const LoopSpec&) const = default;
};

struct OutputSpec {
    std::string trace_path = "trace.csv";
    std::string summary_path = "summary.json";

    bool operator==(const OutputSpec&) const = default;
};

struct Scenario {
    std::string case_path;
    LinearizationPoint linearization_point;
    ProblemSpec problem;
    PlanSpec plan;
    LoopSpec loop;
    OutputSpec outputs;

    bool operator==(const Scenario&) const = default;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);

/// Normalized JSON form; parsing it back yields an identical Scenario.
std::string scenario_to_json(const Scenario& s);

/// Everything needed to execute a scenario, with the step size resolved
/// against the certificate.
struct BuiltScenario {
    netmodel::NetworkCase net;
    netmodel::AdmittanceModel adm;
    netmodel::LinearPFModel model;
    controller::OpfProblem problem;
    controller::ConvergenceCertificate certificate;
    loop::LoopConfig config;
};

/// base_dir anchors a relative case_path (normally the scenario file's
/// directory).
BuiltScenario build_scenario(const Scenario& s, const std::string& base_dir);

} // namespace gridloop::scenario
