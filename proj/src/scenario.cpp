#include "gridloop/scenario.hpp"

#include "gridloop/errors.hpp"
#include "json_util.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

namespace gridloop::scenario {

using jsonutil::get_int;
using jsonutil::get_num;
using jsonutil::require_keys;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

SigmaSpec parse_sigma(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_array()) {
        std::vector<double> out;
        for (const json& e : v) {
            if (!e.is_number()) throw ParseError(where + " entries must be numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    throw ParseError(where + " must be a number or an array of numbers");
}

Scenario parse(const json& root) {
    require_keys(root, "scenario", {"case_path", "problem", "plan", "loop"},
                 {"linearization_point", "outputs"});

    Scenario s;
    s.case_path = root.at("case_path").get<std::string>();

    if (root.contains("linearization_point")) {
        const json& jl = root.at("linearization_point");
        require_keys(jl, "linearization_point", {}, {"mode", "p", "q"});
        const std::string mode = jl.contains("mode") ? jl.at("mode").get<std::string>() : "zero";
        if (mode == "zero") {
            s.linearization_point.mode = LinearizationPoint::Mode::Zero;
        } else if (mode == "nominal") {
            s.linearization_point.mode = LinearizationPoint::Mode::Nominal;
        } else if (mode == "explicit") {
            s.linearization_point.mode = LinearizationPoint::Mode::Explicit;
            if (!jl.contains("p") || !jl.contains("q"))
                throw ParseError("explicit linearization_point requires 'p' and 'q' arrays");
            s.linearization_point.p = jl.at("p").get<std::vector<double>>();
            s.linearization_point.q = jl.at("q").get<std::vector<double>>();
        } else {
            throw ParseError("linearization_point.mode must be zero, nominal or explicit");
        }
        if (mode != "explicit" && (jl.contains("p") || jl.contains("q")))
            throw ParseError("linearization_point p/q arrays require mode \"explicit\"");
    }

    const json& jp = root.at("problem");
    require_keys(jp, "problem", {"v_lo", "v_hi"},
                 {"eta", "default_c2_p", "default_c2_q", "costs", "boxes"});
    s.problem.v_lo = get_num(jp, "v_lo", "problem");
    s.problem.v_hi = get_num(jp, "v_hi", "problem");
    if (jp.contains("eta")) s.problem.eta = get_num(jp, "eta", "problem");
    if (jp.contains("default_c2_p")) s.problem.default_c2_p = get_num(jp, "default_c2_p", "problem");
    if (jp.contains("default_c2_q")) s.problem.default_c2_q = get_num(jp, "default_c2_q", "problem");
    if (!(s.problem.v_lo < s.problem.v_hi))
        throw ValidationError("scenario: problem.v_lo must be below v_hi");
    if (!(s.problem.eta > 0.0)) throw ValidationError("scenario: problem.eta must be positive");

    if (jp.contains("costs")) {
        for (const json& jc : jp.at("costs")) {
            require_keys(jc, "costs entry", {"bus"}, {"c2_p", "c2_q", "p_target"});
            CostSpec c;
            c.bus = get_int(jc, "bus", "costs entry");
            c.c2_p = jc.contains("c2_p") ? get_num(jc, "c2_p", "costs entry") : s.problem.default_c2_p;
            c.c2_q = jc.contains("c2_q") ? get_num(jc, "c2_q", "costs entry") : s.problem.default_c2_q;
            if (jc.contains("p_target")) c.p_target = get_num(jc, "p_target", "costs entry");
            s.problem.costs.push_back(c);
        }
    }
    if (jp.contains("boxes")) {
        for (const json& jb : jp.at("boxes")) {
            require_keys(jb, "boxes entry", {"bus", "p_min", "p_max", "q_min", "q_max"});
            BoxSpec b;
            b.bus = get_int(jb, "bus", "boxes entry");
            b.p_min = get_num(jb, "p_min", "boxes entry");
            b.p_max = get_num(jb, "p_max", "boxes entry");
            b.q_min = get_num(jb, "q_min", "boxes entry");
            b.q_max = get_num(jb, "q_max", "boxes entry");
            if (b.p_min > b.p_max || b.q_min > b.q_max)
                throw ValidationError("scenario: empty box at bus " + std::to_string(b.bus));
            s.problem.boxes.push_back(b);
        }
    }
    auto by_bus = [](const auto& a, const auto& b) { return a.bus < b.bus; };
    std::sort(s.problem.costs.begin(), s.problem.costs.end(), by_bus);
    std::sort(s.problem.boxes.begin(), s.problem.boxes.end(), by_bus);
    auto check_dup = [](const auto& v, const char* what) {
        for (size_t i = 1; i < v.size(); ++i)
            if (v[i].bus == v[i - 1].bus)
                throw ValidationError(std::string("scenario: duplicate ") + what + " entry for bus " +
                                      std::to_string(v[i].bus));
    };
    check_dup(s.problem.costs, "costs");
    check_dup(s.problem.boxes, "boxes");

    const json& jplan = root.at("plan");
    require_keys(jplan, "plan", {"v_sensors", "seed"}, {"sigma_v", "sigma_p", "sigma_q"});
    s.plan.v_sensors = jplan.at("v_sensors").get<std::vector<int>>();
    {
        std::set<int> uniq(s.plan.v_sensors.begin(), s.plan.v_sensors.end());
        if (uniq.size() != s.plan.v_sensors.size())
            throw ValidationError("scenario: duplicate sensor bus in plan.v_sensors");
        s.plan.v_sensors.assign(uniq.begin(), uniq.end());
    }
    if (!jplan.at("seed").is_number_unsigned() && !jplan.at("seed").is_number_integer())
        throw ParseError("plan.seed must be an integer");
    s.plan.seed = jplan.at("seed").get<std::uint64_t>();

    SigmaSpec sv = jplan.contains("sigma_v") ? parse_sigma(jplan.at("sigma_v"), "plan.sigma_v")
                                             : SigmaSpec{0.01};
    if (std::holds_alternative<double>(sv)) {
        s.plan.sigma_v.assign(s.plan.v_sensors.size(), std::get<double>(sv));
    } else {
        s.plan.sigma_v = std::get<std::vector<double>>(sv);
        if (s.plan.sigma_v.size() != s.plan.v_sensors.size())
            throw ValidationError("scenario: plan.sigma_v array must align with v_sensors");
    }
    if (jplan.contains("sigma_p")) s.plan.sigma_p = parse_sigma(jplan.at("sigma_p"), "plan.sigma_p");
    if (jplan.contains("sigma_q")) s.plan.sigma_q = parse_sigma(jplan.at("sigma_q"), "plan.sigma_q");

    const json& jloop = root.at("loop");
    require_keys(jloop, "loop", {"mode"},
                 {"eps", "max_iters", "stop_tol", "use_estimate_at_sensed"});
    s.loop.mode = jloop.at("mode").get<std::string>();
    loop::parse_mode(s.loop.mode);  // reject unknown modes at parse time
    if (jloop.contains("eps")) {
        const json& je = jloop.at("eps");
        if (je.is_string()) {
            if (je.get<std::string>() != "auto")
                throw ParseError("loop.eps must be a number or \"auto\"");
        } else if (je.is_number()) {
            s.loop.eps = je.get<double>();
            if (!(*s.loop.eps > 0.0)) throw ValidationError("scenario: loop.eps must be positive");
        } else {
            throw ParseError("loop.eps must be a number or \"auto\"");
        }
    }
    if (jloop.contains("max_iters")) s.loop.max_iters = get_int(jloop, "max_iters", "loop");
    if (s.loop.max_iters < 1) throw ValidationError("scenario: loop.max_iters must be >= 1");
    if (jloop.contains("stop_tol")) s.loop.stop_tol = get_num(jloop, "stop_tol", "loop");
    if (jloop.contains("use_estimate_at_sensed"))
        s.loop.use_estimate_at_sensed = jloop.at("use_estimate_at_sensed").get<bool>();

    if (root.contains("outputs")) {
        const json& jo = root.at("outputs");
        require_keys(jo, "outputs", {}, {"trace_path", "summary_path"});
        if (jo.contains("trace_path")) s.outputs.trace_path = jo.at("trace_path").get<std::string>();
        if (jo.contains("summary_path"))
            s.outputs.summary_path = jo.at("summary_path").get<std::string>();
    }
    return s;
}

json sigma_to_json(const SigmaSpec& s) {
    if (std::holds_alternative<double>(s)) return std::get<double>(s);
    return std::get<std::vector<double>>(s);
}

} // namespace

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file: " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("scenario file " + path + ": " + e.what());
    }
    return parse(root);
}

Scenario parse_scenario(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario text: ") + e.what());
    }
    return parse(root);
}

std::string scenario_to_json(const Scenario& s) {
    ordered_json j;
    j["case_path"] = s.case_path;

    ordered_json jl;
    switch (s.linearization_point.mode) {
        case LinearizationPoint::Mode::Zero: jl["mode"] = "zero"; break;
        case LinearizationPoint::Mode::Nominal: jl["mode"] = "nominal"; break;
        case LinearizationPoint::Mode::Explicit:
            jl["mode"] = "explicit";
            jl["p"] = s.linearization_point.p;
            jl["q"] = s.linearization_point.q;
            break;
    }
    j["linearization_point"] = jl;

    ordered_json jp;
    jp["v_lo"] = s.problem.v_lo;
    jp["v_hi"] = s.problem.v_hi;
    jp["eta"] = s.problem.eta;
    jp["default_c2_p"] = s.problem.default_c2_p;
    jp["default_c2_q"] = s.problem.default_c2_q;
    jp["costs"] = ordered_json::array();
    for (const CostSpec& c : s.problem.costs) {
        ordered_json jc;
        jc["bus"] = c.bus;
        jc["c2_p"] = c.c2_p;
        jc["c2_q"] = c.c2_q;
        if (c.p_target) jc["p_target"] = *c.p_target;
        jp["costs"].push_back(jc);
    }
    jp["boxes"] = ordered_json::array();
    for (const BoxSpec& b : s.problem.boxes) {
        ordered_json jb;
        jb["bus"] = b.bus;
        jb["p_min"] = b.p_min;
        jb["p_max"] = b.p_max;
        jb["q_min"] = b.q_min;
        jb["q_max"] = b.q_max;
        jp["boxes"].push_back(jb);
    }
    j["problem"] = jp;

    ordered_json jplan;
    jplan["v_sensors"] = s.plan.v_sensors;
    jplan["sigma_v"] = s.plan.sigma_v;
    jplan["sigma_p"] = sigma_to_json(s.plan.sigma_p);
    jplan["sigma_q"] = sigma_to_json(s.plan.sigma_q);
    jplan["seed"] = s.plan.seed;
    j["plan"] = jplan;

    ordered_json jloop;
    jloop["mode"] = s.loop.mode;
    if (s.loop.eps) jloop["eps"] = *s.loop.eps;
    else jloop["eps"] = "auto";
    jloop["max_iters"] = s.loop.max_iters;
    jloop["stop_tol"] = s.loop.stop_tol;
    jloop["use_estimate_at_sensed"] = s.loop.use_estimate_at_sensed;
    j["loop"] = jloop;

    ordered_json jo;
    jo["trace_path"] = s.outputs.trace_path;
    jo["summary_path"] = s.outputs.summary_path;
    j["outputs"] = jo;

    return j.dump(2) + "\n";
}

BuiltScenario build_scenario(const Scenario& s, const std::string& base_dir) {
    namespace fs = std::filesystem;
    fs::path case_path(s.case_path);
    if (case_path.is_relative()) case_path = fs::path(base_dir) / case_path;

    netmodel::NetworkCase net = netmodel::load_case(case_path.string());
    const int n = net.bus_count();
    netmodel::AdmittanceModel adm = netmodel::build_admittance(net);

    Vec p0 = Vec::Zero(n), q0 = Vec::Zero(n);
    switch (s.linearization_point.mode) {
        case LinearizationPoint::Mode::Zero: break;
        case LinearizationPoint::Mode::Nominal:
            p0 = net.nominal_p();
            q0 = net.nominal_q();
            break;
        case LinearizationPoint::Mode::Explicit: {
            if (static_cast<int>(s.linearization_point.p.size()) != n ||
                static_cast<int>(s.linearization_point.q.size()) != n)
                throw ValidationError("scenario: explicit linearization point must list all " +
                                      std::to_string(n) + " buses");
            p0 = Eigen::Map<const Vec>(s.linearization_point.p.data(), n);
            q0 = Eigen::Map<const Vec>(s.linearization_point.q.data(), n);
            break;
        }
    }
    netmodel::LinearPFModel model = netmodel::linearize(net, adm, p0, q0);

    controller::OpfProblem prob;
    prob.model = model;
    prob.c2_p = Vec::Constant(n, s.problem.default_c2_p);
    prob.c2_q = Vec::Constant(n, s.problem.default_c2_q);
    prob.p_target = net.nominal_p();
    for (const CostSpec& c : s.problem.costs) {
        if (c.bus < 1 || c.bus > n)
            throw ValidationError("scenario: costs entry for unknown bus " + std::to_string(c.bus));
        prob.c2_p[c.bus - 1] = c.c2_p;
        prob.c2_q[c.bus - 1] = c.c2_q;
        if (c.p_target) prob.p_target[c.bus - 1] = *c.p_target;
    }
    // unlisted buses are uncontrollable: degenerate boxes at nominal
    prob.p_min = net.nominal_p();
    prob.p_max = net.nominal_p();
    prob.q_min = net.nominal_q();
    prob.q_max = net.nominal_q();
    for (const BoxSpec& b : s.problem.boxes) {
        if (b.bus < 1 || b.bus > n)
            throw ValidationError("scenario: boxes entry for unknown bus " + std::to_string(b.bus));
        prob.p_min[b.bus - 1] = b.p_min;
        prob.p_max[b.bus - 1] = b.p_max;
        prob.q_min[b.bus - 1] = b.q_min;
        prob.q_max[b.bus - 1] = b.q_max;
    }
    auto [G, d] = controller::voltage_band_constraint(n, s.problem.v_lo, s.problem.v_hi);
    prob.G = std::move(G);
    prob.d = std::move(d);
    prob.eta = s.problem.eta;
    prob.validate();

    controller::ConvergenceCertificate cert = controller::certify_step(prob);

    loop::LoopConfig config;
    config.mode = loop::parse_mode(s.loop.mode);
    config.max_iters = s.loop.max_iters;
    config.stop_tol = s.loop.stop_tol;
    config.use_estimate_at_sensed = s.loop.use_estimate_at_sensed;
    if (s.loop.eps) {
        if (!(*s.loop.eps < cert.eps_max))
            throw ValidationError("scenario: loop.eps " + std::to_string(*s.loop.eps) +
                                  " is outside the certified range (eps_max " +
                                  std::to_string(cert.eps_max) + ")");
        config.eps = *s.loop.eps;
    } else {
        config.eps = 0.9 * cert.eps_max;
    }

    sensing::MeasurementPlan plan;
    plan.v_sensors = s.plan.v_sensors;
    plan.seed = s.plan.seed;
    plan.sigma_v = Eigen::Map<const Vec>(s.plan.sigma_v.data(),
                                         static_cast<Eigen::Index>(s.plan.sigma_v.size()));
    auto broadcast = [n](const SigmaSpec& spec, const char* name) {
        if (std::holds_alternative<double>(spec))
            return Vec(Vec::Constant(n, std::get<double>(spec)));
        const auto& v = std::get<std::vector<double>>(spec);
        if (static_cast<int>(v.size()) != n)
            throw ValidationError(std::string("scenario: plan.") + name +
                                  " array must list every bus");
        return Vec(Eigen::Map<const Vec>(v.data(), n));
    };
    plan.sigma_p = broadcast(s.plan.sigma_p, "sigma_p");
    plan.sigma_q = broadcast(s.plan.sigma_q, "sigma_q");
    plan.validate_and_clamp(n);
    config.plan = std::move(plan);

    return BuiltScenario{std::move(net), std::move(adm), std::move(model), std::move(prob),
                         cert, std::move(config)};
}

} // namespace gridloop::scenario
