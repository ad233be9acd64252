#include "gridloop/acpf.hpp"
#include "gridloop/controller.hpp"
#include "gridloop/errors.hpp"
#include "gridloop/estimator.hpp"
#include "gridloop/logging.hpp"
#include "gridloop/loop.hpp"
#include "gridloop/netmodel.hpp"
#include "gridloop/scenario.hpp"
#include "gridloop/trace_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gridloop;

namespace {

/// "bus=value" pairs from repeated --p/--q flags.
void apply_overrides(Vec& target, const std::vector<std::string>& pairs, int n,
                     const char* what) {
    for (const std::string& s : pairs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ValidationError(std::string(what) + " override must look like bus=value: " + s);
        const int bus = std::stoi(s.substr(0, eq));
        const double value = std::stod(s.substr(eq + 1));
        if (bus < 1 || bus > n)
            throw ValidationError(std::string(what) + " override names unknown bus " +
                                  std::to_string(bus));
        target[bus - 1] = value;
    }
}

int cmd_pf(const std::string& case_path, bool zero, const std::vector<std::string>& p_over,
           const std::vector<std::string>& q_over) {
    const auto net = netmodel::load_case(case_path);
    const auto adm = netmodel::build_admittance(net);
    const int n = net.bus_count();

    Vec p = zero ? Vec::Zero(n) : net.nominal_p();
    Vec q = zero ? Vec::Zero(n) : net.nominal_q();
    apply_overrides(p, p_over, n, "--p");
    apply_overrides(q, q_over, n, "--q");

    const auto sol = acpf::solve_pf(adm, p, q, net.substation().voltage);
    std::printf("# power flow: %d buses, %d iterations, residual %.3e pu\n", n, sol.iterations,
                sol.residual);
    std::printf("%-6s %-12s %-12s %-12s\n", "bus", "|v| (pu)", "p (pu)", "q (pu)");
    for (int i = 0; i < n; ++i)
        std::printf("%-6d %-12.8f %-12.6f %-12.6f\n", i + 1, sol.v_mag[i], p[i], q[i]);
    return 0;
}

int cmd_bounds(const std::string& scenario_path) {
    const auto scen = scenario::load_scenario(scenario_path);
    const auto built =
        scenario::build_scenario(scen, fs::path(scenario_path).parent_path().string());
    const auto& cert = built.certificate;
    std::printf("L        = %.10g\n", cert.L);
    std::printf("M_strong = %.10g\n", cert.M_strong);
    std::printf("eps_max  = %.10g\n", cert.eps_max);
    std::printf("eps      = %.10g%s\n", built.config.eps,
                scen.loop.eps ? "" : "  (auto = 0.9 eps_max)");
    std::printf("gamma    = %.10g\n", cert.gamma(built.config.eps));
    return 0;
}

int cmd_se(const std::string& scenario_path, std::optional<std::uint64_t> seed_override) {
    auto scen = scenario::load_scenario(scenario_path);
    if (seed_override) scen.plan.seed = *seed_override;
    const auto built =
        scenario::build_scenario(scen, fs::path(scenario_path).parent_path().string());
    const auto& net = built.net;
    const int n = net.bus_count();

    const acpf::PlantSolver plant(built.adm, net.substation().voltage);
    const auto sol = plant.solve(net.nominal_p(), net.nominal_q());
    const sensing::TrueState truth{net.nominal_p(), net.nominal_q(), sol.v_mag};
    const auto snap =
        sensing::take_measurements(built.config.plan, truth, 0, net.nominal_p(), net.nominal_q());
    const auto se_res = estimator::solve_wls(
        estimator::assemble(built.config.plan, snap, built.model));

    nlohmann::ordered_json j;
    j["observable"] = se_res.observable;
    j["condition_estimate"] = se_res.condition_estimate;
    j["wls_cost"] = se_res.wls_cost;
    double err_sum = 0.0, err_max = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = std::abs(se_res.v_hat[i] - sol.v_mag[i]) / sol.v_mag[i];
        err_sum += e;
        err_max = std::max(err_max, e);
    }
    j["v_err_avg"] = err_sum / n;
    j["v_err_max"] = err_max;
    j["v_true"] = std::vector<double>(sol.v_mag.data(), sol.v_mag.data() + n);
    j["v_hat"] = std::vector<double>(se_res.v_hat.data(), se_res.v_hat.data() + n);
    j["p_hat"] = std::vector<double>(se_res.p_hat.data(), se_res.p_hat.data() + n);
    j["q_hat"] = std::vector<double>(se_res.q_hat.data(), se_res.q_hat.data() + n);
    std::cout << j.dump(2) << '\n';
    return 0;
}

struct RunOutcome {
    std::string scenario;
    bool ok = false;
    std::string message;
};

RunOutcome run_one(const std::string& scenario_path, const std::string& out_dir,
                   std::optional<std::uint64_t> seed_override,
                   const std::string& mode_override) {
    RunOutcome outcome;
    outcome.scenario = scenario_path;
    try {
        auto scen = scenario::load_scenario(scenario_path);
        if (seed_override) scen.plan.seed = *seed_override;
        if (!mode_override.empty()) {
            loop::parse_mode(mode_override);
            scen.loop.mode = mode_override;
        }
        const std::string base_dir = fs::path(scenario_path).parent_path().string();
        const auto built = scenario::build_scenario(scen, base_dir);

        const auto trace = loop::run(built.problem, built.net, built.config);

        std::optional<loop::BoundReport> bound;
        if (built.config.mode != loop::LoopMode::MeasurementOnly && !trace.summary.diverged) {
            const auto saddle = controller::solve_saddle_point(built.problem);
            bound = loop::certify_bound(trace, built.certificate, saddle.state);
        }

        const fs::path base = out_dir.empty() ? fs::path(base_dir) : fs::path(out_dir);
        const fs::path trace_path = base / scen.outputs.trace_path;
        const fs::path summary_path = base / scen.outputs.summary_path;
        fs::create_directories(trace_path.parent_path());
        fs::create_directories(summary_path.parent_path());
        traceio::write_trace_csv(trace, built.config.plan.v_sensors, trace_path.string());
        traceio::write_summary_json(trace, bound, summary_path.string());

        const auto& s = trace.summary;
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%s: %s in %d iterations, max violation %.5f pu, trace %s",
                      scenario_path.c_str(),
                      s.diverged ? "plant diverged" : (s.converged ? "converged" : "hit max_iters"),
                      s.iters, s.max_violation_pu, trace_path.c_str());
        outcome.message = buf;
        outcome.ok = s.converged && !s.diverged;
    } catch (const std::exception& e) {
        outcome.message = scenario_path + ": " + e.what();
        outcome.ok = false;
    }
    return outcome;
}

int cmd_run(const std::vector<std::string>& scenario_paths, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override, const std::string& mode_override) {
    // concurrent runs must not share output files
    std::set<std::string> outputs;
    for (const std::string& path : scenario_paths) {
        const auto scen = scenario::load_scenario(path);
        const fs::path base =
            out_dir.empty() ? fs::path(path).parent_path() : fs::path(out_dir);
        for (const std::string& rel : {scen.outputs.trace_path, scen.outputs.summary_path}) {
            if (!outputs.insert((base / rel).lexically_normal().string()).second)
                throw ValidationError("run: scenarios collide on output path " +
                                      (base / rel).string());
        }
    }

    std::vector<std::future<RunOutcome>> jobs;
    jobs.reserve(scenario_paths.size());
    const auto policy = scenario_paths.size() > 1 ? std::launch::async : std::launch::deferred;
    for (const std::string& path : scenario_paths)
        jobs.push_back(std::async(policy, run_one, path, out_dir, seed_override, mode_override));

    bool all_ok = true;
    for (auto& job : jobs) {
        const RunOutcome outcome = job.get();
        std::printf("%s\n", outcome.message.c_str());
        all_ok = all_ok && outcome.ok;
    }
    return all_ok ? 0 : 1;
}

int cmd_echo_config(const std::string& scenario_path) {
    const auto scen = scenario::load_scenario(scenario_path);
    std::cout << scenario::scenario_to_json(scen);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distribution-grid OPF/SE co-simulation toolkit"};
    app.require_subcommand(1);

    std::string case_path, scenario_path, out_dir, mode_override;
    std::vector<std::string> scenario_paths, p_over, q_over;
    std::optional<std::uint64_t> seed_override;
    bool zero_injections = false;

    auto* pf = app.add_subcommand("pf", "solve the AC power flow for a case");
    pf->add_option("--case", case_path, "case file")->required();
    pf->add_flag("--zero", zero_injections, "use zero injections instead of nominal");
    pf->add_option("--p", p_over, "override active injection, bus=value (pu)");
    pf->add_option("--q", q_over, "override reactive injection, bus=value (pu)");

    auto* se = app.add_subcommand("se", "one-shot state estimation at nominal load");
    se->add_option("--scenario", scenario_path, "scenario file")->required();
    se->add_option("--seed-override", seed_override, "replace the plan seed");

    auto* bounds = app.add_subcommand("bounds", "print the step-size certificate");
    bounds->add_option("--scenario", scenario_path, "scenario file")->required();

    auto* run = app.add_subcommand("run", "run the feedback loop for one or more scenarios");
    run->add_option("--scenario", scenario_paths, "scenario file(s)")->required();
    run->add_option("--out-dir", out_dir, "directory for trace/summary outputs");
    run->add_option("--seed-override", seed_override, "replace the plan seed");
    run->add_option("--mode-override", mode_override,
                    "run with this loop mode (se_feedback|measurement_only|linear_model)");

    auto* echo = app.add_subcommand("echo-config", "print the normalized scenario");
    echo->add_option("--scenario", scenario_path, "scenario file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (pf->parsed()) return cmd_pf(case_path, zero_injections, p_over, q_over);
        if (se->parsed()) return cmd_se(scenario_path, seed_override);
        if (bounds->parsed()) return cmd_bounds(scenario_path);
        if (run->parsed()) return cmd_run(scenario_paths, out_dir, seed_override, mode_override);
        if (echo->parsed()) return cmd_echo_config(scenario_path);
    } catch (const DivergenceError& e) {
        log::error(std::string("power flow divergence: ") + e.what());
        return 2;
    } catch (const std::exception& e) {
        log::error(e.what());
        return 1;
    }
    return 1;
}
