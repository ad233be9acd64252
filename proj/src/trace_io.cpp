#include "gridloop/trace_io.hpp"

#include "gridloop/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

namespace gridloop::traceio {

namespace {

void append_double(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "nan";
        return;
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

} // namespace

void write_trace_csv(const loop::LoopTrace& trace, const std::vector<int>& sensor_buses,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open trace file for writing: " + path);

    if (trace.rows.empty()) throw ValidationError("write_trace_csv: empty trace");
    const auto n = trace.rows.front().p.size();
    const auto m = trace.rows.front().mu.size();

    std::string line = "k";
    auto cols = [&line](const char* prefix, Eigen::Index count) {
        for (Eigen::Index i = 0; i < count; ++i) {
            line += ',';
            line += prefix;
            line += std::to_string(i + 1);
        }
    };
    cols("p_", n);
    cols("q_", n);
    cols("mu_", m);
    cols("vtrue_", n);
    cols("vhat_", n);
    for (int bus : sensor_buses) line += ",vmeas_" + std::to_string(bus);
    line += ",se_err_avg,se_err_max,se_err_run_avg,step_norm\n";
    out << line;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const loop::TraceRow& row : trace.rows) {
        line.clear();
        line += std::to_string(row.k);
        auto emit = [&line](double v) {
            line += ',';
            append_double(line, v);
        };
        for (Eigen::Index i = 0; i < n; ++i) emit(row.p[i]);
        for (Eigen::Index i = 0; i < n; ++i) emit(row.q[i]);
        for (Eigen::Index i = 0; i < m; ++i) emit(row.mu[i]);
        for (Eigen::Index i = 0; i < n; ++i) emit(row.v_true.size() == n ? row.v_true[i] : nan);
        for (Eigen::Index i = 0; i < n; ++i) emit(row.v_hat.size() == n ? row.v_hat[i] : nan);
        for (size_t s = 0; s < sensor_buses.size(); ++s)
            emit(s < row.v_meas.size() ? row.v_meas[s] : nan);
        emit(row.se_err_avg);
        emit(row.se_err_max);
        emit(row.se_err_run_avg);
        emit(row.step_norm);
        line += '\n';
        out << line;
    }
}

void write_summary_json(const loop::LoopTrace& trace,
                        const std::optional<loop::BoundReport>& bound,
                        const std::string& path) {
    using json = nlohmann::ordered_json;
    auto num_or_null = [](double v) {
        return std::isnan(v) ? json(nullptr) : json(v);
    };

    const loop::LoopSummary& s = trace.summary;
    json j;
    j["mode"] = loop::mode_name(trace.mode);
    j["seed"] = trace.seed;
    j["eps"] = trace.eps;
    j["converged"] = s.converged;
    j["iters"] = s.iters;
    j["diverged"] = s.diverged;
    j["diverged_at"] = s.diverged ? json(s.diverged_at) : json(nullptr);
    j["final_step_norm"] = num_or_null(s.final_step_norm);
    j["max_violation_pu"] = num_or_null(s.max_violation_pu);
    j["se_err_avg_final"] = num_or_null(s.se_err_avg_final);
    j["se_err_max_final"] = num_or_null(s.se_err_max_final);
    if (bound) {
        j["rho_hat"] = bound->rho_hat;
        j["bound"] = bound->bound;
        j["bound_holds"] = bound->holds;
        j["tail_max_sq"] = bound->tail_max_sq;
        j["final_distance_sq"] = bound->final_distance_sq;
    } else {
        j["rho_hat"] = nullptr;
        j["bound"] = nullptr;
        j["bound_holds"] = nullptr;
        j["tail_max_sq"] = nullptr;
        j["final_distance_sq"] = nullptr;
    }
    j["trace_decimation"] = trace.decimation;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open summary file for writing: " + path);
    out << j.dump(2) << '\n';
}

} // namespace gridloop::traceio
