#pragma once

#include "gridloop/loop.hpp"

#include <optional>
#include <string>

namespace gridloop::traceio {

/// One row per iteration:
/// k, p_*, q_*, mu_*, vtrue_*, vhat_*, vmeas_<bus>..., se_err_avg,
/// se_err_max, se_err_run_avg, step_norm. Absent quantities print as nan.
/// Doubles are written in shortest round-trip form, so identical runs
/// produce byte-identical files.
void write_trace_csv(const loop::LoopTrace& trace, const std::vector<int>& sensor_buses,
                     const std::string& path);

void write_summary_json(const loop::LoopTrace& trace,
                        const std::optional<loop::BoundReport>& bound,
                        const std::string& path);

} // namespace gridloop::traceio
