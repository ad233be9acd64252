#pragma once

#include "gridloop/controller.hpp"
#include "gridloop/netmodel.hpp"
#include "gridloop/sensing.hpp"
#include "gridloop/types.hpp"

#include <string>
#include <vector>

namespace gridloop::loop {

enum class LoopMode {
    SeFeedback,       // controller + plant + SE feedback (the full algorithm)
    MeasurementOnly,  // duals move only where a sensor exists
    LinearModel       // pure projected primal-dual baseline on the model
};

LoopMode parse_mode(const std::string& name);
std::string mode_name(LoopMode mode);

struct LoopConfig {
    LoopMode mode = LoopMode::SeFeedback;
    double eps = 0.0;
    int max_iters = 5000;
    double stop_tol = 1e-7;
    sensing::MeasurementPlan plan;
    /// Open switch: trust the estimator over the raw reading at sensed
    /// buses when building the dual feedback.
    bool use_estimate_at_sensed = false;
    /// Rows kept in full before 1-in-10 decimation kicks in. Summary
    /// statistics stay exact either way.
    int trace_retention_cap = 100000;
};

struct TraceRow {
    int k = 0;
    Vec p, q, mu;
    Vec r_feedback;              // feedback used in the dual step producing this mu
    Vec v_true;                  // plant |v| at this row's (p, q)
    Vec v_hat;                   // empty when no SE ran this iteration
    std::vector<double> v_meas;  // aligned with the plan's sensors; empty when no snapshot
    double se_err_avg = std::numeric_limits<double>::quiet_NaN();
    double se_err_max = std::numeric_limits<double>::quiet_NaN();
    double se_err_run_avg = std::numeric_limits<double>::quiet_NaN();
    double step_norm = std::numeric_limits<double>::quiet_NaN();
};

struct LoopSummary {
    bool converged = false;
    int iters = 0;
    bool diverged = false;
    int diverged_at = -1;
    double final_step_norm = std::numeric_limits<double>::quiet_NaN();
    double max_violation_pu = std::numeric_limits<double>::quiet_NaN();
    double se_err_avg_final = std::numeric_limits<double>::quiet_NaN();  // running averages
    double se_err_max_final = std::numeric_limits<double>::quiet_NaN();
};

struct LoopTrace {
    std::vector<TraceRow> rows;
    LoopMode mode = LoopMode::SeFeedback;
    double eps = 0.0;
    std::uint64_t seed = 0;
    int decimation = 1;  // >1 once the trace exceeds the retention cap
    /// max over the trajectory of ||G (r_fb^k - r_lin(u^{k-1}))||^2, the
    /// measured operator gap feeding the tail bound; 0 in linear mode.
    double rho_hat = 0.0;
    LoopSummary summary;
};

/// Runs the closed loop: primal steps, plant solve at the new setpoints,
/// measurement, state estimation (per mode), then the dual step on the
/// assembled feedback. Linear mode instead performs the simultaneous
/// projected primal-dual update with model feedback.
LoopTrace run(const controller::OpfProblem& problem, const netmodel::NetworkCase& net,
              const LoopConfig& config);

struct BoundReport {
    double rho_hat = 0.0;
    double bound = 0.0;
    double tail_max_sq = 0.0;   // max ||x^k - x*||^2 over the last 10% of rows
    double final_distance_sq = 0.0;  // ||x^K - x*||^2 at the stopping iterate
    bool holds = false;
};

/// Tail-distance certificate: bound = eps^2 rho_hat / (2 eps M - eps^2 L^2),
/// checked against the trace tail around the reference saddle point.
BoundReport certify_bound(const LoopTrace& trace, const controller::ConvergenceCertificate& cert,
                          const controller::ControllerState& reference);

} // namespace gridloop::loop
