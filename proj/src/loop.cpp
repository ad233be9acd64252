#include "gridloop/loop.hpp"

#include "gridloop/acpf.hpp"
#include "gridloop/errors.hpp"
#include "gridloop/estimator.hpp"
#include "gridloop/logging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridloop::loop {

LoopMode parse_mode(const std::string& name) {
    if (name == "se_feedback") return LoopMode::SeFeedback;
    if (name == "measurement_only") return LoopMode::MeasurementOnly;
    if (name == "linear_model") return LoopMode::LinearModel;
    throw ValidationError("unknown loop mode '" + name + "'");
}

std::string mode_name(LoopMode mode) {
    switch (mode) {
        case LoopMode::SeFeedback: return "se_feedback";
        case LoopMode::MeasurementOnly: return "measurement_only";
        case LoopMode::LinearModel: return "linear_model";
    }
    return "?";
}

namespace {

constexpr int kDecimationStride = 10;

/// Dual rows a measurement-only controller may update: rows whose
/// constraint support is entirely covered by sensed quantities.
std::vector<char> sensed_row_mask(const Mat& G, const std::vector<int>& sensors) {
    std::vector<char> covered(static_cast<size_t>(G.cols()), 0);
    for (int bus : sensors) covered[static_cast<size_t>(bus - 1)] = 1;
    std::vector<char> mask(static_cast<size_t>(G.rows()), 1);
    for (Eigen::Index j = 0; j < G.rows(); ++j) {
        for (Eigen::Index i = 0; i < G.cols(); ++i) {
            if (G(j, i) != 0.0 && !covered[static_cast<size_t>(i)]) {
                mask[static_cast<size_t>(j)] = 0;
                break;
            }
        }
    }
    return mask;
}

double max_violation(const controller::OpfProblem& prob, const Vec& r) {
    const Vec g = prob.constraint_value(r);
    return std::max(0.0, g.maxCoeff());
}

} // namespace

LoopTrace run(const controller::OpfProblem& problem, const netmodel::NetworkCase& net,
              const LoopConfig& config) {
    problem.validate();
    if (config.max_iters < 1) throw ValidationError("loop: max_iters must be >= 1");
    if (!(config.eps > 0.0)) throw ValidationError("loop: eps must be positive");

    const int n = problem.bus_count();
    if (net.bus_count() != n)
        throw DimensionError("loop: case bus count does not match problem");

    sensing::MeasurementPlan plan = config.plan;
    const bool needs_sensing = config.mode != LoopMode::LinearModel;
    if (needs_sensing) plan.validate_and_clamp(n);

    const netmodel::AdmittanceModel adm = netmodel::build_admittance(net);
    const acpf::PlantSolver plant(adm, net.substation().voltage);
    const Vec nominal_p = net.nominal_p();
    const Vec nominal_q = net.nominal_q();

    log::debug("loop: mode " + mode_name(config.mode) + ", eps " + std::to_string(config.eps) +
               ", max_iters " + std::to_string(config.max_iters));

    LoopTrace trace;
    trace.mode = config.mode;
    trace.eps = config.eps;
    trace.seed = plan.seed;

    controller::ControllerState state;
    state.p = nominal_p.cwiseMax(problem.p_min).cwiseMin(problem.p_max);
    state.q = nominal_q.cwiseMax(problem.q_min).cwiseMin(problem.q_max);
    state.mu = Vec::Zero(problem.constraint_count());

    std::vector<char> meas_mask;
    if (config.mode == LoopMode::MeasurementOnly)
        meas_mask = sensed_row_mask(problem.G, plan.v_sensors);

    // fail fast on an unobservable plan before iterating
    if (config.mode == LoopMode::SeFeedback) {
        sensing::TrueState probe{state.p, state.q, Vec::Ones(n)};
        const auto snap = sensing::take_measurements(plan, probe, 0, nominal_p, nominal_q);
        const auto se_prob = estimator::assemble(plan, snap, problem.model);
        if (!estimator::check_observability(se_prob.H))
            throw UnobservableError("loop: measurement plan is unobservable for SE feedback");
    }

    bool any_skipped = false;
    const int retention_cap = config.trace_retention_cap;
    auto record = [&trace, &any_skipped, retention_cap](TraceRow row) {
        if (row.k > retention_cap && row.k % kDecimationStride != 0) {
            any_skipped = true;
            return false;
        }
        trace.rows.push_back(std::move(row));
        return true;
    };

    // running SE error stats (exact even when the trace is decimated)
    long se_samples = 0;
    double se_avg_acc = 0.0, se_max_acc = 0.0;
    double run_avg = std::numeric_limits<double>::quiet_NaN();
    double run_max = std::numeric_limits<double>::quiet_NaN();

    TraceRow row0;
    row0.k = 0;
    row0.p = state.p;
    row0.q = state.q;
    row0.mu = state.mu;
    row0.r_feedback = problem.model.evaluate(state.p, state.q);
    try {
        row0.v_true = plant.solve(state.p, state.q).v_mag;
    } catch (const DivergenceError&) {
        trace.summary.diverged = true;
        trace.summary.diverged_at = 0;
        trace.rows.push_back(std::move(row0));
        trace.summary.iters = 0;
        return trace;
    }
    record(row0);

    bool converged = false;
    bool last_recorded = true;
    TraceRow pending;  // most recent row, pushed after the loop if decimated away
    int k = 0;
    for (; k < config.max_iters; ++k) {
        const Vec r_lin_prev = problem.model.evaluate(state.p, state.q);
        controller::ControllerState next = controller::primal_step(problem, state, config.eps);

        Vec v_true;
        try {
            v_true = plant.solve(next.p, next.q).v_mag;
        } catch (const DivergenceError& e) {
            log::error("loop: plant diverged at iteration " + std::to_string(k + 1) + ": " +
                       e.what());
            trace.summary.diverged = true;
            trace.summary.diverged_at = k + 1;
            // record the offending setpoints; the plant never produced |v|
            TraceRow bad;
            bad.k = k + 1;
            bad.p = next.p;
            bad.q = next.q;
            bad.mu = state.mu;
            bad.v_true = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
            trace.rows.push_back(std::move(bad));
            last_recorded = true;
            break;
        }

        TraceRow row;
        row.k = k + 1;
        Vec r_fb;
        if (config.mode == LoopMode::LinearModel) {
            r_fb = r_lin_prev;  // simultaneous update: dual sees the model at x^k
            next.mu = controller::dual_step(problem, state.mu, r_fb, config.eps);
        } else {
            const sensing::TrueState truth{next.p, next.q, v_true};
            const auto snap =
                sensing::take_measurements(plan, truth, k + 1, nominal_p, nominal_q);
            row.v_meas = snap.v_meas;
            if (config.mode == LoopMode::SeFeedback) {
                const auto se_res = estimator::solve_wls(
                    estimator::assemble(plan, snap, problem.model));
                row.v_hat = se_res.v_hat;
                r_fb = se_res.v_hat;
                if (!config.use_estimate_at_sensed) {
                    for (size_t s = 0; s < plan.v_sensors.size(); ++s)
                        r_fb[plan.v_sensors[s] - 1] = snap.v_meas[s];
                }
                next.mu = controller::dual_step(problem, state.mu, r_fb, config.eps);

                double err_sum = 0.0, err_max = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double e = std::abs(se_res.v_hat[i] - v_true[i]) / v_true[i];
                    err_sum += e;
                    err_max = std::max(err_max, e);
                }
                row.se_err_avg = err_sum / n;
                row.se_err_max = err_max;
                ++se_samples;
                se_avg_acc += row.se_err_avg;
                se_max_acc += row.se_err_max;
                run_avg = se_avg_acc / static_cast<double>(se_samples);
                run_max = se_max_acc / static_cast<double>(se_samples);
                row.se_err_run_avg = run_avg;
            } else {
                // measurement-only: unsensed dual rows stay frozen at zero
                r_fb = Vec::Zero(problem.model.r0.size());
                for (size_t s = 0; s < plan.v_sensors.size(); ++s)
                    r_fb[plan.v_sensors[s] - 1] = snap.v_meas[s];
                next.mu = controller::dual_step(problem, state.mu, r_fb, config.eps, &meas_mask);
            }
        }

        if (config.mode != LoopMode::MeasurementOnly) {
            const Vec gap = problem.G * (r_fb - r_lin_prev);
            trace.rho_hat = std::max(trace.rho_hat, gap.squaredNorm());
        }

        const double step_norm =
            std::max({(next.p - state.p).cwiseAbs().maxCoeff(),
                      (next.q - state.q).cwiseAbs().maxCoeff(),
                      (next.mu - state.mu).cwiseAbs().maxCoeff()});

        state = next;
        row.p = state.p;
        row.q = state.q;
        row.mu = state.mu;
        row.r_feedback = r_fb;
        row.v_true = v_true;
        row.step_norm = step_norm;
        pending = row;
        last_recorded = record(std::move(row));

        if (step_norm <= config.stop_tol) {
            converged = true;
            ++k;
            break;
        }
    }

    // the final state must be visible even if decimation skipped it
    if (!last_recorded) trace.rows.push_back(std::move(pending));
    if (any_skipped) trace.decimation = kDecimationStride;

    LoopSummary& s = trace.summary;
    s.converged = converged && !s.diverged;
    s.iters = trace.rows.back().k;
    s.final_step_norm = trace.rows.back().step_norm;
    if (!s.diverged) s.max_violation_pu = max_violation(problem, trace.rows.back().v_true);
    s.se_err_avg_final = run_avg;
    s.se_err_max_final = run_max;
    log::debug("loop: " + std::string(s.converged ? "converged" : "stopped") + " after " +
               std::to_string(s.iters) + " iterations, final step " +
               std::to_string(s.final_step_norm));
    return trace;
}

BoundReport certify_bound(const LoopTrace& trace, const controller::ConvergenceCertificate& cert,
                          const controller::ControllerState& reference) {
    if (trace.mode == LoopMode::MeasurementOnly)
        throw ValidationError("certify_bound: the tail bound covers SE-feedback and linear "
                              "traces; measurement-only freezes dual rows outside the theory");
    if (trace.rows.empty()) throw ValidationError("certify_bound: empty trace");

    const double eps = trace.eps;
    const double denom = 2.0 * eps * cert.M_strong - eps * eps * cert.L * cert.L;
    if (!(denom > 0.0))
        throw ValidationError("certify_bound: step size is outside the certified range");

    BoundReport rep;
    rep.rho_hat = trace.rho_hat;
    rep.bound = eps * eps * trace.rho_hat / denom;

    const Vec x_star = controller::stack_state(reference);
    {
        const TraceRow& last = trace.rows.back();
        Vec x_last(last.p.size() + last.q.size() + last.mu.size());
        x_last << last.p, last.q, last.mu;
        rep.final_distance_sq = (x_last - x_star).squaredNorm();
    }
    const int last_k = trace.rows.back().k;
    const int tail_start = last_k - std::max(1, last_k / 10);
    double tail = 0.0;
    for (const TraceRow& row : trace.rows) {
        if (row.k < tail_start) continue;
        Vec x(row.p.size() + row.q.size() + row.mu.size());
        x << row.p, row.q, row.mu;
        tail = std::max(tail, (x - x_star).squaredNorm());
    }
    rep.tail_max_sq = tail;
    rep.holds = tail <= rep.bound * (1.0 + 1e-6);
    return rep;
}

} // namespace gridloop::loop
