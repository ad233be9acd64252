#pragma once

#include "gridloop/netmodel.hpp"
#include "gridloop/sensing.hpp"
#include "gridloop/types.hpp"

namespace gridloop::estimator {

/// Linear WLS instance over the injection state z = (p_hat, q_hat).
/// Rows: pseudo-p identity block, pseudo-q identity block, then one
/// [A_i B_i] row per voltage sensor with y-entry |v~_i| - r0_i (the
/// voltage constraint is substituted, not penalized).
struct SeProblem {
    Mat H;  // rows x 2N
    Vec w;  // diagonal of W = Sigma^{-1}
    Vec y;
    netmodel::LinearPFModel model;
};

struct SeResult {
    Vec z_hat;  // 2N
    Vec p_hat;  // N
    Vec q_hat;  // N
    Vec v_hat;  // N, = A p_hat + B q_hat + r0 exactly
    double wls_cost = 0.0;
    bool observable = false;
    double condition_estimate = 0.0;  // of H' W H (cheap Cholesky-based estimate)
};

struct AssembleOptions {
    /// Floor on absolute measurement stds, pu. Keeps weights finite at
    /// zero-injection buses where the fractional sigma has nothing to
    /// scale against.
    double sigma_floor = 1e-4;
};

SeProblem assemble(const sensing::MeasurementPlan& plan,
                   const sensing::MeasurementSnapshot& snapshot,
                   const netmodel::LinearPFModel& model, const AssembleOptions& opt = {});

/// Closed-form WLS by SPD factorization of the normal equations. Throws
/// UnobservableError when H'WH is not numerically positive definite.
SeResult solve_wls(const SeProblem& problem);

/// Full column rank test (rank-revealing QR, tolerance 1e-10 ||H||).
bool check_observability(const Mat& H);

} // namespace gridloop::estimator
