#pragma once

#include "gridloop/netmodel.hpp"
#include "gridloop/types.hpp"

#include <optional>
#include <utility>

namespace gridloop::controller {

/// Optional system-wide cost C_0(p,q) = 0.5 x' Q0 x + b0' x over the
/// stacked injections x = (p, q). Must be convex (Q0 PSD).
struct QuadraticSystemCost {
    Mat Q0;  // 2N x 2N
    Vec b0;  // 2N
};

/// Voltage-regulation OPF instance over the linear plant model.
///
/// Per-bus cost  C_i(p_i, q_i) = c2_p_i (p_target_i - p_i)^2 + c2_q_i q_i^2,
/// coupling constraint  g(r) = G r + d <= 0,  dual regularization weight eta.
/// Uncontrollable buses carry degenerate boxes [nominal, nominal].
struct OpfProblem {
    netmodel::LinearPFModel model;

    Vec c2_p;      // N, > 0
    Vec p_target;  // N
    Vec c2_q;      // N, > 0
    std::optional<QuadraticSystemCost> system_cost;

    Vec p_min, p_max, q_min, q_max;  // N each

    Mat G;  // m x M
    Vec d;  // m
    double eta = 1e-3;

    int bus_count() const { return static_cast<int>(c2_p.size()); }
    int constraint_count() const { return static_cast<int>(d.size()); }

    Vec constraint_value(const Vec& r) const { return G * r + d; }
    void validate() const;
};

/// g(r) <= 0 encoding the band v_lo <= r <= v_hi: rows 1..M are the upper
/// band (r - v_hi), rows M+1..2M the lower band (v_lo - r).
std::pair<Mat, Vec> voltage_band_constraint(int m_quantities, double v_lo, double v_hi);

/// Saddle-point iterate x = (p, q, mu).
struct ControllerState {
    Vec p;
    Vec q;
    Vec mu;
};

struct Gradients {
    Vec p;   // grad_p L
    Vec q;   // grad_q L
    Vec mu;  // grad_mu L = g(r) - eta mu
};

/// Regularized Lagrangian value with g evaluated at the supplied r.
double lagrangian_value(const OpfProblem& prob, const ControllerState& s, const Vec& r);

Gradients lagrangian_gradients(const OpfProblem& prob, const ControllerState& s, const Vec& r);

/// One simultaneous projected primal-dual update: all gradients taken at
/// the current state, the dual using the supplied feedback r.
ControllerState primal_dual_step(const OpfProblem& prob, const ControllerState& s,
                                 const Vec& r_feedback, double eps);

/// Primal half of the update (p, q move; mu is carried through), used by
/// the feedback loop where the dual waits for the plant response.
ControllerState primal_step(const OpfProblem& prob, const ControllerState& s, double eps);

/// Dual ascent step mu <- [mu + eps (g(r) - eta mu)]_+ . When row_mask is
/// given, rows with mask=false are pinned to zero instead of updated.
Vec dual_step(const OpfProblem& prob, const Vec& mu, const Vec& r_feedback, double eps,
              const std::vector<char>* row_mask = nullptr);

// --- stacked-operator view -------------------------------------------------
//
// The gradient map F(x) = [grad_p; grad_q; -grad_mu](x), with r taken from
// the linear model, is affine: F(x) = H x + b,
//   H = [[Q, K'], [-K, eta I]],  K = [G A, G B].

int state_dimension(const OpfProblem& prob);
Vec stack_state(const ControllerState& s);
ControllerState unstack_state(const OpfProblem& prob, const Vec& x);

Mat operator_matrix(const OpfProblem& prob);  // H
Vec operator_offset(const OpfProblem& prob);  // b
Vec gradient_map(const OpfProblem& prob, const Vec& x);  // F(x) = H x + b

/// Projection of a stacked vector onto Z x R+^m.
Vec project_feasible(const OpfProblem& prob, const Vec& x);

// --- step-size certification (Theorem-1 constants) --------------------------

struct ConvergenceCertificate {
    double L = 0.0;         // Lipschitz constant of F
    double M_strong = 0.0;  // strong-monotonicity constant of F
    double eps_max = 0.0;   // 2 M / L^2

    double gamma(double eps) const { return eps * eps * L * L - 2.0 * eps * M_strong + 1.0; }
};

/// Constants for the affine operator H = [[Q, K'], [-K, eta I]]:
/// L = sigma_max(H) by power iteration (tol 1e-10), M = min(lambda_min(Q), eta)
/// (exact: the K blocks are skew and vanish in the symmetric part).
ConvergenceCertificate certify_operator(const Mat& Q, const Mat& K, double eta);

ConvergenceCertificate certify_step(const OpfProblem& prob);

// --- saddle point -----------------------------------------------------------

struct SaddleResult {
    ControllerState state;
    double vi_residual = 0.0;  // ||x - P(x - F(x))||_inf
    int iterations = 0;
};

/// Residual of the projected fixed-point equation at x; zero exactly at
/// the saddle point of the regularized Lagrangian.
double vi_residual(const OpfProblem& prob, const Vec& x);

/// Saddle point of the regularized problem by active-set policy iteration
/// on the affine variational inequality (independent of the gradient
/// iteration). Throws if the VI residual cannot be driven below tol.
SaddleResult solve_saddle_point(const OpfProblem& prob, double tol = 1e-12);

} // namespace gridloop::controller
