#pragma once

#include "gridloop/netmodel.hpp"
#include "gridloop/types.hpp"

namespace gridloop::acpf {

struct PowerFlowOptions {
    double tol = 1e-9;           // max complex-power mismatch, pu
    int max_iter = 100;
    double collapse_floor = 0.5; // abort if any |v_i| drops below this, pu
};

struct PowerFlowSolution {
    CVec v;         // bus voltage phasors, pu
    Vec v_mag;      // |v|, pu
    int iterations = 0;
    double residual = 0.0;  // max_i |s_i - v_i * conj((Y v + y_bar V0)_i)|
};

/// Z-bus fixed-point plant solver. Factorizes Y once and serves repeated
/// solves, which is what the feedback loop needs.
class PlantSolver {
public:
    PlantSolver(const netmodel::AdmittanceModel& adm, Complex v0,
                PowerFlowOptions opt = {});

    PowerFlowSolution solve(const Vec& p, const Vec& q) const;

    /// -Y^{-1} y_bar V0: exact solution at zero injection, also the
    /// initial guess for every solve.
    const CVec& no_load_voltage() const { return no_load_v_; }
    Complex v0() const { return v0_; }
    const PowerFlowOptions& options() const { return opt_; }

private:
    Eigen::PartialPivLU<CMat> lu_;
    CMat Y_;
    CVec y_bar_v0_;   // y_bar * V0
    CVec no_load_v_;
    Complex v0_;
    PowerFlowOptions opt_;
};

/// One-shot convenience wrapper around PlantSolver.
PowerFlowSolution solve_pf(const netmodel::AdmittanceModel& adm, const Vec& p, const Vec& q,
                           Complex v0, const PowerFlowOptions& opt = {});

} // namespace gridloop::acpf
