#include "gridloop/acpf.hpp"

#include "gridloop/errors.hpp"

#include <string>

namespace gridloop::acpf {

PlantSolver::PlantSolver(const netmodel::AdmittanceModel& adm, Complex v0, PowerFlowOptions opt)
    : Y_(adm.Y), v0_(v0), opt_(opt) {
    lu_.compute(Y_);
    y_bar_v0_ = adm.y_bar * v0;
    no_load_v_ = lu_.solve(-y_bar_v0_);
}

PowerFlowSolution PlantSolver::solve(const Vec& p, const Vec& q) const {
    const auto n = Y_.rows();
    if (p.size() != n || q.size() != n)
        throw DimensionError("solve_pf: injection size does not match admittance dimension");

    CVec s(n);
    for (Eigen::Index i = 0; i < n; ++i) s[i] = Complex(p[i], q[i]);
    const CVec s_conj = s.conjugate();

    CVec v = no_load_v_;
    auto residual = [&](const CVec& vv) {
        CVec inj = Y_ * vv + y_bar_v0_;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(s[i] - vv[i] * std::conj(inj[i])));
        return worst;
    };

    double res = residual(v);
    int iter = 0;
    while (res > opt_.tol && iter < opt_.max_iter) {
        // v <- Y^{-1} (conj(s)/conj(v) - y_bar V0)
        CVec rhs(n);
        for (Eigen::Index i = 0; i < n; ++i) rhs[i] = s_conj[i] / std::conj(v[i]) - y_bar_v0_[i];
        v = lu_.solve(rhs);
        ++iter;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(v[i]) < opt_.collapse_floor)
                throw DivergenceError("power flow diverged: |v_" + std::to_string(i + 1) +
                                          "| fell below the collapse floor",
                                      residual(v), iter);
        }
        res = residual(v);
    }
    if (res > opt_.tol)
        throw DivergenceError("power flow did not converge within " +
                                  std::to_string(opt_.max_iter) + " iterations",
                              res, iter);

    PowerFlowSolution sol;
    sol.v = v;
    sol.v_mag = v.cwiseAbs();
    sol.iterations = iter;
    sol.residual = res;
    return sol;
}

PowerFlowSolution solve_pf(const netmodel::AdmittanceModel& adm, const Vec& p, const Vec& q,
                           Complex v0, const PowerFlowOptions& opt) {
    return PlantSolver(adm, v0, opt).solve(p, q);
}

} // namespace gridloop::acpf
