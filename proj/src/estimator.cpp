#include "gridloop/estimator.hpp"

#include "gridloop/errors.hpp"
#include "gridloop/logging.hpp"

#include <Eigen/QR>

#include <cmath>

namespace gridloop::estimator {

SeProblem assemble(const sensing::MeasurementPlan& plan,
                   const sensing::MeasurementSnapshot& snapshot,
                   const netmodel::LinearPFModel& model, const AssembleOptions& opt) {
    const auto n = model.A.cols();
    if (snapshot.p_pseudo.size() != n || snapshot.q_pseudo.size() != n)
        throw DimensionError("assemble: pseudo measurements do not match model bus count");
    if (plan.sigma_p.size() != n || plan.sigma_q.size() != n)
        throw DimensionError("assemble: plan sigmas do not match model bus count");
    if (snapshot.v_meas.size() != plan.v_sensors.size())
        throw DimensionError("assemble: snapshot sensors do not match plan");

    const auto n_sensors = static_cast<Eigen::Index>(plan.v_sensors.size());
    const Eigen::Index rows = 2 * n + n_sensors;

    SeProblem prob;
    prob.model = model;
    prob.H = Mat::Zero(rows, 2 * n);
    prob.w = Vec::Zero(rows);
    prob.y = Vec::Zero(rows);

    auto weight = [&](double sigma_frac, double anchor) {
        const double sigma = std::max(sigma_frac * std::abs(anchor), opt.sigma_floor);
        return 1.0 / (sigma * sigma);
    };

    for (Eigen::Index i = 0; i < n; ++i) {
        prob.H(i, i) = 1.0;
        prob.y[i] = snapshot.p_pseudo[i];
        prob.w[i] = weight(plan.sigma_p[i], snapshot.p_pseudo[i]);

        prob.H(n + i, n + i) = 1.0;
        prob.y[n + i] = snapshot.q_pseudo[i];
        prob.w[n + i] = weight(plan.sigma_q[i], snapshot.q_pseudo[i]);
    }
    for (Eigen::Index s = 0; s < n_sensors; ++s) {
        const int bus = plan.v_sensors[static_cast<size_t>(s)];
        const Eigen::Index row = 2 * n + s;
        prob.H.block(row, 0, 1, n) = model.A.row(bus - 1);
        prob.H.block(row, n, 1, n) = model.B.row(bus - 1);
        prob.y[row] = snapshot.v_meas[static_cast<size_t>(s)] - model.r0[bus - 1];
        prob.w[row] = weight(plan.sigma_v[s], snapshot.v_meas[static_cast<size_t>(s)]);
    }
    return prob;
}

SeResult solve_wls(const SeProblem& problem) {
    const auto cols = problem.H.cols();
    if (problem.w.size() != problem.H.rows() || problem.y.size() != problem.H.rows())
        throw DimensionError("solve_wls: weight/measurement sizes do not match H");
    if (cols % 2 != 0) throw DimensionError("solve_wls: state dimension must be 2N");
    if ((problem.w.array() <= 0.0).any())
        throw ValidationError("solve_wls: weights must be strictly positive");

    const Mat normal = problem.H.transpose() * problem.w.asDiagonal() * problem.H;
    Eigen::LLT<Mat> llt(normal);

    SeResult res;
    res.observable = llt.info() == Eigen::Success;
    if (!res.observable)
        throw UnobservableError("solve_wls: H'WH is not positive definite; "
                                "measurement allocation leaves unobservable states");

    const Vec rhs = problem.H.transpose() * (problem.w.asDiagonal() * problem.y);
    res.z_hat = llt.solve(rhs);

    // condition estimate from the Cholesky diagonal spread
    const Vec ldiag = llt.matrixL().toDenseMatrix().diagonal();
    const double dmax = ldiag.maxCoeff();
    const double dmin = ldiag.minCoeff();
    res.condition_estimate = dmin > 0.0 ? (dmax / dmin) * (dmax / dmin)
                                        : std::numeric_limits<double>::infinity();
    if (res.condition_estimate > 1e12)
        log::info("solve_wls: ill-conditioned normal equations (condition estimate ~" +
                  std::to_string(res.condition_estimate) + ")");

    const auto n = cols / 2;
    res.p_hat = res.z_hat.head(n);
    res.q_hat = res.z_hat.tail(n);
    res.v_hat = problem.model.evaluate(res.p_hat, res.q_hat);

    const Vec resid = problem.y - problem.H * res.z_hat;
    res.wls_cost = 0.5 * resid.dot(problem.w.asDiagonal() * resid);
    return res;
}

bool check_observability(const Mat& H) {
    if (H.rows() < H.cols()) return false;
    Eigen::ColPivHouseholderQR<Mat> qr(H);
    const Vec rdiag = qr.matrixR().diagonal().cwiseAbs();
    if (rdiag.size() == 0) return false;
    const double tol = 1e-10 * H.norm();  // Frobenius; desk-scale matrices
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < rdiag.size(); ++i)
        if (rdiag[i] > tol) ++rank;
    return rank == H.cols();
}

} // namespace gridloop::estimator
