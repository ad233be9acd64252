#include "gridloop/controller.hpp"

#include "gridloop/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace gridloop::controller {

void OpfProblem::validate() const {
    const int n = bus_count();
    if (p_target.size() != n || c2_q.size() != n || p_min.size() != n || p_max.size() != n ||
        q_min.size() != n || q_max.size() != n)
        throw DimensionError("OpfProblem: per-bus vectors disagree on bus count");
    if (model.A.cols() != n || model.B.cols() != n)
        throw DimensionError("OpfProblem: linear model column count does not match bus count");
    if (G.cols() != model.r0.size() || d.size() != G.rows())
        throw DimensionError("OpfProblem: constraint dimensions inconsistent with the model");
    for (int i = 0; i < n; ++i) {
        if (!(c2_p[i] > 0.0) || !(c2_q[i] > 0.0))
            throw ValidationError("OpfProblem: cost curvature must be positive at bus " +
                                  std::to_string(i + 1));
        if (p_min[i] > p_max[i] || q_min[i] > q_max[i])
            throw ValidationError("OpfProblem: empty box at bus " + std::to_string(i + 1));
    }
    if (!(eta > 0.0)) throw ValidationError("OpfProblem: eta must be positive");
    if (system_cost) {
        const int two_n = 2 * n;
        if (system_cost->Q0.rows() != two_n || system_cost->Q0.cols() != two_n ||
            system_cost->b0.size() != two_n)
            throw DimensionError("OpfProblem: system cost dimensions must be 2N");
        if (!system_cost->Q0.isApprox(system_cost->Q0.transpose(), 1e-12))
            throw ValidationError("OpfProblem: system cost Hessian must be symmetric");
    }
}

std::pair<Mat, Vec> voltage_band_constraint(int m_quantities, double v_lo, double v_hi) {
    if (!(v_lo < v_hi)) throw ValidationError("voltage band requires v_lo < v_hi");
    Mat G(2 * m_quantities, m_quantities);
    G << Mat::Identity(m_quantities, m_quantities), -Mat::Identity(m_quantities, m_quantities);
    Vec d(2 * m_quantities);
    d.head(m_quantities).setConstant(-v_hi);
    d.tail(m_quantities).setConstant(v_lo);
    return {G, d};
}

double lagrangian_value(const OpfProblem& prob, const ControllerState& s, const Vec& r) {
    double cost = 0.0;
    for (int i = 0; i < prob.bus_count(); ++i) {
        const double dp = prob.p_target[i] - s.p[i];
        cost += prob.c2_p[i] * dp * dp + prob.c2_q[i] * s.q[i] * s.q[i];
    }
    if (prob.system_cost) {
        Vec u(2 * prob.bus_count());
        u << s.p, s.q;
        cost += 0.5 * u.dot(prob.system_cost->Q0 * u) + prob.system_cost->b0.dot(u);
    }
    const Vec g = prob.constraint_value(r);
    return cost + s.mu.dot(g) - 0.5 * prob.eta * s.mu.squaredNorm();
}

Gradients lagrangian_gradients(const OpfProblem& prob, const ControllerState& s, const Vec& r) {
    const int n = prob.bus_count();
    if (s.p.size() != n || s.q.size() != n)
        throw DimensionError("lagrangian_gradients: state size does not match problem");
    if (s.mu.size() != prob.constraint_count())
        throw DimensionError("lagrangian_gradients: dual size does not match constraint count");
    if (r.size() != prob.model.r0.size())
        throw DimensionError("lagrangian_gradients: r size does not match model");

    Gradients g;
    g.p = 2.0 * prob.c2_p.cwiseProduct(s.p - prob.p_target);
    g.q = 2.0 * prob.c2_q.cwiseProduct(s.q);
    if (prob.system_cost) {
        Vec u(2 * n);
        u << s.p, s.q;
        const Vec grad0 = prob.system_cost->Q0 * u + prob.system_cost->b0;
        g.p += grad0.head(n);
        g.q += grad0.tail(n);
    }
    g.p += (prob.G * prob.model.A).transpose() * s.mu;
    g.q += (prob.G * prob.model.B).transpose() * s.mu;
    g.mu = prob.constraint_value(r) - prob.eta * s.mu;
    return g;
}

namespace {

inline Vec clamp(const Vec& x, const Vec& lo, const Vec& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

} // namespace

ControllerState primal_step(const OpfProblem& prob, const ControllerState& s, double eps) {
    const Vec r = prob.model.evaluate(s.p, s.q);  // dual block unused below
    const Gradients g = lagrangian_gradients(prob, s, r);
    ControllerState out;
    out.p = clamp(s.p - eps * g.p, prob.p_min, prob.p_max);
    out.q = clamp(s.q - eps * g.q, prob.q_min, prob.q_max);
    out.mu = s.mu;
    return out;
}

Vec dual_step(const OpfProblem& prob, const Vec& mu, const Vec& r_feedback, double eps,
              const std::vector<char>* row_mask) {
    const Vec g = prob.constraint_value(r_feedback) - prob.eta * mu;
    Vec out = (mu + eps * g).cwiseMax(0.0);
    if (row_mask) {
        if (static_cast<int>(row_mask->size()) != out.size())
            throw DimensionError("dual_step: row mask size does not match constraint count");
        for (int j = 0; j < out.size(); ++j)
            if (!(*row_mask)[static_cast<size_t>(j)]) out[j] = 0.0;
    }
    return out;
}

ControllerState primal_dual_step(const OpfProblem& prob, const ControllerState& s,
                                 const Vec& r_feedback, double eps) {
    const Gradients g = lagrangian_gradients(prob, s, r_feedback);
    ControllerState out;
    out.p = clamp(s.p - eps * g.p, prob.p_min, prob.p_max);
    out.q = clamp(s.q - eps * g.q, prob.q_min, prob.q_max);
    out.mu = (s.mu + eps * g.mu).cwiseMax(0.0);
    return out;
}

int state_dimension(const OpfProblem& prob) {
    return 2 * prob.bus_count() + prob.constraint_count();
}

Vec stack_state(const ControllerState& s) {
    Vec x(s.p.size() + s.q.size() + s.mu.size());
    x << s.p, s.q, s.mu;
    return x;
}

ControllerState unstack_state(const OpfProblem& prob, const Vec& x) {
    if (x.size() != state_dimension(prob))
        throw DimensionError("unstack_state: stacked vector has wrong dimension");
    const int n = prob.bus_count();
    ControllerState s;
    s.p = x.segment(0, n);
    s.q = x.segment(n, n);
    s.mu = x.tail(prob.constraint_count());
    return s;
}

Mat operator_matrix(const OpfProblem& prob) {
    const int n = prob.bus_count();
    const int m = prob.constraint_count();
    Mat Q = Mat::Zero(2 * n, 2 * n);
    Q.diagonal().head(n) = 2.0 * prob.c2_p;
    Q.diagonal().tail(n) = 2.0 * prob.c2_q;
    if (prob.system_cost) Q += prob.system_cost->Q0;

    Mat K(m, 2 * n);
    K << prob.G * prob.model.A, prob.G * prob.model.B;

    Mat H(2 * n + m, 2 * n + m);
    H.topLeftCorner(2 * n, 2 * n) = Q;
    H.topRightCorner(2 * n, m) = K.transpose();
    H.bottomLeftCorner(m, 2 * n) = -K;
    H.bottomRightCorner(m, m) = prob.eta * Mat::Identity(m, m);
    return H;
}

Vec operator_offset(const OpfProblem& prob) {
    const int n = prob.bus_count();
    Vec b(state_dimension(prob));
    b.segment(0, n) = -2.0 * prob.c2_p.cwiseProduct(prob.p_target);
    b.segment(n, n).setZero();
    if (prob.system_cost) {
        b.segment(0, n) += prob.system_cost->b0.head(n);
        b.segment(n, n) += prob.system_cost->b0.tail(n);
    }
    b.tail(prob.constraint_count()) = -(prob.G * prob.model.r0 + prob.d);
    return b;
}

Vec gradient_map(const OpfProblem& prob, const Vec& x) {
    const ControllerState s = unstack_state(prob, x);
    const Vec r = prob.model.evaluate(s.p, s.q);
    const Gradients g = lagrangian_gradients(prob, s, r);
    Vec f(x.size());
    f << g.p, g.q, -g.mu;
    return f;
}

Vec project_feasible(const OpfProblem& prob, const Vec& x) {
    const int n = prob.bus_count();
    Vec out(x.size());
    out.segment(0, n) = clamp(x.segment(0, n), prob.p_min, prob.p_max);
    out.segment(n, n) = clamp(x.segment(n, n), prob.q_min, prob.q_max);
    out.tail(prob.constraint_count()) = x.tail(prob.constraint_count()).cwiseMax(0.0);
    return out;
}

namespace {

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_lambda_max(const Mat& M, double rel_tol, int max_iter) {
    const Eigen::Index n = M.rows();
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = 1.0 + 1e-3 * static_cast<double>(i % 7);
    x.normalize();
    double lambda = x.dot(M * x);
    for (int it = 0; it < max_iter; ++it) {
        Vec y = M * x;
        const double ny = y.norm();
        if (ny == 0.0) return 0.0;
        x = y / ny;
        const double next = x.dot(M * x);
        if (std::abs(next - lambda) <= rel_tol * std::max(next, 1e-300)) return next;
        lambda = next;
    }
    return lambda;
}

} // namespace

ConvergenceCertificate certify_operator(const Mat& Q, const Mat& K, double eta) {
    if (Q.rows() != Q.cols()) throw DimensionError("certify_operator: Q must be square");
    if (K.cols() != Q.cols()) throw DimensionError("certify_operator: K column count must match Q");
    if (!Q.isApprox(Q.transpose(), 1e-12))
        throw ValidationError("certify_operator: Q must be symmetric");
    if (!(eta > 0.0)) throw ValidationError("certify_operator: eta must be positive");

    const Eigen::Index n2 = Q.rows();
    const Eigen::Index m = K.rows();
    Mat H(n2 + m, n2 + m);
    H.topLeftCorner(n2, n2) = Q;
    H.topRightCorner(n2, m) = K.transpose();
    H.bottomLeftCorner(m, n2) = -K;
    H.bottomRightCorner(m, m) = eta * Mat::Identity(m, m);

    Eigen::SelfAdjointEigenSolver<Mat> es(Q);
    const double lambda_min_q = es.eigenvalues().minCoeff();
    if (!(lambda_min_q > 0.0))
        throw ValidationError("certify_operator: cost Hessian is not positive definite");

    ConvergenceCertificate cert;
    cert.L = std::sqrt(power_iteration_lambda_max(H.transpose() * H, 1e-10, 200000));
    cert.M_strong = std::min(lambda_min_q, eta);
    cert.eps_max = 2.0 * cert.M_strong / (cert.L * cert.L);
    return cert;
}

ConvergenceCertificate certify_step(const OpfProblem& prob) {
    const int n = prob.bus_count();
    Mat Q = Mat::Zero(2 * n, 2 * n);
    Q.diagonal().head(n) = 2.0 * prob.c2_p;
    Q.diagonal().tail(n) = 2.0 * prob.c2_q;
    if (prob.system_cost) Q += prob.system_cost->Q0;
    Mat K(prob.constraint_count(), 2 * n);
    K << prob.G * prob.model.A, prob.G * prob.model.B;
    return certify_operator(Q, K, prob.eta);
}

double vi_residual(const OpfProblem& prob, const Vec& x) {
    const Vec proj = project_feasible(prob, x - gradient_map(prob, x));
    return (x - proj).cwiseAbs().maxCoeff();
}

SaddleResult solve_saddle_point(const OpfProblem& prob, double tol) {
    prob.validate();
    const int n = prob.bus_count();
    const int m = prob.constraint_count();
    const int dim = state_dimension(prob);

    Vec lo(dim), hi(dim);
    lo << prob.p_min, prob.q_min, Vec::Zero(m);
    hi << prob.p_max, prob.q_max, Vec::Constant(m, std::numeric_limits<double>::infinity());

    const Mat H = operator_matrix(prob);
    const Vec b = operator_offset(prob);

    // status: 0 free, 1 at lower bound, 2 at upper bound
    std::vector<int> status(static_cast<size_t>(dim), 0);
    for (int i = 0; i < dim; ++i)
        if (lo[i] == hi[i]) status[static_cast<size_t>(i)] = 1;  // degenerate, stays pinned
    for (int j = 2 * n; j < dim; ++j) status[static_cast<size_t>(j)] = 1;  // duals start at 0

    Vec x = Vec::Zero(dim);
    const int max_policy_iters = 500;
    int it = 0;
    for (; it < max_policy_iters; ++it) {
        std::vector<int> free_idx;
        free_idx.reserve(static_cast<size_t>(dim));
        for (int i = 0; i < dim; ++i) {
            if (status[static_cast<size_t>(i)] == 0) free_idx.push_back(i);
            else x[i] = status[static_cast<size_t>(i)] == 1 ? lo[i] : hi[i];
        }

        const int nf = static_cast<int>(free_idx.size());
        if (nf > 0) {
            Mat Hff(nf, nf);
            Vec rhs(nf);
            for (int a = 0; a < nf; ++a) {
                double acc = b[free_idx[static_cast<size_t>(a)]];
                for (int i = 0; i < dim; ++i) {
                    if (status[static_cast<size_t>(i)] != 0)
                        acc += H(free_idx[static_cast<size_t>(a)], i) * x[i];
                }
                rhs[a] = -acc;
                for (int c = 0; c < nf; ++c)
                    Hff(a, c) = H(free_idx[static_cast<size_t>(a)], free_idx[static_cast<size_t>(c)]);
            }
            const Vec xf = Hff.partialPivLu().solve(rhs);
            for (int a = 0; a < nf; ++a) x[free_idx[static_cast<size_t>(a)]] = xf[a];
        }

        const Vec f = H * x + b;
        bool changed = false;
        for (int i = 0; i < dim; ++i) {
            if (lo[i] == hi[i]) continue;  // degenerate coordinate never changes status
            const int st = status[static_cast<size_t>(i)];
            if (st == 0) {
                if (x[i] < lo[i]) { status[static_cast<size_t>(i)] = 1; changed = true; }
                else if (x[i] > hi[i]) { status[static_cast<size_t>(i)] = 2; changed = true; }
            } else if (st == 1) {
                // at lower bound the VI requires F_i >= 0
                if (f[i] < -tol) { status[static_cast<size_t>(i)] = 0; changed = true; }
            } else {
                if (f[i] > tol) { status[static_cast<size_t>(i)] = 0; changed = true; }
            }
        }
        if (!changed) break;
    }

    SaddleResult res;
    res.state = unstack_state(prob, project_feasible(prob, x));
    res.iterations = it + 1;
    res.vi_residual = vi_residual(prob, stack_state(res.state));
    if (!(res.vi_residual <= std::max(tol, 1e-10)))
        throw ValidationError("solve_saddle_point: policy iteration stalled (VI residual " +
                              std::to_string(res.vi_residual) + ")");
    return res;
}

} // namespace gridloop::controller
