#include "support/fixtures.hpp"

namespace gridloop::testing {

using netmodel::Bus;
using netmodel::Line;
using netmodel::NetworkCase;
using netmodel::Substation;

NetworkCase two_bus_case(double p_nom, double q_nom, Complex z) {
    Substation sub;
    std::vector<Bus> buses{{1, p_nom, q_nom}};
    std::vector<Line> lines{{0, 1, z, {0.0, 0.0}}};
    return NetworkCase(sub, std::move(buses), std::move(lines), 1.0, 1.0);
}

NetworkCase chain_case(int n, Complex z, double p_nom, double q_nom) {
    Substation sub;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    for (int i = 1; i <= n; ++i) {
        buses.push_back({i, p_nom, q_nom});
        lines.push_back({i - 1, i, z, {0.0, 0.0}});
    }
    return NetworkCase(sub, std::move(buses), std::move(lines), 1.0, 1.0);
}

controller::OpfProblem band_problem(const netmodel::NetworkCase& net,
                                    const netmodel::LinearPFModel& model, double v_lo,
                                    double v_hi, double c2_p, double c2_q, double eta,
                                    double span) {
    const int n = net.bus_count();
    controller::OpfProblem prob;
    prob.model = model;
    prob.c2_p = Vec::Constant(n, c2_p);
    prob.c2_q = Vec::Constant(n, c2_q);
    prob.p_target = net.nominal_p();
    prob.p_min = net.nominal_p().array() - span;
    prob.p_max = net.nominal_p().array() + span;
    prob.q_min = Vec::Constant(n, -span);
    prob.q_max = Vec::Constant(n, span);
    auto [G, d] = controller::voltage_band_constraint(n, v_lo, v_hi);
    prob.G = std::move(G);
    prob.d = std::move(d);
    prob.eta = eta;
    prob.validate();
    return prob;
}

CertifiedInstance certified_five_bus() {
    // targets inject enough that the unconstrained optimum violates the
    // upper band, so the saddle point carries active duals
    NetworkCase net = chain_case(5, {0.01, 0.02}, 0.4, 0.0);
    const auto adm = netmodel::build_admittance(net);
    const auto model = netmodel::linearize(net, adm, Vec::Zero(5), Vec::Zero(5));
    auto prob = band_problem(net, model, 0.95, 1.05, 0.5, 0.5, 1.0, 1.0);
    return CertifiedInstance{std::move(net), model, std::move(prob)};
}

controller::OpfProblem random_instance(TestRng& rng, int n) {
    controller::OpfProblem prob;
    prob.model.A.resize(n, n);
    prob.model.B.resize(n, n);
    prob.model.r0.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            prob.model.A(i, j) = rng.uniform(0.005, 0.08);
            prob.model.B(i, j) = rng.uniform(0.005, 0.08);
        }
        prob.model.r0[i] = rng.uniform(0.98, 1.03);
    }
    prob.c2_p.resize(n);
    prob.c2_q.resize(n);
    prob.p_target.resize(n);
    for (int i = 0; i < n; ++i) {
        prob.c2_p[i] = rng.uniform(0.2, 2.0);
        prob.c2_q[i] = rng.uniform(0.2, 2.0);
        prob.p_target[i] = rng.uniform(-0.5, 0.5);
    }
    prob.p_min = Vec::Constant(n, -1.0);
    prob.p_max = Vec::Constant(n, 1.0);
    prob.q_min = Vec::Constant(n, -1.0);
    prob.q_max = Vec::Constant(n, 1.0);
    auto [G, d] = controller::voltage_band_constraint(n, 0.95, 1.05);
    prob.G = std::move(G);
    prob.d = std::move(d);
    prob.eta = rng.uniform(0.05, 1.0);
    prob.validate();
    return prob;
}

controller::ControllerState random_feasible_state(TestRng& rng,
                                                  const controller::OpfProblem& prob,
                                                  double mu_max) {
    const int n = prob.bus_count();
    controller::ControllerState s;
    s.p.resize(n);
    s.q.resize(n);
    s.mu.resize(prob.constraint_count());
    for (int i = 0; i < n; ++i) {
        s.p[i] = rng.uniform(prob.p_min[i], prob.p_max[i]);
        s.q[i] = rng.uniform(prob.q_min[i], prob.q_max[i]);
    }
    for (int j = 0; j < prob.constraint_count(); ++j) s.mu[j] = rng.uniform(0.0, mu_max);
    return s;
}

std::uint64_t TestRng::next() {
    state_ ^= state_ << 13;
    state_ ^= state_ >> 7;
    state_ ^= state_ << 17;
    return state_;
}

double TestRng::uniform(double lo, double hi) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

int TestRng::uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
}

} // namespace gridloop::testing
