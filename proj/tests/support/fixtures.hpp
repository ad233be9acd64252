#pragma once

#include "gridloop/controller.hpp"
#include "gridloop/netmodel.hpp"

#include <cstdint>

namespace gridloop::testing {

/// substation -- one line (z = 0.01 + 0.02j pu) -- bus 1
netmodel::NetworkCase two_bus_case(double p_nom = 0.0, double q_nom = 0.0,
                                   Complex z = {0.01, 0.02});

/// substation -- bus 1 -- ... -- bus n chain with equal line impedances
netmodel::NetworkCase chain_case(int n, Complex z = {0.01, 0.02}, double p_nom = 0.0,
                                 double q_nom = 0.0);

/// Voltage-band OPF over the model of `net`, uniform curvatures, every bus
/// controllable with box [p_nom - span, p_nom + span] x [-span, span],
/// targets at nominal.
controller::OpfProblem band_problem(const netmodel::NetworkCase& net,
                                    const netmodel::LinearPFModel& model, double v_lo,
                                    double v_hi, double c2_p, double c2_q, double eta,
                                    double span);

/// The certified 5-bus instance used by the rate and property suites:
/// chain of 5 buses, unit-curvature costs (Q = I), eta = 1, band
/// [0.95, 1.05], targets pushing the top band active.
struct CertifiedInstance {
    netmodel::NetworkCase net;
    netmodel::LinearPFModel model;
    controller::OpfProblem problem;
};
CertifiedInstance certified_five_bus();

/// Deterministic xorshift-based uniform in [lo, hi] for test sampling.
class TestRng {
public:
    explicit TestRng(std::uint64_t seed) : state_(seed ? seed : 1) {}
    double uniform(double lo, double hi);
    int uniform_int(int lo, int hi);

private:
    std::uint64_t next();
    std::uint64_t state_;
};

/// Synthetic quadratic instance with a random (not network-derived)
/// linear model and a voltage band; boxes [-1, 1], targets inside.
controller::OpfProblem random_instance(TestRng& rng, int n);

/// Uniform point inside Z x R+^m (duals in [0, mu_max]).
controller::ControllerState random_feasible_state(TestRng& rng,
                                                  const controller::OpfProblem& prob,
                                                  double mu_max = 2.0);

} // namespace gridloop::testing
