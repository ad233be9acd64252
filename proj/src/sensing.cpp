#include "gridloop/sensing.hpp"

#include "gridloop/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace gridloop::sensing {

namespace {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t iteration, std::uint64_t bus,
                             std::uint64_t qty, std::uint64_t ctr) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ iteration);
    h = splitmix64(h ^ (bus << 2 | qty));
    h = splitmix64(h ^ ctr);
    return h;
}

/// uniform in (0,1): 53 mantissa bits, offset half an ulp away from 0
inline double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace

double CounterRng::normal(std::uint64_t iteration, std::uint64_t bus, Quantity qty) const {
    const std::uint64_t q = static_cast<std::uint64_t>(qty);
    const double u1 = to_unit(mix_key(seed_, iteration, bus, q, 0));
    const double u2 = to_unit(mix_key(seed_, iteration, bus, q, 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void MeasurementPlan::validate_and_clamp(int n_buses) {
    if (static_cast<int>(v_sensors.size()) != sigma_v.size())
        throw DimensionError("MeasurementPlan: sigma_v must align with v_sensors");
    if (sigma_p.size() != n_buses || sigma_q.size() != n_buses)
        throw DimensionError("MeasurementPlan: sigma_p/sigma_q must cover every bus");
    for (int bus : v_sensors) {
        if (bus < 1 || bus > n_buses)
            throw ValidationError("MeasurementPlan: sensor at unknown bus " + std::to_string(bus));
    }
    constexpr double kSigmaClamp = 1e-12;
    auto clamp_vec = [](Vec& v, const char* name) {
        for (int i = 0; i < v.size(); ++i) {
            if (v[i] < 0.0)
                throw ValidationError(std::string("MeasurementPlan: negative ") + name);
            if (v[i] < kSigmaClamp) v[i] = kSigmaClamp;
        }
    };
    clamp_vec(sigma_v, "sigma_v");
    clamp_vec(sigma_p, "sigma_p");
    clamp_vec(sigma_q, "sigma_q");
}

MeasurementSnapshot take_measurements(const MeasurementPlan& plan, const TrueState& state,
                                      int iteration, const Vec& nominal_p, const Vec& nominal_q) {
    const auto n = state.v_mag.size();
    if (state.p.size() != n || state.q.size() != n || nominal_p.size() != n ||
        nominal_q.size() != n)
        throw DimensionError("take_measurements: state dimensions disagree");

    const CounterRng rng(plan.seed);
    MeasurementSnapshot snap;
    snap.true_v = state.v_mag;

    snap.v_meas.resize(plan.v_sensors.size());
    for (size_t s = 0; s < plan.v_sensors.size(); ++s) {
        const int bus = plan.v_sensors[s];
        const double eps = rng.normal(static_cast<std::uint64_t>(iteration),
                                      static_cast<std::uint64_t>(bus), Quantity::VoltageMag);
        snap.v_meas[s] = state.v_mag[bus - 1] * (1.0 + plan.sigma_v[static_cast<int>(s)] * eps);
    }

    // pseudo draws keyed at iteration 0: fixed for the scenario
    snap.p_pseudo.resize(n);
    snap.q_pseudo.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto bus = static_cast<std::uint64_t>(i + 1);
        snap.p_pseudo[i] =
            nominal_p[i] * (1.0 + plan.sigma_p[i] * rng.normal(0, bus, Quantity::ActivePower));
        snap.q_pseudo[i] =
            nominal_q[i] * (1.0 + plan.sigma_q[i] * rng.normal(0, bus, Quantity::ReactivePower));
    }
    return snap;
}

} // namespace gridloop::sensing
