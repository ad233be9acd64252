#pragma once

#include "gridloop/types.hpp"

#include <cstdint>
#include <vector>

namespace gridloop::sensing {

enum class Quantity : std::uint64_t { VoltageMag = 0, ActivePower = 1, ReactivePower = 2 };

/// Stateless counter-based generator: every draw is a pure function of
/// (seed, iteration, bus, quantity), so traces replay bitwise.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    /// Standard normal draw for the given key.
    double normal(std::uint64_t iteration, std::uint64_t bus, Quantity qty) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

/// Sensor placement and noise levels (the measurement set M). Pseudo
/// coverage is implicitly every bus, which keeps the linear SE observable.
struct MeasurementPlan {
    std::vector<int> v_sensors;  // bus ids carrying voltage-magnitude sensors
    Vec sigma_v;                 // per sensor, fraction of true value (aligned with v_sensors)
    Vec sigma_p;                 // per bus, fraction of nominal value
    Vec sigma_q;                 // per bus
    std::uint64_t seed = 1;

    int sensor_count() const { return static_cast<int>(v_sensors.size()); }

    /// Checks bus ids and sigma positivity. Zero sigmas are clamped to
    /// 1e-12 (the noiseless validation mode).
    void validate_and_clamp(int n_buses);
};

struct TrueState {
    Vec p;      // actual injections, pu
    Vec q;
    Vec v_mag;  // actual |v|, pu
};

struct MeasurementSnapshot {
    std::vector<double> v_meas;  // aligned with plan.v_sensors
    Vec p_pseudo;                // N
    Vec q_pseudo;                // N
    Vec true_v;                  // N, retained for error accounting only
};

/// Noisy sensor readings for this iteration plus the scenario's pseudo
/// injections. Sensor noise is keyed by the iteration; pseudo draws are
/// keyed at iteration 0 so they stay fixed for the whole scenario (they
/// stand in for historic data, not live telemetry).
MeasurementSnapshot take_measurements(const MeasurementPlan& plan, const TrueState& state,
                                      int iteration, const Vec& nominal_p, const Vec& nominal_q);

} // namespace gridloop::sensing
