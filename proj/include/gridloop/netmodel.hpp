#pragma once

#include "gridloop/types.hpp"

#include <string>
#include <vector>

namespace gridloop::netmodel {

struct Bus {
    int id = 0;          // 1..N
    double p_nom = 0.0;  // nominal active injection, pu (generation positive)
    double q_nom = 0.0;  // nominal reactive injection, pu
};

struct Line {
    int from = 0;
    int to = 0;
    Complex series_impedance{0.0, 0.0};  // pu
    Complex shunt_admittance{0.0, 0.0};  // total line shunt, pu (half at each end)
};

struct Substation {
    int id = 0;
    Complex voltage{1.0, 0.0};  // slack phasor V0, pu
};

/// Bus/line graph with the substation as slack. Immutable after
/// construction; construction validates all invariants (connectivity,
/// contiguous ids, nonzero series impedances).
class NetworkCase {
public:
    NetworkCase(Substation substation, std::vector<Bus> buses, std::vector<Line> lines,
                double base_mva, double base_kv);

    int bus_count() const { return static_cast<int>(buses_.size()); }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    const Substation& substation() const { return substation_; }
    double base_mva() const { return base_mva_; }
    double base_kv() const { return base_kv_; }

    /// Nominal injections stacked by bus id (index i -> bus id i+1).
    Vec nominal_p() const;
    Vec nominal_q() const;

private:
    void validate() const;

    Substation substation_;
    std::vector<Bus> buses_;   // sorted by id, ids exactly 1..N
    std::vector<Line> lines_;
    double base_mva_ = 1.0;
    double base_kv_ = 1.0;
};

/// Parses and validates a case file (schema in the README). Values may be
/// given in pu or SI; SI cases are converted onto the declared bases.
NetworkCase load_case(const std::string& path);

/// Same parser over an in-memory JSON document, for programmatic cases.
NetworkCase load_case_from_string(const std::string& json_text);

/// Nodal admittance partition: the (N+1)x(N+1) matrix over
/// {substation} + buses, split into y00, the coupling column y_bar and the
/// bus block Y.
struct AdmittanceModel {
    CMat Y;       // N x N, symmetric
    CVec y_bar;   // N
    Complex y00{0.0, 0.0};
};

AdmittanceModel build_admittance(const NetworkCase& c);

enum class QuantityKind { VoltageMagnitude };

/// First-order model r = A p + B q + r0 of the monitored quantities.
struct LinearPFModel {
    Mat A;   // M x N
    Mat B;   // M x N
    Vec r0;  // M
    QuantityKind quantity_kind = QuantityKind::VoltageMagnitude;

    Vec evaluate(const Vec& p, const Vec& q) const { return A * p + B * q + r0; }
};

struct LinearizeOptions {
    double delta = 1e-5;          // central-difference step, pu
    double fit_tolerance = 1e-6;  // required model/plant agreement at the point, pu
    double pf_tol = 1e-12;        // plant tolerance for the sensitivity solves
    int pf_max_iter = 300;
};

/// Voltage-magnitude sensitivities by numeric differentiation of the AC
/// fixed-point solver around the operating point (p0, q0).
LinearPFModel linearize(const NetworkCase& c, const AdmittanceModel& adm,
                        const Vec& p0, const Vec& q0, const LinearizeOptions& opt = {});

} // namespace gridloop::netmodel
