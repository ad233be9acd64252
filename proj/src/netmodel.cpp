#include "gridloop/netmodel.hpp"

#include "gridloop/acpf.hpp"
#include "gridloop/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace gridloop::netmodel {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional = {}) {
    for (const char* k : required) {
        if (!obj.contains(k))
            throw ParseError("case file: missing key '" + std::string(k) + "' in " + where);
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& k = it.key();
        bool known = std::any_of(required.begin(), required.end(),
                                 [&](const char* r) { return k == r; }) ||
                     std::any_of(optional.begin(), optional.end(),
                                 [&](const char* o) { return k == o; });
        if (!known)
            throw ParseError("case file: unknown key '" + k + "' in " + where);
    }
}

double num(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number())
        throw ParseError("case file: '" + std::string(key) + "' in " + where + " must be a number");
    return v.get<double>();
}

int integer(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ParseError("case file: '" + std::string(key) + "' in " + where + " must be an integer");
    return v.get<int>();
}

NetworkCase parse_case(const json& root) {
    require_keys(root, "top level", {"base_mva", "base_kv", "substation", "buses", "lines"},
                 {"units"});

    std::string units = "pu";
    if (root.contains("units")) {
        units = root.at("units").get<std::string>();
        if (units != "pu" && units != "si")
            throw ParseError("case file: 'units' must be \"pu\" or \"si\"");
    }

    const double base_mva = num(root, "base_mva", "top level");
    const double base_kv = num(root, "base_kv", "top level");
    if (base_mva <= 0.0 || base_kv <= 0.0)
        throw ValidationError("case file: base_mva and base_kv must be positive");

    // SI -> pu conversion factors (identity when units == "pu").
    const bool si = units == "si";
    const double z_base = base_kv * base_kv / base_mva;  // ohm
    const double s_div = si ? base_mva : 1.0;            // MW -> pu
    const double z_div = si ? z_base : 1.0;              // ohm -> pu
    const double y_mul = si ? z_base : 1.0;              // siemens -> pu
    const double v_div = si ? base_kv : 1.0;             // kV -> pu

    const json& jsub = root.at("substation");
    require_keys(jsub, "substation", {"id", "voltage_re", "voltage_im"});
    Substation sub;
    sub.id = integer(jsub, "id", "substation");
    sub.voltage = Complex(num(jsub, "voltage_re", "substation") / v_div,
                          num(jsub, "voltage_im", "substation") / v_div);

    std::vector<Bus> buses;
    for (const json& jb : root.at("buses")) {
        require_keys(jb, "bus entry", {"id", "p_nom", "q_nom"});
        Bus b;
        b.id = integer(jb, "id", "bus entry");
        b.p_nom = num(jb, "p_nom", "bus " + std::to_string(b.id)) / s_div;
        b.q_nom = num(jb, "q_nom", "bus " + std::to_string(b.id)) / s_div;
        buses.push_back(b);
    }

    std::vector<Line> lines;
    int line_no = 0;
    for (const json& jl : root.at("lines")) {
        ++line_no;
        const std::string where = "line " + std::to_string(line_no);
        require_keys(jl, where, {"from", "to", "r", "x"}, {"b_shunt"});
        Line l;
        l.from = integer(jl, "from", where);
        l.to = integer(jl, "to", where);
        l.series_impedance = Complex(num(jl, "r", where) / z_div, num(jl, "x", where) / z_div);
        double b = jl.contains("b_shunt") ? num(jl, "b_shunt", where) : 0.0;
        l.shunt_admittance = Complex(0.0, b * y_mul);
        lines.push_back(l);
    }

    return NetworkCase(sub, std::move(buses), std::move(lines), base_mva, base_kv);
}

} // namespace

NetworkCase::NetworkCase(Substation substation, std::vector<Bus> buses, std::vector<Line> lines,
                         double base_mva, double base_kv)
    : substation_(substation),
      buses_(std::move(buses)),
      lines_(std::move(lines)),
      base_mva_(base_mva),
      base_kv_(base_kv) {
    std::sort(buses_.begin(), buses_.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
    validate();
}

void NetworkCase::validate() const {
    if (substation_.id != 0)
        throw ValidationError("substation id must be 0, got " + std::to_string(substation_.id));
    if (base_mva_ <= 0.0 || base_kv_ <= 0.0)
        throw ValidationError("base_mva and base_kv must be positive");

    const int n = bus_count();
    std::set<int> seen;
    for (const Bus& b : buses_) {
        if (b.id == 0)
            throw ValidationError("bus id 0 is reserved for the substation");
        if (!seen.insert(b.id).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
    }
    // sorted + unique + none zero: ids are 1..N iff the last equals N
    for (int i = 0; i < n; ++i) {
        if (buses_[i].id != i + 1)
            throw ValidationError("bus ids must be contiguous 1..N; missing id " +
                                  std::to_string(i + 1));
    }

    int line_no = 0;
    for (const Line& l : lines_) {
        ++line_no;
        const std::string name = "line " + std::to_string(line_no) + " (" +
                                 std::to_string(l.from) + "->" + std::to_string(l.to) + ")";
        if (l.from < 0 || l.from > n || l.to < 0 || l.to > n)
            throw ValidationError(name + ": endpoint is not a known bus id");
        if (l.from == l.to)
            throw ValidationError(name + ": self-loop");
        if (l.series_impedance == Complex(0.0, 0.0))
            throw ValidationError(name + ": zero series impedance");
    }

    // connectivity from the substation
    std::vector<std::vector<int>> adj(static_cast<size_t>(n) + 1);
    for (const Line& l : lines_) {
        adj[static_cast<size_t>(l.from)].push_back(l.to);
        adj[static_cast<size_t>(l.to)].push_back(l.from);
    }
    std::vector<char> reached(static_cast<size_t>(n) + 1, 0);
    std::vector<int> stack{0};
    reached[0] = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int w : adj[static_cast<size_t>(u)]) {
            if (!reached[static_cast<size_t>(w)]) {
                reached[static_cast<size_t>(w)] = 1;
                stack.push_back(w);
            }
        }
    }
    for (int i = 1; i <= n; ++i) {
        if (!reached[static_cast<size_t>(i)])
            throw ValidationError("bus " + std::to_string(i) +
                                  " is unreachable from the substation");
    }
}

Vec NetworkCase::nominal_p() const {
    Vec p(bus_count());
    for (int i = 0; i < bus_count(); ++i) p[i] = buses_[static_cast<size_t>(i)].p_nom;
    return p;
}

Vec NetworkCase::nominal_q() const {
    Vec q(bus_count());
    for (int i = 0; i < bus_count(); ++i) q[i] = buses_[static_cast<size_t>(i)].q_nom;
    return q;
}

NetworkCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open case file: " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("case file " + path + ": " + e.what());
    }
    return parse_case(root);
}

NetworkCase load_case_from_string(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("case text: ") + e.what());
    }
    return parse_case(root);
}

AdmittanceModel build_admittance(const NetworkCase& c) {
    const int n = c.bus_count();
    AdmittanceModel m;
    m.Y = CMat::Zero(n, n);
    m.y_bar = CVec::Zero(n);
    m.y00 = Complex(0.0, 0.0);

    // diag accumulators over substation (index 0) and buses (1..N)
    CVec diag = CVec::Zero(n + 1);
    for (const netmodel::Line& l : c.lines()) {
        const Complex y = Complex(1.0, 0.0) / l.series_impedance;
        const Complex ysh2 = l.shunt_admittance / 2.0;
        diag[l.from] += y + ysh2;
        diag[l.to] += y + ysh2;
        if (l.from == 0 || l.to == 0) {
            int b = l.from == 0 ? l.to : l.from;
            m.y_bar[b - 1] -= y;
        } else {
            m.Y(l.from - 1, l.to - 1) -= y;
            m.Y(l.to - 1, l.from - 1) -= y;
        }
    }
    m.y00 = diag[0];
    for (int i = 0; i < n; ++i) m.Y(i, i) = diag[i + 1];
    return m;
}

LinearPFModel linearize(const NetworkCase& c, const AdmittanceModel& adm,
                        const Vec& p0, const Vec& q0, const LinearizeOptions& opt) {
    const int n = c.bus_count();
    if (p0.size() != n || q0.size() != n)
        throw DimensionError("linearize: operating point size does not match bus count");

    acpf::PowerFlowOptions pf_opt;
    pf_opt.tol = opt.pf_tol;
    pf_opt.max_iter = opt.pf_max_iter;
    acpf::PlantSolver plant(adm, c.substation().voltage, pf_opt);

    const Vec r_base = plant.solve(p0, q0).v_mag;

    LinearPFModel model;
    model.A.resize(n, n);
    model.B.resize(n, n);
    const double d = opt.delta;
    Vec p = p0, q = q0;
    for (int j = 0; j < n; ++j) {
        p[j] = p0[j] + d;
        Vec up = plant.solve(p, q0).v_mag;
        p[j] = p0[j] - d;
        Vec dn = plant.solve(p, q0).v_mag;
        p[j] = p0[j];
        model.A.col(j) = (up - dn) / (2.0 * d);

        q[j] = q0[j] + d;
        up = plant.solve(p0, q).v_mag;
        q[j] = q0[j] - d;
        dn = plant.solve(p0, q).v_mag;
        q[j] = q0[j];
        model.B.col(j) = (up - dn) / (2.0 * d);
    }
    model.r0 = r_base - model.A * p0 - model.B * q0;

    const double fit = (model.evaluate(p0, q0) - r_base).cwiseAbs().maxCoeff();
    if (!(fit <= opt.fit_tolerance))
        throw ValidationError("linearize: model does not reproduce the linearization point (err " +
                              std::to_string(fit) + " pu)");
    return model;
}

} // namespace gridloop::netmodel
