#pragma once

// Configuration, grid evaluation and CSV output behind the `twm` command
// line tool. Everything here is usable without the CLI front end.

#include "twm/multiqubit.hpp"
#include "twm/protocol.hpp"
#include "twm/shifts.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace twm::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kZeroProbability = 2, kConfigError = 3, kNoPoints = 4 };

inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_number(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidConfig, "bad number for " + key + ": '" + text + "'");
    }
}

struct Range {
    double start = 0.0;
    double stop = 0.0;
    int count = 1;

    std::vector<double> values() const {
        std::vector<double> v(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i)
            v[static_cast<std::size_t>(i)] = count == 1 ? start : start + (stop - start) * i / (count - 1);
        return v;
    }
    std::string str() const { return fmt(start) + ":" + fmt(stop) + ":" + std::to_string(count); }
    bool operator==(const Range&) const = default;
};

inline Range parse_range(const std::string& key, const std::string& text) {
    const auto a = text.find(':');
    const auto b = a == std::string::npos ? a : text.find(':', a + 1);
    if (b == std::string::npos) throw Error(ErrorKind::InvalidConfig, "range for " + key + " must be start:stop:count");
    Range r;
    r.start = parse_number(key, text.substr(0, a));
    r.stop = parse_number(key, text.substr(a + 1, b - a - 1));
    const double n = parse_number(key, text.substr(b + 1));
    if (n < 1 || n != std::floor(n) || n > 1e7) throw Error(ErrorKind::InvalidConfig, "range count for " + key + " must be a positive integer");
    r.count = static_cast<int>(n);
    return r;
}

/// Physical parameters a config may fix or range over.
inline const std::vector<std::string>& parameter_keys() {
    static const std::vector<std::string> keys{"P0", "Q0sq", "m", "w", "tau", "f", "gamma", "omega",
                                               "J", "q", "m1", "m2", "w1", "w2"};
    return keys;
}

inline bool is_parameter(const std::string& k) {
    const auto& keys = parameter_keys();
    return std::find(keys.begin(), keys.end(), k) != keys.end();
}

struct SweepConfig {
    std::string mode = "run";       // run | sweep | opfind | twoqubit | figure
    std::string system = "single";  // single | two
    std::string coherence = "absolute";  // Q0sq as |Q0|^2, or "fraction" of P0(1-P0)
    std::map<std::string, double> values;
    std::vector<std::pair<std::string, Range>> ranges;  // outermost first
    std::string out;
    std::string figure;
    int resolution = 64;
    double tol = kTolerance;
    std::optional<double> W_bound;
    unsigned workers = 1;
    int t_points = 101;

    bool operator==(const SweepConfig&) const = default;

    const Range* range(const std::string& key) const {
        for (const auto& [k, r] : ranges)
            if (k == key) return &r;
        return nullptr;
    }
    bool has(const std::string& key) const { return values.count(key) || range(key); }
};

/// Applies one `key = value` assignment; later assignments win.
inline void assign(SweepConfig& c, const std::string& key, const std::string& value) {
    const auto as_int = [&](int lo) {
        const double v = parse_number(key, value);
        if (v != std::floor(v) || v < lo || v > 1e7) throw Error(ErrorKind::InvalidConfig, key + " must be an integer >= " + std::to_string(lo));
        return static_cast<int>(v);
    };
    if (key == "mode") c.mode = value;
    else if (key == "system") c.system = value;
    else if (key == "coherence") c.coherence = value;
    else if (key == "out") c.out = value;
    else if (key == "figure") c.figure = value;
    else if (key == "resolution") c.resolution = as_int(2);
    else if (key == "workers") c.workers = static_cast<unsigned>(as_int(1));
    else if (key == "t_points") c.t_points = as_int(2);
    else if (key == "tol") c.tol = parse_number(key, value);
    else if (key == "W_bound") c.W_bound = parse_number(key, value);
    else if (is_parameter(key)) {
        std::erase_if(c.ranges, [&](const auto& kv) { return kv.first == key; });
        c.values.erase(key);
        if (key == "w" && value == "tilde") return;
        if (value.find(':') != std::string::npos)
            c.ranges.emplace_back(key, parse_range(key, value));
        else
            c.values[key] = parse_number(key, value);
    } else {
        throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "'");
    }
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// `key=value` as given on the command line or on a config file line.
inline std::pair<std::string, std::string> split_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidConfig, "expected key=value, got '" + text + "'");
    return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

inline SweepConfig parse_config(std::istream& in, SweepConfig c = {}) {
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto [k, v] = split_assignment(line);
        assign(c, k, v);
    }
    return c;
}

inline SweepConfig load_config(const std::string& path, SweepConfig c = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read config file " + path);
    return parse_config(in, std::move(c));
}

inline std::string write_config(const SweepConfig& c) {
    std::ostringstream os;
    os << "mode = " << c.mode << "\nsystem = " << c.system << "\ncoherence = " << c.coherence << '\n';
    if (!c.out.empty()) os << "out = " << c.out << '\n';
    if (!c.figure.empty()) os << "figure = " << c.figure << '\n';
    os << "resolution = " << c.resolution << "\ntol = " << fmt(c.tol) << "\nworkers = " << c.workers
       << "\nt_points = " << c.t_points << '\n';
    if (c.W_bound) os << "W_bound = " << fmt(*c.W_bound) << '\n';
    for (const auto& [k, v] : c.values) os << k << " = " << fmt(v) << '\n';
    for (const auto& [k, r] : c.ranges) os << k << " = " << r.str() << '\n';
    return os.str();
}

inline void check_bounds(const std::string& key, double v, const SweepConfig& c) {
    const auto bad = [&](const char* what) {
        throw Error(ErrorKind::InvalidConfig, key + " = " + fmt(v) + " " + what);
    };
    if (!std::isfinite(v)) bad("is not finite");
    if (key == "P0" || key == "m" || key == "w" || key == "m1" || key == "m2" || key == "w1" || key == "w2" ||
        key == "q") {
        if (v < 0.0 || v > 1.0) bad("is outside [0, 1]");
    } else if (key == "Q0sq") {
        if (v < 0.0 || v > (c.coherence == "fraction" ? 1.0 : 0.25)) bad("is outside its physical range");
    } else if (key == "tau") {
        if (v < 0.0) bad("is negative");
    } else if (key == "f") {
        if (v < 0.0 || v >= 0.5) bad("is outside [0, 1/2)");
    } else if (key == "gamma" || key == "omega") {
        if (v <= 0.0) bad("must be positive");
    }
}

inline void validate(const SweepConfig& c) {
    static const std::vector<std::string> modes{"run", "sweep", "opfind", "twoqubit", "figure"};
    if (std::find(modes.begin(), modes.end(), c.mode) == modes.end())
        throw Error(ErrorKind::InvalidConfig, "unknown mode '" + c.mode + "'");
    if (c.system != "single" && c.system != "two") throw Error(ErrorKind::InvalidConfig, "system must be single or two");
    if (c.coherence != "absolute" && c.coherence != "fraction")
        throw Error(ErrorKind::InvalidConfig, "coherence must be absolute or fraction");
    if (!(c.tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "tol must be positive");
    if (c.W_bound && !(*c.W_bound > 0.0)) throw Error(ErrorKind::InvalidConfig, "W_bound must be positive");
    for (const auto& [k, v] : c.values) check_bounds(k, v, c);
    for (const auto& [k, r] : c.ranges) {
        if (r.count < 1) throw Error(ErrorKind::InvalidConfig, "range count must be at least 1");
        check_bounds(k, r.start, c);
        check_bounds(k, r.stop, c);
    }
}

// ---------------------------------------------------------------------------
// Parameter points

using Point = std::map<std::string, double>;

inline double param(const Point& p, const std::string& key) {
    if (auto it = p.find(key); it != p.end()) return it->second;
    if (key == "P0") return 0.9;
    if (key == "Q0sq") return 0.0;
    if (key == "m") return 0.4;
    if (key == "f") return 0.3;
    if (key == "gamma") return 1e-2;
    if (key == "omega") return 1.0;
    if (key == "tau") return 1.0 / param(p, "gamma");
    if (key == "J") return 2.0 * param(p, "omega") * param(p, "gamma");
    if (key == "q") return 0.1;
    if (key == "m1") return 0.5;
    if (key == "m2") return 0.6;
    throw Error(ErrorKind::InvalidConfig, "parameter " + key + " must be set");
}

inline BathParams bath_of(const Point& p) { return make_bath(param(p, "gamma"), param(p, "f"), param(p, "omega")); }

inline double q0sq_of(const Point& p, const SweepConfig& c) {
    const double P0 = param(p, "P0");
    const double v = param(p, "Q0sq");
    return c.coherence == "fraction" ? v * P0 * (1.0 - P0) : v;
}

/// Every grid point of the configured ranges, lexicographic in range order.
inline std::vector<Point> grid_points(const SweepConfig& c) {
    std::vector<Point> pts{Point(c.values.begin(), c.values.end())};
    for (const auto& [k, r] : c.ranges) {
        std::vector<Point> next;
        next.reserve(pts.size() * static_cast<std::size_t>(r.count));
        for (const auto& p : pts)
            for (double v : r.values()) {
                Point q = p;
                q[k] = v;
                next.push_back(std::move(q));
            }
        pts = std::move(next);
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Result rows

struct ResultRow {
    double P0 = NAN, Q0sq = NAN, m = NAN, w = NAN;
    double tau = NAN, f = NAN, gamma = NAN, omega = NAN;
    double gain_total = NAN, gain_inc = NAN, gain_coh = NAN;
    double probability = NAN, epsilon = NAN, W = NAN;
    bool operational = false;
    double q = NAN, m1 = NAN, m2 = NAN, w1 = NAN, w2 = NAN;
    double concurrence_final = NAN, concurrence_baseline = NAN;
};

inline std::string csv_header(bool two) {
    std::string h = "P0,Q0sq,m,w,tau,f,gamma,omega,gain_total,gain_inc,gain_coh,probability,epsilon,Wshift,operational";
    if (two) h += ",q,m1,m2,w1,w2,concurrence_final,concurrence_baseline";
    return h;
}

inline std::string csv_line(const ResultRow& r, bool two) {
    std::string s;
    for (double v : {r.P0, r.Q0sq, r.m, r.w, r.tau, r.f, r.gamma, r.omega, r.gain_total, r.gain_inc, r.gain_coh,
                     r.probability, r.epsilon, r.W})
        s += fmt(v) + ",";
    s += r.operational ? "1" : "0";
    if (two)
        for (double v : {r.q, r.m1, r.m2, r.w1, r.w2, r.concurrence_final, r.concurrence_baseline}) s += "," + fmt(v);
    return s;
}

inline void fill_outcome(ResultRow& r, const ProtocolOutcome& o, double tol) {
    r.gain_total = o.gain.total;
    r.gain_inc = o.gain.incoherent;
    r.gain_coh = o.gain.coherent;
    r.probability = o.success;
    r.epsilon = o.shifts.epsilon;
    r.W = o.shifts.W;
    r.operational = std::abs(r.epsilon) < tol && std::abs(r.W) < tol;
}

/// Reversal strength for a single-qubit point: the configured w, or w~.
inline StrengthValue resolve_w(const Point& p) {
    if (auto it = p.find("w"); it != p.end()) return {it->second, true};
    return null_energy_w_tilde(param(p, "P0"), param(p, "m"), bath_of(p), param(p, "tau"));
}

inline ProtocolOutcome run_single_point(const Point& p, const SweepConfig& c, double& w_used) {
    const auto w = resolve_w(p);
    w_used = w.value;
    if (!w.physical) throw Error(ErrorKind::OutOfRange, "w~ is outside [0, 1] for this point");
    const QubitState s0 = validate_qubit_state(param(p, "P0"), std::sqrt(q0sq_of(p, c)));
    return run_twm_single(s0, bath_of(p), ProtocolParams{{param(p, "m")}, {w.value}, param(p, "tau")});
}

inline CollectiveModel model_of(const Point& p) {
    const double omega = param(p, "omega");
    return build_model(2, omega, uniform_coupling(2, param(p, "J")), bath_of(p));
}

inline ResultRow evaluate_single(const Point& p, const SweepConfig& c) {
    ResultRow r;
    r.P0 = param(p, "P0");
    r.m = param(p, "m");
    r.tau = param(p, "tau");
    r.f = param(p, "f");
    r.gamma = param(p, "gamma");
    r.omega = param(p, "omega");
    r.Q0sq = q0sq_of(p, c);
    try {
        fill_outcome(r, run_single_point(p, c, r.w), c.tol);
    } catch (const Error& e) {
        // Unphysical or impossible grid points stay in the table as nan rows.
        if (e.kind() != ErrorKind::ZeroProbability && e.kind() != ErrorKind::OutOfRange &&
            e.kind() != ErrorKind::NonPositive)
            throw;
        r = ResultRow{r.P0, r.Q0sq, r.m, r.w, r.tau, r.f, r.gamma, r.omega};
    }
    return r;
}

inline ResultRow evaluate_two(const Point& p, const SweepConfig& c) {
    ResultRow r;
    r.tau = param(p, "tau");
    r.f = param(p, "f");
    r.gamma = param(p, "gamma");
    r.omega = param(p, "omega");
    r.q = param(p, "q");
    r.m1 = param(p, "m1");
    r.m2 = param(p, "m2");
    r.w1 = param(p, "w1");
    r.w2 = param(p, "w2");
    const auto model = model_of(p);
    try {
        const auto o = run_twm_multi(model, x_state(r.q).rho, {r.m1, r.m2}, {r.w1, r.w2}, r.tau);
        fill_outcome(r, o, c.tol);
        r.concurrence_final = *o.concurrence_final;
        r.concurrence_baseline = *o.concurrence_baseline;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ZeroProbability) throw;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Output

/// Writes text to path through a temporary file so a failed run never
/// leaves a partial result behind. An empty path means stdout.
inline void write_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    const std::filesystem::path target(path);
    const std::filesystem::path tmp = target.string() + ".partial";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + tmp.string());
            out << text;
            if (!out.flush()) throw Error(ErrorKind::InvalidConfig, "write failed for " + tmp.string());
        }
        std::filesystem::rename(tmp, target);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

inline std::string rows_csv(const std::vector<ResultRow>& rows, bool two) {
    std::string s = csv_header(two) + "\n";
    for (const auto& r : rows) s += csv_line(r, two) + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// Commands

inline void print_breakdown(std::ostream& os, const char* label, const ErgotropyBreakdown& b) {
    os << label << "total " << fmt(b.total) << "  inc " << fmt(b.incoherent) << "  coh " << fmt(b.coherent) << '\n';
}

inline void print_outcome(std::ostream& os, const ProtocolOutcome& o) {
    static const char* labels[] = {"R_i    ", "R_ii   ", "R_iii  ", "R_iv   "};
    for (std::size_t k = 0; k < 4; ++k) print_breakdown(os, labels[k], o.steps[k]);
    print_breakdown(os, "R(tau) ", o.baseline);
    print_breakdown(os, "gain   ", o.gain);
    const auto pct = o.percent_saved();
    os << "saved %  total " << fmt(pct.total) << "  inc " << fmt(pct.incoherent) << "  coh " << fmt(pct.coherent) << '\n';
    os << "N_m " << fmt(o.n_m) << "  N_mw " << fmt(o.n_mw) << "  Pi " << fmt(o.success) << '\n';
    os << "epsilon " << fmt(o.shifts.epsilon) << "  (dE_m " << fmt(o.shifts.delta_E_m) << ", dE_mw "
       << fmt(o.shifts.delta_E_mw) << ")\n";
    os << "W " << fmt(o.shifts.W) << "  (dR_m " << fmt(o.shifts.delta_R_m) << ", dR_mw " << fmt(o.shifts.delta_R_mw)
       << ")\n";
    if (o.concurrence_final)
        os << "concurrence final " << fmt(*o.concurrence_final) << "  baseline " << fmt(*o.concurrence_baseline) << '\n';
}

inline std::vector<double> linspace(double a, double b, int n) { return Range{a, b, n}.values(); }

inline std::string single_timeseries_csv(const std::vector<TimeseriesRow>& rows, const std::string& prefix_header = "",
                                         const std::string& prefix = "") {
    std::string s = prefix_header + "series,phase,t,P,Qsq,R_total,R_inc,R_coh\n";
    for (const auto& r : rows)
        s += prefix + r.series + "," + to_string(r.phase) + "," + fmt(r.t) + "," + fmt(r.P) + "," + fmt(r.Qsq) + "," +
             fmt(r.R.total) + "," + fmt(r.R.incoherent) + "," + fmt(r.R.coherent) + "\n";
    return s;
}

inline std::string multi_timeseries_csv(const std::vector<MultiTimeseriesRow>& rows,
                                        const std::string& prefix_header = "", const std::string& prefix = "") {
    std::string s = prefix_header + "series,phase,t,R_total,R_inc,R_coh,concurrence\n";
    for (const auto& r : rows)
        s += prefix + r.series + "," + to_string(r.phase) + "," + fmt(r.t) + "," + fmt(r.R.total) + "," +
             fmt(r.R.incoherent) + "," + fmt(r.R.coherent) + "," + fmt(r.concurrence.value_or(NAN)) + "\n";
    return s;
}

inline Point scalar_point(const SweepConfig& c) {
    if (!c.ranges.empty()) throw Error(ErrorKind::InvalidConfig, "this mode takes scalar parameters only");
    return Point(c.values.begin(), c.values.end());
}

inline int cmd_run_two(const SweepConfig& c, std::ostream& os);

inline int cmd_run(const SweepConfig& c, std::ostream& os) {
    if (c.system == "two") return cmd_run_two(c, os);
    const Point p = scalar_point(c);
    double w = 0.0;
    const auto o = run_single_point(p, c, w);
    os << "w " << fmt(w) << (p.count("w") ? "" : " (w~)") << '\n';
    print_outcome(os, o);
    if (!c.out.empty()) {
        const QubitState s0{param(p, "P0"), std::sqrt(q0sq_of(p, c))};
        const double tau = param(p, "tau");
        const auto rows = timeseries(s0, bath_of(p), ProtocolParams{{param(p, "m")}, {w}, tau},
                                     linspace(0.0, tau, c.t_points));
        write_output(c.out, single_timeseries_csv(rows));
    }
    return kOk;
}

inline std::vector<OperationalPoint> two_qubit_points(const Point& p, const SweepConfig& c) {
    const auto model = model_of(p);
    return find_operational_points_2q(model, x_state(param(p, "q")).rho, {param(p, "m1"), param(p, "m2")},
                                      param(p, "tau"), SearchOptions{c.resolution, c.tol, c.workers});
}

/// Two-cell run on rho_X(q). Without w1/w2 every operational point of the
/// (w1, w2) plane is run and reported.
inline int cmd_run_two(const SweepConfig& c, std::ostream& os) {
    const Point p = scalar_point(c);
    const auto model = model_of(p);
    const DensityMatrix rho0 = x_state(param(p, "q")).rho;
    const std::vector<double> m{param(p, "m1"), param(p, "m2")};
    const double tau = param(p, "tau");
    if (model.H.coupling_warning) os << "warning: coupling is not small compared with omega\n";

    std::vector<std::vector<double>> ws;
    if (p.count("w1") || p.count("w2")) {
        ws.push_back({param(p, "w1"), param(p, "w2")});
    } else {
        for (const auto& op : two_qubit_points(p, c)) ws.push_back(op.w);
        if (ws.empty()) {
            os << "no operational point\n";
            return kNoPoints;
        }
    }
    std::string series;
    for (const auto& w : ws) {
        os << "w1 " << fmt(w[0]) << "  w2 " << fmt(w[1]) << '\n';
        print_outcome(os, run_twm_multi(model, rho0, m, w, tau));
        os << '\n';
    }
    if (!c.out.empty()) {
        const auto rows = multi_timeseries(model, rho0, MultiProtocol{m, ws.front(), tau},
                                           linspace(0.0, tau, c.t_points));
        write_output(c.out, multi_timeseries_csv(rows));
    }
    return kOk;
}

inline int cmd_sweep(const SweepConfig& c) {
    if (c.ranges.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs at least one ranged parameter");
    const bool two = c.system == "two";
    const auto points = grid_points(c);
    const auto rows = parallel_map(points.size(), c.workers, [&](std::size_t i) {
        return two ? evaluate_two(points[i], c) : evaluate_single(points[i], c);
    });
    write_output(c.out, rows_csv(rows, two));
    return kOk;
}

inline int cmd_opfind(const SweepConfig& c, std::ostream& os) {
    std::string csv;
    std::size_t found = 0;
    if (c.system == "two") {
        const Point p = scalar_point(c);
        csv = "q,m1,m2,w1,w2,tau,f,gamma,omega,J,gain_total,probability,epsilon,Wshift\n";
        for (const auto& op : two_qubit_points(p, c)) {
            ++found;
            for (double v : {param(p, "q"), op.m[0], op.m[1], op.w[0], op.w[1], op.tau, param(p, "f"),
                             param(p, "gamma"), param(p, "omega"), param(p, "J"), op.gain, op.probability,
                             op.epsilon_residual})
                csv += fmt(v) + ",";
            csv += fmt(op.W_residual) + "\n";
        }
    } else {
        for (const auto& [k, r] : c.ranges)
            if (k != "P0" && k != "m" && k != "tau" && k != "f")
                throw Error(ErrorKind::InvalidConfig, "opfind can range over P0, m, tau and f only");
        if (c.values.count("w")) throw Error(ErrorKind::InvalidConfig, "opfind follows w~; do not set w");
        const Range P0 = c.range("P0") ? *c.range("P0") : Range{0.01, 0.99, 99};
        const Range m = c.range("m") ? *c.range("m") : Range{0.005, 1.0, 200};
        SweepConfig outer = c;
        std::erase_if(outer.ranges, [](const auto& kv) { return kv.first == "P0" || kv.first == "m"; });
        csv = "P0,Q0sq,m,w,tau,f,gamma,omega,gain_total,probability,epsilon,Wshift\n";
        for (const Point& p : grid_points(outer)) {
            OperationalConstraints oc;
            oc.bath = bath_of(p);
            oc.tau = param(p, "tau");
            oc.coherence = {c.coherence == "fraction" ? CoherenceSpec::Mode::FractionOfMax : CoherenceSpec::Mode::Absolute,
                            param(p, "Q0sq")};
            oc.tol = c.tol;
            oc.W_bound = c.W_bound;
            oc.workers = c.workers;
            for (const auto& op : find_operational_points({P0.values(), m.values()}, oc)) {
                ++found;
                for (double v : {op.P0, op.Q0sq, op.m[0], op.w[0], op.tau, oc.bath.f, oc.bath.gamma, oc.bath.omega,
                                 op.gain, op.probability, op.epsilon_residual})
                    csv += fmt(v) + ",";
                csv += fmt(op.W_residual) + "\n";
            }
        }
    }
    write_output(c.out, csv);
    os << found << " operational point(s)\n";
    return found ? kOk : kNoPoints;
}

// ---------------------------------------------------------------------------
// Figure recipes (defaults: f = 0.3, gamma = 1e-2, omega = 1,
// tau = 1/gamma, J = 2 omega gamma)

inline std::vector<std::string> figure_names() {
    return {"fig2", "fig3", "fig5", "fig7", "fig8", "fig10", "fig11", "fig12", "fig15", "fig17"};
}

namespace detail {

inline std::string protocol_series(double Q0sq, int t_points) {
    const BathParams bath;
    const double tau = bath.tau_gamma();
    const double w = null_energy_w_tilde(0.9, 0.4, bath, tau).value;
    const auto rows = timeseries(QubitState{0.9, std::sqrt(Q0sq)}, bath, ProtocolParams{{0.4}, {w}, tau},
                                 cli::linspace(0.0, 1.2 * tau, t_points));
    return cli::single_timeseries_csv(rows);
}

inline std::string gain_surfaces(const std::string& panel_key, const std::vector<double>& panels,
                                 const SweepConfig& base, unsigned workers) {
    std::string s = panel_key + "," + csv_header(false) + "\n";
    for (double v : panels) {
        SweepConfig c = base;
        c.values[panel_key] = v;
        const auto points = grid_points(c);
        const auto rows = parallel_map(points.size(), workers, [&](std::size_t i) { return evaluate_single(points[i], c); });
        for (const auto& r : rows) s += fmt(v) + "," + csv_line(r, false) + "\n";
    }
    return s;
}

/// Operational point of the two-cell figures: q = 0.1 takes the single
/// point, q = 0.9 the one with w1 > w2.
inline std::vector<double> figure_point(const CollectiveModel& model, double q, const std::vector<double>& m) {
    const auto pts = find_operational_points_2q(model, x_state(q).rho, m, model.bath.tau_gamma());
    for (const auto& p : pts)
        if (p.w[0] >= p.w[1] - 0.05) return p.w;
    if (pts.empty()) throw Error(ErrorKind::InvalidConfig, "figure operating point not found");
    return pts.front().w;
}

}  // namespace detail

inline std::string figure_csv(const std::string& name, const SweepConfig& c) {
    const BathParams bath;
    const double tau = bath.tau_gamma();
    const auto model = build_model(2, bath.omega, uniform_coupling(2, 2.0 * bath.omega * bath.gamma), bath);
    const std::vector<double> m01{0.5, 0.6};
    const std::vector<double> m09{0.5, 0.9};

    if (name == "fig3") return detail::protocol_series(0.0, 121);
    if (name == "fig7" || name == "fig10") return detail::protocol_series(0.0767, 121);
    if (name == "fig2") {
        // Incoherent gain along w~ over (P0, m) for tau in {tau/2, tau, 10 tau}.
        SweepConfig g;
        g.ranges = {{"P0", {0.0, 1.0, 101}}, {"m", {0.0, 1.0, 101}}};
        return detail::gain_surfaces("tau", {0.5 * tau, tau, 10.0 * tau}, g, c.workers);
    }
    if (name == "fig5") {
        // Coherent gain along w~ over (m, |Q0|^2 / Qmax^2) for three P0.
        SweepConfig g;
        g.coherence = "fraction";
        g.ranges = {{"Q0sq", {0.0, 1.0, 51}}, {"m", {0.0, 1.0, 101}}};
        return detail::gain_surfaces("P0", {0.4, 0.6, 0.9}, g, c.workers);
    }
    if (name == "fig8") {
        std::string s = "q,w1,w2,epsilon,Wshift\n";
        for (const auto& [q, m] : {std::pair{0.1, m01}, std::pair{0.9, m09}}) {
            const auto prep = prepare_multi(model, x_state(q).rho, m, tau);
            const auto w = linspace(0.0, 1.0, c.resolution);
            for (double w1 : w)
                for (double w2 : w) {
                    double eps = NAN, W = NAN;
                    try {
                        const auto r = quick_shifts(model, prep, {w1, w2});
                        eps = r.epsilon;
                        W = r.W;
                    } catch (const Error& e) {
                        if (e.kind() != ErrorKind::ZeroProbability) throw;
                    }
                    s += fmt(q) + "," + fmt(w1) + "," + fmt(w2) + "," + fmt(eps) + "," + fmt(W) + "\n";
                }
        }
        return s;
    }
    if (name == "fig11") {
        std::string s = "one_minus_q,q,ergotropy,concurrence\n";
        for (int k = 0; k <= 100; ++k) {
            const double q = 1.0 - k / 100.0;
            const auto x = x_state(q);
            s += fmt(1.0 - q) + "," + fmt(q) + "," + fmt(ergotropy(x.rho, model.H)) + "," + fmt(concurrence(x.rho)) + "\n";
        }
        return s;
    }
    if (name == "fig12") {
        std::string s;
        for (double q : {0.1, 0.9}) {
            const auto rows = multi_timeseries(model, x_state(q).rho, std::nullopt, linspace(0.0, tau, 101));
            const std::string part = multi_timeseries_csv(rows, "q,", fmt(q) + ",");
            s += s.empty() ? part : part.substr(part.find('\n') + 1);
        }
        return s;
    }
    if (name == "fig15") {
        std::string s = "P0,Q0sq,t,R_total,R_inc,R_coh\n";
        const std::vector<std::pair<double, double>> states{{1.0, 0.0}, {0.9, 0.0}, {0.9, 0.09}, {0.5, 0.25}, {0.2, 0.16}};
        for (const auto& [P0, q0sq] : states)
            for (double t : linspace(0.0, 3.0 * tau, 301)) {
                const auto R = qubit_ergotropy(evolve_free(QubitState{P0, std::sqrt(q0sq)}, bath, t), bath.omega);
                s += fmt(P0) + "," + fmt(q0sq) + "," + fmt(t) + "," + fmt(R.total) + "," + fmt(R.incoherent) + "," +
                     fmt(R.coherent) + "\n";
            }
        return s;
    }
    if (name == "fig17") {
        std::string s;
        for (const auto& [q, m] : {std::pair{0.1, m01}, std::pair{0.9, m09}}) {
            const auto w = detail::figure_point(model, q, m);
            const auto rows = multi_timeseries(model, x_state(q).rho, MultiProtocol{m, w, tau}, linspace(0.0, tau, 101));
            const std::string part =
                multi_timeseries_csv(rows, "q,m1,m2,w1,w2,", fmt(q) + "," + fmt(m[0]) + "," + fmt(m[1]) + "," +
                                                                 fmt(w[0]) + "," + fmt(w[1]) + ",");
            s += s.empty() ? part : part.substr(part.find('\n') + 1);
        }
        return s;
    }
    throw Error(ErrorKind::InvalidConfig, "unknown figure '" + name + "'");
}

inline int cmd_figure(const SweepConfig& c) {
    if (c.figure.empty()) throw Error(ErrorKind::InvalidConfig, "figure name is required");
    const std::string text = figure_csv(c.figure, c);
    write_output(c.out.empty() ? c.figure + ".csv" : c.out, text);
    return kOk;
}

/// Runs the configured mode and maps library errors to exit codes.
inline int dispatch(const SweepConfig& c, std::ostream& os, std::ostream& err) {
    try {
        validate(c);
        if (c.mode == "run") return cmd_run(c, os);
        if (c.mode == "twoqubit") return cmd_run_two(c, os);
        if (c.mode == "sweep") return cmd_sweep(c);
        if (c.mode == "opfind") return cmd_opfind(c, os);
        return cmd_figure(c);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::ZeroProbability: return kZeroProbability;
            case ErrorKind::StepFailure: return kFailure;
            default: return kConfigError;
        }
    }
}

}  // namespace twm::cli
