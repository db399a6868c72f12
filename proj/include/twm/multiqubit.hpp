#pragma once

// N-cell battery under collective dissipation, the two-qubit X-state family,
// Wootters concurrence and the multi-cell protocol with its 2-D search for
// operational reversal strengths.

#include "twm/core.hpp"
#include "twm/ergotropy.hpp"
#include "twm/measurement.hpp"
#include "twm/outcome.hpp"
#include "twm/parallel.hpp"
#include "twm/roots.hpp"
#include "twm/shifts.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace twm {

inline constexpr int kMaxCells = 6;

struct CollectiveModel {
    int n_cells = 1;
    HamiltonianSpec H;
    BathParams bath;
    Matrix S_lower;  // sum_k |g><e|_k
    Matrix S_raise;
    Matrix raise_lower;  // S_raise S_lower
    Matrix lower_raise;  // S_lower S_raise

    Eigen::Index dim() const { return H.dim(); }
};

inline CollectiveModel build_model(int n, double omega, const RealMatrix& J, const BathParams& bath,
                                   int max_cells = kMaxCells) {
    if (n > max_cells) throw Error(ErrorKind::TooLarge, "number of cells exceeds the configured cap");
    CollectiveModel model;
    model.n_cells = n;
    model.H = make_hamiltonian(n, omega, J);
    model.bath = bath;
    model.bath.omega = omega;
    const Eigen::Index d = model.H.dim();
    model.S_lower = Matrix::Zero(d, d);
    for (int k = 0; k < n; ++k) model.S_lower += detail::embed(detail::lowering(), k, n);
    model.S_raise = model.S_lower.adjoint();
    model.raise_lower = model.S_raise * model.S_lower;
    model.lower_raise = model.S_lower * model.S_raise;
    return model;
}

/// Uniform nearest-neighbour-free coupling J on every pair of cells.
inline RealMatrix uniform_coupling(int n, double J) {
    RealMatrix c = RealMatrix::Constant(n, n, J);
    c.diagonal().setZero();
    return c;
}

/// -i[H, rho] + gamma(1-f) D[S_lower] rho + gamma f D[S_raise] rho.
inline Matrix lindblad_rhs(const CollectiveModel& model, const Matrix& rho) {
    if (rho.rows() != model.dim() || rho.cols() != model.dim())
        throw Error(ErrorKind::DimensionMismatch, "state and model dimensions differ");
    const cplx i(0.0, 1.0);
    const double down = model.bath.gamma * (1.0 - model.bath.f);
    const double up = model.bath.gamma * model.bath.f;
    const Matrix& L = model.S_lower;
    const Matrix& Ld = model.S_raise;
    Matrix out = -i * (model.H.H * rho - rho * model.H.H);
    out += down * (L * rho * Ld - 0.5 * (model.raise_lower * rho + rho * model.raise_lower));
    out += up * (Ld * rho * L - 0.5 * (model.lower_raise * rho + rho * model.lower_raise));
    return out;
}

struct IntegratorOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    std::size_t max_steps = 1'000'000;
};

namespace detail {

using OdeState = std::vector<cplx>;

inline void symmetrize(OdeState& x, Eigen::Index d) {
    Eigen::Map<Matrix> m(x.data(), d, d);
    const Matrix h = 0.5 * (m + m.adjoint());
    m = h;
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of the master equation up to
/// time t. The state is made exactly Hermitian after every accepted step.
inline DensityMatrix integrate(const CollectiveModel& model, const DensityMatrix& rho0, double t,
                               const IntegratorOptions& opt = {}) {
    namespace ode = boost::numeric::odeint;
    if (!(t >= 0.0)) throw Error(ErrorKind::NegativeTime, "integration time must be non-negative");
    const Eigen::Index d = model.dim();
    if (rho0.dim() != d) throw Error(ErrorKind::DimensionMismatch, "state and model dimensions differ");
    if (t == 0.0) return rho0;

    detail::OdeState x(rho0.matrix().data(), rho0.matrix().data() + d * d);
    detail::symmetrize(x, d);
    const auto system = [&](const detail::OdeState& in, detail::OdeState& out, double) {
        const Eigen::Map<const Matrix> rho(in.data(), d, d);
        Eigen::Map<Matrix>(out.data(), d, d) = lindblad_rhs(model, rho);
    };

    using Stepper = ode::runge_kutta_dopri5<detail::OdeState>;
    auto stepper = ode::make_controlled(opt.abs_tol, opt.rel_tol, Stepper());

    const double rate = model.bath.gamma + model.H.energies.cwiseAbs().maxCoeff();
    double dt = std::min(t, 0.1 / std::max(rate, 1e-12));
    double now = 0.0;
    const double min_dt = 1e-14 * std::max(1.0, t);
    std::size_t steps = 0;
    while (now < t) {
        if (++steps > opt.max_steps) throw Error(ErrorKind::StepFailure, "integrator exceeded the step budget");
        const bool last = dt >= t - now;
        double step = last ? t - now : dt;
        const double before = now;
        const auto res = stepper.try_step(system, x, now, step);
        if (res == ode::fail) {
            dt = step;
            if (dt < min_dt) throw Error(ErrorKind::StepFailure, "step size underflow");
            continue;
        }
        if (last) now = t;
        dt = std::max(step, now - before);
        detail::symmetrize(x, d);
        stepper.reset();
    }
    return DensityMatrix(Eigen::Map<const Matrix>(x.data(), d, d));
}

// ---------------------------------------------------------------------------
// X-states and concurrence

struct XState {
    double q = 0.0;
    DensityMatrix rho;
};

namespace detail {

inline Matrix x_state_entries(double q) {
    Matrix r = Matrix::Zero(4, 4);
    r(0, 0) = r(3, 3) = q / 2.0;
    r(0, 3) = r(3, 0) = q * q - q / 2.0;
    r(1, 1) = q * (1.0 - q);
    r(2, 2) = (1.0 - q) * (1.0 - q);
    return r;
}

/// U = V2 V1 applied to (q|g><g| + (1-q)|e><e|) on both cells.
inline Matrix x_state_from_unitary(double q) {
    Matrix V1 = Matrix::Zero(4, 4);
    V1(0, 0) = V1(1, 1) = 1.0;
    V1(3, 2) = V1(2, 3) = 1.0;  // |ee><eg| + |eg><ee|
    const double s = 1.0 / std::sqrt(2.0);
    Matrix V2 = Matrix::Zero(4, 4);
    V2(0, 0) = s;  // |phi+><gg|
    V2(3, 0) = s;
    V2(1, 1) = V2(2, 2) = 1.0;
    V2(0, 3) = s;  // |phi-><ee|
    V2(3, 3) = -s;
    Matrix cell = Matrix::Zero(2, 2);
    cell(0, 0) = q;
    cell(1, 1) = 1.0 - q;
    const Matrix U = V2 * V1;
    return U * kron(cell, cell) * U.adjoint();
}

}  // namespace detail

inline XState x_state(double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::OutOfRange, "q must lie in [0, 1]");
    const Matrix direct = detail::x_state_entries(q);
    const Matrix rotated = detail::x_state_from_unitary(q);
    if ((direct - rotated).cwiseAbs().maxCoeff() > 1e-12)
        throw Error(ErrorKind::InvalidConfig, "X-state constructions disagree");
    return {q, DensityMatrix(direct)};
}

/// Closed form for the X-state family: max(0, 2q^2 - q - 2(1-q) sqrt(q(1-q))).
inline double x_state_concurrence(double q) {
    return std::max(0.0, 2.0 * q * q - q - 2.0 * (1.0 - q) * std::sqrt(q * (1.0 - q)));
}

/// Wootters concurrence from the eigenvalues of sqrt(rho) rho~ sqrt(rho),
/// rho~ = (sy x sy) rho* (sy x sy).
inline double concurrence(const DensityMatrix& rho) {
    if (rho.dim() != 4) throw Error(ErrorKind::DimensionMismatch, "concurrence needs a two-qubit state");
    const Matrix herm = 0.5 * (rho.matrix() + rho.matrix().adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
    const RealVector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix sqrt_rho = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().adjoint();

    Matrix sy = Matrix::Zero(2, 2);
    sy(0, 1) = cplx(0.0, -1.0);
    sy(1, 0) = cplx(0.0, 1.0);
    const Matrix yy = detail::kron(sy, sy);
    const Matrix flipped = yy * herm.conjugate() * yy;
    const Matrix M = sqrt_rho * flipped * sqrt_rho;
    Eigen::SelfAdjointEigenSolver<Matrix> ms(0.5 * (M + M.adjoint()), Eigen::EigenvaluesOnly);
    const RealVector lam = ms.eigenvalues().cwiseMax(0.0).cwiseSqrt();  // ascending
    return std::max(0.0, lam(3) - lam(2) - lam(1) - lam(0));
}

// ---------------------------------------------------------------------------
// Multi-cell protocol

/// States that do not depend on the reversal strengths.
struct PreparedRun {
    std::vector<double> m;
    double tau = 0.0;
    DensityMatrix initial;
    DensityMatrix after_weak;
    DensityMatrix before_reversal;
    DensityMatrix baseline;
    double n_m = 1.0;
    double E_initial = 0.0, E_after_weak = 0.0, E_before_reversal = 0.0;
    double R_initial = 0.0, R_after_weak = 0.0, R_before_reversal = 0.0;
};

inline void check_strengths(const CollectiveModel& model, const std::vector<double>& s, const char* name) {
    if (s.size() != static_cast<std::size_t>(model.n_cells))
        throw Error(ErrorKind::DimensionMismatch, std::string(name) + " strengths must match the number of cells");
    for (double v : s) check_strength(v, name);
}

inline PreparedRun prepare_multi(const CollectiveModel& model, const DensityMatrix& rho0, const std::vector<double>& m,
                                 double tau, const IntegratorOptions& opt = {}) {
    check_strengths(model, m, "weak");
    if (!(tau >= 0.0)) throw Error(ErrorKind::NegativeTime, "dissipation time must be non-negative");
    PreparedRun p;
    p.m = m;
    p.tau = tau;
    p.initial = rho0;
    const auto weak = local_measurement(rho0, m, MeasurementKind::Weak);
    p.after_weak = weak.state;
    p.n_m = weak.probability;
    p.before_reversal = integrate(model, p.after_weak, tau, opt);
    p.baseline = integrate(model, rho0, tau, opt);
    p.E_initial = energy(p.initial, model.H);
    p.E_after_weak = energy(p.after_weak, model.H);
    p.E_before_reversal = energy(p.before_reversal, model.H);
    p.R_initial = ergotropy(p.initial, model.H);
    p.R_after_weak = ergotropy(p.after_weak, model.H);
    p.R_before_reversal = ergotropy(p.before_reversal, model.H);
    return p;
}

/// epsilon and W for reversal strengths w; only the reversal is recomputed.
inline ShiftReport quick_shifts(const CollectiveModel& model, const PreparedRun& p, const std::vector<double>& w) {
    const auto rev = local_measurement(p.before_reversal, w, MeasurementKind::Reversal);
    ShiftReport r;
    r.delta_E_m = p.E_after_weak - p.E_initial;
    r.delta_E_mw = energy(rev.state, model.H) - p.E_before_reversal;
    r.epsilon = r.delta_E_m + r.delta_E_mw;
    r.delta_R_m = p.R_after_weak - p.R_initial;
    r.delta_R_mw = ergotropy(rev.state, model.H) - p.R_before_reversal;
    r.W = r.delta_R_m + r.delta_R_mw;
    r.epsilon_passive = r.epsilon - r.W;
    return r;
}

inline ProtocolOutcome finish_multi(const CollectiveModel& model, const PreparedRun& p, const std::vector<double>& w) {
    check_strengths(model, w, "reversal");
    const auto rev = local_measurement(p.before_reversal, w, MeasurementKind::Reversal);
    ProtocolOutcome out;
    out.states = {p.initial, p.after_weak, p.before_reversal, rev.state};
    out.baseline_state = p.baseline;
    out.n_m = p.n_m;
    out.n_mw = rev.probability;
    out.success = out.n_m * out.n_mw;
    out.steps = {ergotropy_breakdown(p.initial, model.H), ergotropy_breakdown(p.after_weak, model.H),
                 ergotropy_breakdown(p.before_reversal, model.H), ergotropy_breakdown(rev.state, model.H)};
    out.baseline = ergotropy_breakdown(p.baseline, model.H);
    out.gain = out.steps[3] - out.baseline;
    out.shifts = compute_shifts(out.states, model.H);
    if (model.n_cells == 2) {
        out.concurrence_final = concurrence(rev.state);
        out.concurrence_baseline = concurrence(p.baseline);
    }
    return out;
}

inline ProtocolOutcome run_twm_multi(const CollectiveModel& model, const DensityMatrix& rho0,
                                     const std::vector<double>& m, const std::vector<double>& w, double tau,
                                     const IntegratorOptions& opt = {}) {
    check_strengths(model, w, "reversal");
    return finish_multi(model, prepare_multi(model, rho0, m, tau, opt), w);
}

// ---------------------------------------------------------------------------
// Two-cell operational-point search over (w1, w2)

struct SearchOptions {
    int resolution = 64;
    double tol = kTolerance;
    unsigned workers = 1;
};

namespace detail {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

inline bool in_unit_square(Vec2 p) { return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0; }

/// Largest s >= 0 with p + s*dir still inside [0,1]^2, capped at cap.
inline double reach(Vec2 p, Vec2 dir, double cap) {
    double s = cap;
    const auto limit = [&](double pos, double d) {
        if (d > 0.0) s = std::min(s, (1.0 - pos) / d);
        if (d < 0.0) s = std::min(s, -pos / d);
    };
    limit(p.x, dir.x);
    limit(p.y, dir.y);
    return std::max(0.0, s);
}

}  // namespace detail

/// Traces epsilon = 0 through sign changes on a resolution x resolution grid
/// over [0,1]^2, then bisects W along each contour piece. Bisection steps
/// move along the contour by re-solving epsilon = 0 on the perpendicular
/// through the midpoint of the current bracket. Points are deduplicated and
/// returned sorted by (w1, w2). Empty means no operational point.
inline std::vector<OperationalPoint> find_operational_points_2q(const CollectiveModel& model, const DensityMatrix& rho0,
                                                                const std::vector<double>& m, double tau,
                                                                const SearchOptions& opt = {}) {
    using detail::Vec2;
    if (model.n_cells != 2) throw Error(ErrorKind::DimensionMismatch, "two-cell search needs a two-cell model");
    if (opt.resolution < 32) throw Error(ErrorKind::InvalidConfig, "grid resolution must be at least 32");
    const PreparedRun prep = prepare_multi(model, rho0, m, tau);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    struct Shift {
        double eps, W;
    };
    const auto shifts_at = [&](Vec2 p) -> Shift {
        try {
            const auto r = quick_shifts(model, prep, {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)});
            return {r.epsilon, r.W};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ZeroProbability) throw;
            return {nan, nan};
        }
    };
    const auto eps_at = [&](Vec2 p) { return shifts_at(p).eps; };

    const int N = opt.resolution;
    const double h = 1.0 / (N - 1);
    const auto node = [&](int i, int j) { return Vec2{i * h, j * h}; };
    const auto rows = parallel_map(static_cast<std::size_t>(N), opt.workers, [&](std::size_t i) {
        std::vector<Shift> row(static_cast<std::size_t>(N));
        for (int j = 0; j < N; ++j) row[static_cast<std::size_t>(j)] = shifts_at(node(static_cast<int>(i), j));
        return row;
    });
    const auto grid = [&](int i, int j) { return rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; };

    std::vector<OperationalPoint> found;
    const auto accept = [&](Vec2 p) {
        if (!detail::in_unit_square(p)) return;
        const Shift s = shifts_at(p);
        if (!(std::abs(s.eps) < opt.tol && std::abs(s.W) < opt.tol)) return;
        const auto run = finish_multi(model, prep, {p.x, p.y});
        found.push_back(OperationalPoint{m, {p.x, p.y}, tau, nan, nan, run.gain.total, run.success,
                                         std::abs(run.shifts.epsilon), std::abs(run.shifts.W)});
    };

    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) accept(node(i, j));

    // epsilon = 0 crossing on the edge a-b, if the endpoints differ in sign.
    const auto crossing = [&](Vec2 a, double ea, Vec2 b, double eb) -> std::optional<Vec2> {
        if (!(ea * eb < 0.0)) return std::nullopt;
        const auto s = bisect([&](double t) { return eps_at(a + t * (b - a)); }, 0.0, 1.0, 1e-15);
        if (!s) return std::nullopt;
        return a + *s * (b - a);
    };

    // Perpendicular projection back onto epsilon = 0 through c.
    const auto project = [&](Vec2 c, Vec2 dir, double span) -> std::optional<Vec2> {
        const Vec2 n{-dir.y, dir.x};
        const double hi = detail::reach(c, n, span);
        const double lo = detail::reach(c, -1.0 * n, span);
        const auto s = bisect([&](double t) { return eps_at(c + t * n); }, -lo, hi, 1e-15);
        if (!s) return std::nullopt;
        return c + *s * n;
    };

    const auto refine = [&](Vec2 p, double Wp, Vec2 q) {
        for (int it = 0; it < 200; ++it) {
            const Vec2 d = q - p;
            const double len = detail::norm(d);
            const Vec2 c = 0.5 * (p + q);
            if (len < 1e-13) return accept(c);
            const auto r = project(c, (1.0 / len) * d, std::max(len, 2.0 * h));
            if (!r) return;
            const double Wr = shifts_at(*r).W;
            if (!std::isfinite(Wr)) return;
            if (std::abs(Wr) < 1e-3 * opt.tol) return accept(*r);
            if (std::signbit(Wr) == std::signbit(Wp)) {
                p = *r;
                Wp = Wr;
            } else {
                q = *r;
            }
        }
        accept(0.5 * (p + q));
    };

    for (int i = 0; i + 1 < N; ++i) {
        for (int j = 0; j + 1 < N; ++j) {
            const std::array<std::pair<int, int>, 4> corner{{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
            std::vector<Vec2> cross;
            for (int k = 0; k < 4; ++k) {
                const auto [ai, aj] = corner[static_cast<std::size_t>(k)];
                const auto [bi, bj] = corner[static_cast<std::size_t>((k + 1) % 4)];
                if (auto c = crossing(node(ai, aj), grid(ai, aj).eps, node(bi, bj), grid(bi, bj).eps))
                    cross.push_back(*c);
            }
            std::vector<std::pair<std::size_t, std::size_t>> pairs;
            if (cross.size() == 2) pairs = {{0, 1}};
            if (cross.size() == 4) pairs = {{0, 1}, {2, 3}, {0, 3}, {1, 2}};
            for (const auto& [a, b] : pairs) {
                const double Wa = shifts_at(cross[a]).W;
                const double Wb = shifts_at(cross[b]).W;
                if (std::abs(cross[a].x - cross[b].x) + std::abs(cross[a].y - cross[b].y) == 0.0) continue;
                if (std::abs(Wa) < opt.tol) accept(cross[a]);
                if (std::abs(Wb) < opt.tol) accept(cross[b]);
                if (Wa * Wb < 0.0) refine(cross[a], Wa, cross[b]);
            }
        }
    }

    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.w < b.w; });
    std::vector<OperationalPoint> unique;
    for (const auto& p : found) {
        const bool dup = std::any_of(unique.begin(), unique.end(), [&](const auto& u) {
            return std::abs(u.w[0] - p.w[0]) < 1e-6 && std::abs(u.w[1] - p.w[1]) < 1e-6;
        });
        if (!dup) unique.push_back(p);
    }
    return unique;
}

// ---------------------------------------------------------------------------
// Time series

struct MultiTimeseriesRow {
    std::string series;
    Phase phase = Phase::Continuous;
    double t = 0.0;
    ErgotropyBreakdown R;
    std::optional<double> concurrence;
};

struct MultiProtocol {
    std::vector<double> m;
    std::vector<double> w;
    double tau = 0.0;
};

/// Baseline and protocol trajectories on a sorted non-negative grid, with
/// pre/post rows at the measurement instants (same convention as the
/// single-qubit series).
inline std::vector<MultiTimeseriesRow> multi_timeseries(const CollectiveModel& model, const DensityMatrix& rho0,
                                                        const std::optional<MultiProtocol>& protocol,
                                                        const std::vector<double>& t_grid,
                                                        const IntegratorOptions& opt = {}) {
    std::vector<MultiTimeseriesRow> rows;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] < 0.0) throw Error(ErrorKind::NegativeTime, "time grid must be non-negative");
        if (i > 0 && t_grid[i] < t_grid[i - 1]) throw Error(ErrorKind::OutOfRange, "time grid must be sorted");
    }
    const auto row = [&](const char* series, Phase phase, double t, const DensityMatrix& rho) {
        std::optional<double> c;
        if (model.n_cells == 2) c = concurrence(rho);
        rows.push_back({series, phase, t, ergotropy_breakdown(rho, model.H), c});
    };

    DensityMatrix rho = rho0;
    double now = 0.0;
    for (double t : t_grid) {
        rho = integrate(model, rho, t - now, opt);
        now = t;
        row("baseline", Phase::Continuous, t, rho);
    }
    if (!protocol) return rows;

    check_strengths(model, protocol->m, "weak");
    check_strengths(model, protocol->w, "reversal");
    const double tau = protocol->tau;
    rho = rho0;
    now = 0.0;
    bool weak_done = false;
    bool reversal_done = false;
    const auto advance = [&](double t) {
        rho = integrate(model, rho, t - now, opt);
        now = t;
    };
    const auto jumps_up_to = [&](double t) {
        if (!weak_done && t >= 0.0) {
            if (!t_grid.empty() && t_grid.front() <= 0.0) row("protocol", Phase::PreMeasurement, 0.0, rho);
            rho = local_measurement(rho, protocol->m, MeasurementKind::Weak).state;
            if (!t_grid.empty() && t_grid.front() <= 0.0) row("protocol", Phase::PostMeasurement, 0.0, rho);
            weak_done = true;
        }
        if (!reversal_done && t >= tau) {
            advance(tau);
            const bool shown = !t_grid.empty() && t_grid.front() <= tau;
            if (shown) row("protocol", Phase::PreMeasurement, tau, rho);
            rho = local_measurement(rho, protocol->w, MeasurementKind::Reversal).state;
            if (shown) row("protocol", Phase::PostMeasurement, tau, rho);
            reversal_done = true;
        }
    };
    for (double t : t_grid) {
        jumps_up_to(t);
        if (t == 0.0 || t == tau) continue;
        advance(t);
        row("protocol", Phase::Continuous, t, rho);
    }
    return rows;
}

}  // namespace twm
