#pragma once

// Null-shift conditions of the protocol: the reversal strength w~ that
// cancels the net energy shift, equal-strength eta curves, the long-time
// limit of w~, and the search for operational points (epsilon = W = 0).

#include "twm/core.hpp"
#include "twm/outcome.hpp"
#include "twm/parallel.hpp"
#include "twm/protocol.hpp"
#include "twm/roots.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace twm {

/// Shift report recomputed from the recorded states with the general
/// (eigendecomposition) ergotropy.
inline ShiftReport energy_shift(const ProtocolOutcome& run, const HamiltonianSpec& h) {
    return compute_shifts(run.states, h);
}

inline ShiftReport ergotropy_shift(const ProtocolOutcome& run, const HamiltonianSpec& h) {
    return compute_shifts(run.states, h);
}

struct StrengthValue {
    double value = 0.0;
    bool physical = true;
};

/// Reversal strength giving epsilon = 0. Written with e^{-gamma tau} factored
/// out so long dissipation times stay finite. Nonphysical when the value
/// leaves [0, 1], when P0 <= f, or when a denominator vanishes.
inline StrengthValue null_energy_w_tilde(double P0, double m, const BathParams& bath, double tau) {
    if (m == 0.0 || P0 == 1.0) return {0.0, true};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (P0 <= bath.f) return {nan, false};
    const double f = bath.f;
    const double n_m = 1.0 - m * P0;
    const double decay = std::exp(-bath.gamma * tau);
    const double P_m_tau = ((1.0 - m) * P0 / n_m - f) * decay + f;
    const double num = n_m * ((1.0 - P0 - n_m * (1.0 - f)) * decay + n_m * (P_m_tau + P0 - 1.0 - f) + 1.0 - P0);
    const double den =
        (n_m * (P_m_tau + P0 - 1.0) + 1.0 - P0) * (n_m * (1.0 - f) * (1.0 - decay) + (1.0 - P0) * decay);
    if (den == 0.0) return {nan, false};
    const double w = num / den;
    return {w, std::isfinite(w) && w >= 0.0 && w <= 1.0};
}

struct EtaCurves {
    double eta1 = 0.0;
    double eta2 = 0.0;
    double eta3 = 0.0;
};

inline EtaCurves eta_curves(double P0, const BathParams& bath, double tau) {
    const double f = bath.f;
    const double decay = std::exp(-bath.gamma * tau);
    EtaCurves e;
    e.eta2 = (f - P0) / ((f - 1.0) * P0);
    e.eta3 = (f + P0 - 1.0 + (P0 - f) * decay) / (P0 * (f + P0 - 1.0 + (1.0 - f) * decay));
    return e;
}

inline double w_tilde_long_time(double P0, double m, double f) {
    if (f <= 0.0) throw Error(ErrorKind::ZeroTemperature, "long-time limit of w~ is degenerate at f = 0");
    const double n_m = 1.0 - m * P0;
    const double a = (1.0 - P0) * (1.0 - n_m);
    return a / ((1.0 - f) * (a + f * n_m));
}

// ---------------------------------------------------------------------------
// Operational points

struct OperationalPoint {
    std::vector<double> m;
    std::vector<double> w;
    double tau = 0.0;
    double P0 = 0.0;
    double Q0sq = 0.0;
    double gain = 0.0;
    double probability = 0.0;
    double epsilon_residual = 0.0;
    double W_residual = 0.0;
};

/// How the initial coherence is chosen for each P0 of a grid.
struct CoherenceSpec {
    enum class Mode { Absolute, FractionOfMax } mode = Mode::Absolute;
    double value = 0.0;

    double q0sq(double P0) const {
        return mode == Mode::Absolute ? value : value * P0 * (1.0 - P0);
    }
};

struct OperationalGrid {
    std::vector<double> P0;
    std::vector<double> m;
};

struct OperationalConstraints {
    BathParams bath;
    double tau = 100.0;
    CoherenceSpec coherence;
    double tol = kTolerance;
    /// Relaxed mode: accept |W| below this bound instead of tol.
    std::optional<double> W_bound;
    unsigned workers = 1;

    double W_tol() const { return W_bound.value_or(tol); }
};

namespace detail {

struct SingleEvaluation {
    bool valid = false;
    double w = 0.0;
    ShiftReport shifts;
    double gain = 0.0;
    double probability = 0.0;
};

inline SingleEvaluation evaluate_on_w_tilde(double P0, double q0sq, double m, const OperationalConstraints& c) {
    SingleEvaluation e;
    const auto wt = null_energy_w_tilde(P0, m, c.bath, c.tau);
    if (!wt.physical) return e;
    try {
        const QubitState s0{P0, std::sqrt(std::max(0.0, q0sq))};
        const QubitRun run = run_qubit_states(s0, c.bath, m, wt.value, c.tau);
        e.shifts = compute_shifts(run.states, c.bath.omega);
        e.gain = qubit_ergotropy(run.states.final_state, c.bath.omega).total -
                 qubit_ergotropy(run.baseline, c.bath.omega).total;
        e.probability = run.n_m * run.n_mw;
        e.w = wt.value;
        e.valid = true;
    } catch (const Error& err) {
        if (err.kind() != ErrorKind::ZeroProbability) throw;
    }
    return e;
}

inline OperationalPoint to_point(double P0, double q0sq, double m, const SingleEvaluation& e,
                                 const OperationalConstraints& c) {
    return OperationalPoint{{m}, {e.w}, c.tau, P0, q0sq, e.gain, e.probability, std::abs(e.shifts.epsilon),
                            std::abs(e.shifts.W)};
}

}  // namespace detail

/// Scans W(m) along w = w~(m) for every P0 of the grid. Grid nodes that
/// already satisfy both constraints are reported; sign changes of W between
/// neighbouring physical nodes are refined by bisection in m. Rows are
/// independent and run on `workers` threads; output follows grid order.
/// An empty result means no operational point exists on the grid.
inline std::vector<OperationalPoint> find_operational_points(const OperationalGrid& grid,
                                                             const OperationalConstraints& c) {
    const auto row = [&](std::size_t i) {
        std::vector<OperationalPoint> pts;
        const double P0 = grid.P0[i];
        const double q0sq = c.coherence.q0sq(P0);
        std::vector<detail::SingleEvaluation> nodes;
        nodes.reserve(grid.m.size());
        for (double m : grid.m) nodes.push_back(detail::evaluate_on_w_tilde(P0, q0sq, m, c));

        const auto accepted = [&](const detail::SingleEvaluation& e) {
            return e.valid && std::abs(e.shifts.epsilon) < c.tol && std::abs(e.shifts.W) < c.W_tol();
        };
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (accepted(nodes[k])) pts.push_back(detail::to_point(P0, q0sq, grid.m[k], nodes[k], c));
            if (k + 1 == nodes.size()) break;
            const auto& a = nodes[k];
            const auto& b = nodes[k + 1];
            if (!a.valid || !b.valid || accepted(a) || accepted(b)) continue;
            if (!(a.shifts.W * b.shifts.W < 0.0)) continue;
            const auto residual = [&](double m) {
                const auto e = detail::evaluate_on_w_tilde(P0, q0sq, m, c);
                return e.valid ? e.shifts.W : std::numeric_limits<double>::quiet_NaN();
            };
            const auto root = bisect(residual, grid.m[k], grid.m[k + 1], 1e-14, 1e-13);
            if (!root) continue;
            const auto e = detail::evaluate_on_w_tilde(P0, q0sq, *root, c);
            if (accepted(e)) pts.push_back(detail::to_point(P0, q0sq, *root, e, c));
        }
        return pts;
    };

    const auto rows = parallel_map(grid.P0.size(), c.workers, row);
    std::vector<OperationalPoint> out;
    for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

}  // namespace twm
