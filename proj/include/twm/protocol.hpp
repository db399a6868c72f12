#pragma once

// Single-qubit two-time weak measurement protocol:
//   (i) charged rho_0, (ii) weak measurement M_m, (iii) dissipation for tau,
//   (iv) reversal W_w; compared against rho(tau) without measurements.

#include "twm/core.hpp"
#include "twm/ergotropy.hpp"
#include "twm/measurement.hpp"
#include "twm/outcome.hpp"
#include "twm/single_dynamics.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace twm {

/// Runs the protocol on qubit states and returns them alongside the
/// probabilities; no ergotropy bookkeeping.
struct QubitRun {
    StepStates<QubitState> states;
    QubitState baseline;
    double n_m = 1.0;
    double n_mw = 1.0;
};

inline QubitRun run_qubit_states(const QubitState& s0, const BathParams& bath, double m, double w, double tau) {
    if (!(tau >= 0.0)) throw Error(ErrorKind::NegativeTime, "dissipation time must be non-negative");
    QubitRun run;
    run.states.initial = s0;
    const auto weak = weak_measure(s0, m);
    run.n_m = weak.probability;
    run.states.after_weak = weak.state;
    run.states.before_reversal = evolve_free(weak.state, bath, tau);
    const auto rev = reversal_measure(run.states.before_reversal, w);
    run.n_mw = rev.probability;
    run.states.final_state = rev.state;
    run.baseline = evolve_free(s0, bath, tau);
    return run;
}

inline ProtocolOutcome run_twm_single(const QubitState& s0, const BathParams& bath, const ProtocolParams& params) {
    params.validate();
    if (params.m.size() != 1) throw Error(ErrorKind::DimensionMismatch, "single-qubit run needs scalar strengths");
    const QubitRun run = run_qubit_states(s0, bath, params.m[0], params.w[0], params.tau);
    const double omega = bath.omega;

    ProtocolOutcome out;
    out.states = {to_density(run.states.initial), to_density(run.states.after_weak),
                  to_density(run.states.before_reversal), to_density(run.states.final_state)};
    out.baseline_state = to_density(run.baseline);
    out.n_m = run.n_m;
    out.n_mw = run.n_mw;
    out.success = run.n_m * run.n_mw;
    out.steps = {qubit_ergotropy(run.states.initial, omega), qubit_ergotropy(run.states.after_weak, omega),
                 qubit_ergotropy(run.states.before_reversal, omega), qubit_ergotropy(run.states.final_state, omega)};
    out.baseline = qubit_ergotropy(run.baseline, omega);
    out.gain = out.steps[3] - out.baseline;
    out.shifts = compute_shifts(run.states, omega);
    return out;
}

/// Stepwise coherent ergotropy written in the protocol parameters.
struct CoherentSteps {
    double initial = 0.0;
    double after_weak = 0.0;
    double after_reversal = 0.0;
    std::function<double(double)> during;
};

inline CoherentSteps coherent_steps(const QubitState& s0, const BathParams& bath, const ProtocolParams& params) {
    params.validate();
    const double omega = bath.omega;
    const double P0 = s0.P;
    const double q0sq = s0.coherence_sq();
    const double m = params.m.at(0);
    const double w = params.w.at(0);
    const double n_m = 1.0 - m * P0;

    CoherentSteps c;
    const double d0 = 1.0 - 2.0 * P0;
    c.initial = 0.5 * omega * (-std::abs(d0) + std::sqrt(d0 * d0 + 4.0 * q0sq));

    const double a = 2.0 - 2.0 * P0 - n_m;
    const double rad_ii = P0 > 0.0 ? a * a - 4.0 * q0sq * (1.0 - P0 - n_m) / P0 : a * a;
    c.after_weak = omega * (-std::abs(a) + std::sqrt(std::max(0.0, rad_ii))) / (2.0 * n_m);

    const double P_m0 = P0 * (1.0 - m) / n_m;
    const double qm0sq = (1.0 - m) * q0sq / (n_m * n_m);
    c.during = [=](double t) {
        const double P_m = (P_m0 - bath.f) * std::exp(-bath.gamma * t) + bath.f;
        const double qsq = qm0sq * std::exp(-bath.gamma * t);
        const double d = 1.0 - 2.0 * P_m;
        return 0.5 * omega * (-std::abs(d) + std::sqrt(d * d + 4.0 * qsq));
    };

    const double tau = params.tau;
    const double P_m_tau = (P_m0 - bath.f) * std::exp(-bath.gamma * tau) + bath.f;
    const double qm_tau_sq = qm0sq * std::exp(-bath.gamma * tau);
    const double n_mw = 1.0 - w * (1.0 - P_m_tau);
    const double b = n_mw - 2.0 * P_m_tau;
    const double rad_iv = P_m_tau != 1.0 ? b * b + 4.0 * qm_tau_sq * (P_m_tau - n_mw) / (P_m_tau - 1.0) : b * b;
    c.after_reversal = omega * (-std::abs(b) + std::sqrt(std::max(0.0, rad_iv))) / (2.0 * n_mw);
    return c;
}

// ---------------------------------------------------------------------------
// Time series

enum class Phase { Continuous, PreMeasurement, PostMeasurement };

inline const char* to_string(Phase p) {
    switch (p) {
        case Phase::Continuous: return "";
        case Phase::PreMeasurement: return "pre";
        case Phase::PostMeasurement: return "post";
    }
    return "";
}

struct TimeseriesRow {
    std::string series;  // "protocol" or "baseline"
    Phase phase = Phase::Continuous;
    double t = 0.0;
    double P = 0.0;
    double Qsq = 0.0;
    ErgotropyBreakdown R;
};

/// Protocol and baseline trajectories on a sorted non-negative grid. The
/// measurement jumps at t = 0 and t = tau appear as pre/post row pairs at the
/// same t whenever the grid spans that instant. Past tau the protocol series
/// keeps dissipating from the post-reversal state.
inline std::vector<TimeseriesRow> timeseries(const QubitState& s0, const BathParams& bath,
                                             const std::optional<ProtocolParams>& params,
                                             const std::vector<double>& t_grid) {
    std::vector<TimeseriesRow> rows;
    if (t_grid.empty()) return rows;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] < 0.0) throw Error(ErrorKind::NegativeTime, "time grid must be non-negative");
        if (i > 0 && t_grid[i] < t_grid[i - 1]) throw Error(ErrorKind::OutOfRange, "time grid must be sorted");
    }
    const double omega = bath.omega;
    const auto row = [&](const char* series, Phase phase, double t, const QubitState& s) {
        rows.push_back({series, phase, t, s.P, s.coherence_sq(), qubit_ergotropy(s, omega)});
    };

    for (double t : t_grid) row("baseline", Phase::Continuous, t, evolve_free(s0, bath, t));
    if (!params) return rows;

    params->validate();
    const double tau = params->tau;
    const QubitRun run = run_qubit_states(s0, bath, params->m.at(0), params->w.at(0), tau);
    const double t_lo = t_grid.front();
    const double t_hi = t_grid.back();
    bool weak_done = false;
    bool reversal_done = false;
    const auto emit_jumps_before = [&](double t) {
        if (!weak_done && t_lo <= 0.0 && 0.0 <= t) {
            row("protocol", Phase::PreMeasurement, 0.0, run.states.initial);
            row("protocol", Phase::PostMeasurement, 0.0, run.states.after_weak);
            weak_done = true;
        }
        if (!reversal_done && t_lo <= tau && tau <= t) {
            row("protocol", Phase::PreMeasurement, tau, run.states.before_reversal);
            row("protocol", Phase::PostMeasurement, tau, run.states.final_state);
            reversal_done = true;
        }
    };
    for (double t : t_grid) {
        emit_jumps_before(t);
        if (t == 0.0 || t == tau) continue;
        const QubitState s = t < tau ? evolve_free(run.states.after_weak, bath, t)
                                     : evolve_free(run.states.final_state, bath, t - tau);
        row("protocol", Phase::Continuous, t, s);
    }
    emit_jumps_before(t_hi);
    return rows;
}

}  // namespace twm
