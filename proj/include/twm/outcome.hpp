#pragma once

// Result records for a protocol run and the measurement-induced energy and
// ergotropy shifts computed from its four recorded states.

#include "twm/core.hpp"
#include "twm/ergotropy.hpp"

#include <array>
#include <optional>

namespace twm {

/// epsilon = dE_m + dE_mw, W = dR_m + dR_mw. The identity
/// W = epsilon - epsilon_passive holds by construction of ergotropy; it is
/// kept as a separately computed field so callers can check it.
struct ShiftReport {
    double delta_E_m = 0.0;
    double delta_E_mw = 0.0;
    double epsilon = 0.0;
    double delta_R_m = 0.0;
    double delta_R_mw = 0.0;
    double W = 0.0;
    double epsilon_passive = 0.0;
};

/// The four states of one run in protocol order.
template <class State>
struct StepStates {
    State initial;          // rho_0
    State after_weak;       // rho_m(0)
    State before_reversal;  // rho_m(tau)
    State final_state;      // rho_mw(tau)
};

inline ShiftReport compute_shifts(const StepStates<QubitState>& s, double omega) {
    ShiftReport r;
    r.delta_E_m = omega * (s.after_weak.P - s.initial.P);
    r.delta_E_mw = omega * (s.final_state.P - s.before_reversal.P);
    r.epsilon = r.delta_E_m + r.delta_E_mw;
    const auto R = [omega](const QubitState& q) { return qubit_ergotropy(q, omega).total; };
    r.delta_R_m = R(s.after_weak) - R(s.initial);
    r.delta_R_mw = R(s.final_state) - R(s.before_reversal);
    r.W = r.delta_R_m + r.delta_R_mw;
    const auto Ep = [omega](const QubitState& q) { return qubit_passive_energy(q, omega); };
    r.epsilon_passive = Ep(s.after_weak) - Ep(s.initial) + Ep(s.final_state) - Ep(s.before_reversal);
    return r;
}

inline ShiftReport compute_shifts(const StepStates<DensityMatrix>& s, const HamiltonianSpec& h) {
    ShiftReport r;
    r.delta_E_m = energy(s.after_weak, h) - energy(s.initial, h);
    r.delta_E_mw = energy(s.final_state, h) - energy(s.before_reversal, h);
    r.epsilon = r.delta_E_m + r.delta_E_mw;
    r.delta_R_m = ergotropy(s.after_weak, h) - ergotropy(s.initial, h);
    r.delta_R_mw = ergotropy(s.final_state, h) - ergotropy(s.before_reversal, h);
    r.W = r.delta_R_m + r.delta_R_mw;
    const auto Ep = [&h](const DensityMatrix& rho) { return passive_energy(rho, h); };
    r.epsilon_passive = Ep(s.after_weak) - Ep(s.initial) + Ep(s.final_state) - Ep(s.before_reversal);
    return r;
}

struct ProtocolOutcome {
    StepStates<DensityMatrix> states;
    DensityMatrix baseline_state;  // rho(tau) without measurements

    double n_m = 1.0;
    double n_mw = 1.0;
    double success = 1.0;  // N_m * N_mw

    std::array<ErgotropyBreakdown, 4> steps{};  // R_i .. R_iv
    ErgotropyBreakdown baseline{};               // R[rho(tau)]
    ErgotropyBreakdown gain{};                   // steps[3] - baseline
    ShiftReport shifts{};

    std::optional<double> concurrence_final;
    std::optional<double> concurrence_baseline;

    /// Gain as a percentage of the initial charge, component-wise.
    ErgotropyBreakdown percent_saved() const {
        const auto pct = [](double g, double r) { return r > 0.0 ? 100.0 * g / r : 0.0; };
        return {pct(gain.total, steps[0].total), pct(gain.incoherent, steps[0].incoherent),
                pct(gain.coherent, steps[0].coherent)};
    }
};

}  // namespace twm
