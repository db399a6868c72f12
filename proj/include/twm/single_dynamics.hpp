#pragma once

// Closed-form thermalization of a single qubit under the GKLS equation.
//
//   dP/dt = gamma (f - P)            P(t) = (P0 - f) e^{-gamma t} + f
//   dQ/dt = -Q (gamma - 2 i omega)/2  Q(t) = Q0 e^{-gamma t/2 + i omega t}

#include "twm/core.hpp"

#include <optional>

namespace twm {

inline QubitState evolve_free(const QubitState& s0, const BathParams& bath, double t) {
    if (!(t >= 0.0)) throw Error(ErrorKind::NegativeTime, "evolution time must be non-negative");
    const double decay = std::exp(-bath.gamma * t);
    const double P = (s0.P - bath.f) * decay + bath.f;
    const cplx Q = s0.Q * std::exp(cplx(-0.5 * bath.gamma * t, bath.omega * t));
    return QubitState{P, Q};
}

/// Closed-form trajectory from a fixed initial state.
struct FreeEvolution {
    QubitState initial;
    BathParams bath;

    double P(double t) const { return (initial.P - bath.f) * std::exp(-bath.gamma * t) + bath.f; }
    cplx Q(double t) const { return initial.Q * std::exp(cplx(-0.5 * bath.gamma * t, bath.omega * t)); }
    QubitState at(double t) const { return evolve_free(initial, bath, t); }
};

inline QubitState thermal_state(double f) {
    if (!(f >= 0.0 && f < 0.5)) throw Error(ErrorKind::OutOfRange, "thermal population must lie in [0, 1/2)");
    return QubitState{f, 0.0};
}

/// Time for the excited population to relax from P_start down to 1/2.
/// Zero at P_start == 1/2, empty below it (the diagonal is already passive).
inline std::optional<double> tau_half(double P_start, const BathParams& bath) {
    if (P_start == 0.5) return 0.0;
    if (P_start < 0.5) return std::nullopt;
    return -std::log((0.5 - bath.f) / (P_start - bath.f)) / bath.gamma;
}

struct QubitDerivative {
    double dP = 0.0;
    cplx dQ = 0.0;
};

inline QubitDerivative lindblad_rhs_single(const QubitState& s, const BathParams& bath) {
    return QubitDerivative{bath.gamma * (bath.f - s.P), -0.5 * s.Q * cplx(bath.gamma, -2.0 * bath.omega)};
}

}  // namespace twm
