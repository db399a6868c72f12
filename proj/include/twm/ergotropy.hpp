#pragma once

// Ergotropy R = Tr[(rho - rho_p) H] and its split into an incoherent part
// (ergotropy of the energy-dephased state) and a coherent remainder.

#include "twm/core.hpp"
#include "twm/single_dynamics.hpp"

#include <functional>

namespace twm {

struct ErgotropyBreakdown {
    double total = 0.0;
    double incoherent = 0.0;
    double coherent = 0.0;

    ErgotropyBreakdown operator-(const ErgotropyBreakdown& o) const {
        return {total - o.total, incoherent - o.incoherent, coherent - o.coherent};
    }
};

/// Energy of the passive state: descending populations of rho placed on
/// ascending energies of H.
inline double passive_energy(const DensityMatrix& rho, const HamiltonianSpec& h) {
    if (rho.dim() != h.dim()) throw Error(ErrorKind::DimensionMismatch, "state and Hamiltonian dimensions differ");
    const Matrix herm = 0.5 * (rho.matrix() + rho.matrix().adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
    const RealVector& p = es.eigenvalues();  // ascending
    const Eigen::Index d = rho.dim();
    double e = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) e += p(d - 1 - k) * h.energies(k);
    return e;
}

inline double ergotropy(const DensityMatrix& rho, const HamiltonianSpec& h) {
    // Clamp rounding noise; the passive state never has more energy.
    return std::max(0.0, energy(rho, h) - passive_energy(rho, h));
}

inline double incoherent_ergotropy(const DensityMatrix& rho, const HamiltonianSpec& h) {
    return ergotropy(dephase(rho, h), h);
}

inline double coherent_ergotropy(const DensityMatrix& rho, const HamiltonianSpec& h) {
    return ergotropy(rho, h) - incoherent_ergotropy(rho, h);
}

inline ErgotropyBreakdown ergotropy_breakdown(const DensityMatrix& rho, const HamiltonianSpec& h) {
    const double total = ergotropy(rho, h);
    const double inc = incoherent_ergotropy(rho, h);
    return {total, inc, total - inc};
}

// ---------------------------------------------------------------------------
// Bare-qubit closed forms (H = omega |e><e|).

inline double qubit_incoherent_ergotropy(const QubitState& s, double omega) {
    return omega * (2.0 * s.P - 1.0) * (1.0 - heaviside(0.5 - s.P));
}

/// (omega/2)(-|1-2P| + sqrt((1-2P)^2 + 4|Q|^2)).
inline double qubit_coherent_ergotropy(const QubitState& s, double omega) {
    const double d = 1.0 - 2.0 * s.P;
    return 0.5 * omega * (-std::abs(d) + std::sqrt(d * d + 4.0 * s.coherence_sq()));
}

/// Same quantity through the purity: (omega/2)(psi - sqrt(psi^2 - 4|Q|^2)),
/// psi = sqrt(2 mu - 1).
inline double qubit_coherent_ergotropy_from_purity(const QubitState& s, double omega) {
    const double psi = std::sqrt(std::max(0.0, 2.0 * purity(s) - 1.0));
    return 0.5 * omega * (psi - std::sqrt(std::max(0.0, psi * psi - 4.0 * s.coherence_sq())));
}

inline ErgotropyBreakdown qubit_ergotropy(const QubitState& s, double omega) {
    const double inc = qubit_incoherent_ergotropy(s, omega);
    const double coh = qubit_coherent_ergotropy(s, omega);
    return {inc + coh, inc, coh};
}

/// Lowest eigenvalue of the qubit density matrix times omega.
inline double qubit_passive_energy(const QubitState& s, double omega) {
    const double d = 1.0 - 2.0 * s.P;
    return omega * (0.5 - 0.5 * std::sqrt(d * d + 4.0 * s.coherence_sq()));
}

// ---------------------------------------------------------------------------
// Stepwise incoherent ergotropy of the single-qubit protocol.

/// Reversal strength above which the final diagonal state is active,
/// w' = (1 - 2 P_m(tau)) N_m / (N_m + (1 - N_m)[(1-f)e^{-gamma tau} + f] - P(tau)).
/// Values outside [0, 1] are returned unchanged.
inline double reversal_threshold_w_prime(double P0, double m, const BathParams& bath, double tau) {
    const double n_m = 1.0 - m * P0;
    const double decay = std::exp(-bath.gamma * tau);
    const double P_tau = (P0 - bath.f) * decay + bath.f;
    const double ground_branch = (1.0 - bath.f) * decay + bath.f;
    const double P_m_tau = (P_tau - m * ground_branch * P0) / n_m;
    return (1.0 - 2.0 * P_m_tau) * n_m / (n_m + (1.0 - n_m) * ground_branch - P_tau);
}

struct IncoherentSteps {
    double initial = 0.0;       // R_i
    double after_weak = 0.0;    // R_ii
    double after_reversal = 0.0;  // R_iv
    std::function<double(double)> during;  // R_iii(t), t in [0, tau]
};

inline IncoherentSteps qubit_incoherent_steps(double P0, double m, double w, const BathParams& bath, double tau) {
    const double omega = bath.omega;
    const double n_m = 1.0 - m * P0;
    const double weak_gate = 1.0 - heaviside(m - 2.0 + 1.0 / P0);

    IncoherentSteps steps;
    steps.initial = omega * (2.0 * P0 - 1.0) * (1.0 - heaviside(0.5 - P0));
    steps.after_weak = omega * (1.0 - 2.0 * (1.0 - P0) / n_m) * weak_gate;

    const double P_m0 = (1.0 - m) * P0 / n_m;
    const auto half = tau_half(P_m0, bath);
    steps.during = [=](double t) {
        if (weak_gate == 0.0 || !half) return 0.0;
        const double dissipation_gate = 1.0 - heaviside(t - *half);
        return 2.0 * omega * ((P_m0 - bath.f) * std::exp(-bath.gamma * t) + bath.f - 0.5) * dissipation_gate;
    };

    const double decay = std::exp(-bath.gamma * tau);
    const double P_m_tau = (P_m0 - bath.f) * decay + bath.f;
    const double n_mw = 1.0 - w * (1.0 - P_m_tau);
    const double P_mw = P_m_tau / n_mw;
    const double w_prime = reversal_threshold_w_prime(P0, m, bath, tau);
    steps.after_reversal = omega * (2.0 * P_mw - 1.0) * (1.0 - heaviside(w_prime - w));
    return steps;
}

}  // namespace twm
