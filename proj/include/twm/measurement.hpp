#pragma once

// Selective weak measurement and its reversal.
//
//   M_m = |g><g| + sqrt(1-m) |e><e|      (pulls toward the ground state)
//   W_w = sqrt(1-w) |g><g| + |e><e|      (pulls toward the excited state)
//
// Only the selected outcome is tracked; probabilities below
// kMinProbability are treated as impossible post-selections.

#include "twm/core.hpp"

#include <span>

namespace twm {

inline constexpr double kMinProbability = 1e-12;

enum class MeasurementKind { Weak, Reversal };

template <class State>
struct Measured {
    State state;
    double probability = 1.0;
};

struct MeasurementRecord {
    MeasurementKind kind = MeasurementKind::Weak;
    double strength = 0.0;
    double probability = 1.0;
    DensityMatrix pre_state;
    DensityMatrix post_state;
};

inline Matrix measurement_operator(double strength, MeasurementKind kind) {
    check_strength(strength, kind == MeasurementKind::Weak ? "weak" : "reversal");
    Matrix k = Matrix::Zero(2, 2);
    if (kind == MeasurementKind::Weak) {
        k(0, 0) = 1.0;
        k(1, 1) = std::sqrt(1.0 - strength);
    } else {
        k(0, 0) = std::sqrt(1.0 - strength);
        k(1, 1) = 1.0;
    }
    return k;
}

/// The discarded outcome of the same instrument: sqrt(m)|e><e| for the weak
/// measurement, sqrt(w)|g><g| for the reversal.
inline Matrix complementary_operator(double strength, MeasurementKind kind) {
    Matrix k = Matrix::Zero(2, 2);
    if (kind == MeasurementKind::Weak)
        k(1, 1) = std::sqrt(strength);
    else
        k(0, 0) = std::sqrt(strength);
    return k;
}

inline Measured<QubitState> weak_measure(const QubitState& s, double m) {
    check_strength(m, "weak");
    const double norm = 1.0 - m * s.P;
    if (norm < kMinProbability) throw Error(ErrorKind::ZeroProbability, "weak measurement outcome is impossible");
    return {QubitState{s.P * (1.0 - m) / norm, std::sqrt(1.0 - m) * s.Q / norm}, norm};
}

inline Measured<QubitState> reversal_measure(const QubitState& s, double w) {
    check_strength(w, "reversal");
    const double norm = 1.0 - w * (1.0 - s.P);
    if (norm < kMinProbability) throw Error(ErrorKind::ZeroProbability, "reversal measurement outcome is impossible");
    return {QubitState{s.P / norm, std::sqrt(1.0 - w) * s.Q / norm}, norm};
}

/// Probability of the reversal outcome after weak measurement and
/// dissipation for time tau, written in terms of the unmeasured trajectory:
///   N_mw = 1 - w + w P(tau)/N_m - w (1 - N_m)/N_m [(1-f) e^{-gamma tau} + f].
inline double n_mw_closed_form(double P0, double m, double w, const BathParams& bath, double tau) {
    const double n_m = 1.0 - m * P0;
    const double decay = std::exp(-bath.gamma * tau);
    const double P_tau = (P0 - bath.f) * decay + bath.f;
    const double ground_branch = (1.0 - bath.f) * decay + bath.f;
    return 1.0 - w + w * P_tau / n_m - w * (1.0 - n_m) / n_m * ground_branch;
}

inline double success_probability(std::span<const MeasurementRecord> records) {
    double p = 1.0;
    for (const auto& r : records) p *= r.probability;
    return p;
}

/// Tensor product of single-cell operators; a zero strength contributes the
/// identity on that cell.
inline Matrix local_operator(std::span<const double> strengths, MeasurementKind kind) {
    Matrix k = Matrix::Identity(1, 1);
    for (double s : strengths) k = detail::kron(k, measurement_operator(s, kind));
    return k;
}

inline Measured<DensityMatrix> local_measurement(const DensityMatrix& rho, std::span<const double> strengths,
                                                 MeasurementKind kind) {
    if (strengths.empty() || (Eigen::Index(1) << strengths.size()) != rho.dim())
        throw Error(ErrorKind::DimensionMismatch, "one strength per cell is required");
    const Matrix k = local_operator(strengths, kind);
    const Matrix out = k * rho.matrix() * k.adjoint();
    const double p = out.trace().real();
    if (p < kMinProbability) throw Error(ErrorKind::ZeroProbability, "local measurement outcome is impossible");
    return {DensityMatrix(out / p), p};
}

}  // namespace twm
