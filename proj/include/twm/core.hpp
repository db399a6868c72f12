#pragma once

// Shared domain types for the two-time weak measurement toolkit: qubit
// states, bath parameters, dense density matrices and N-qubit Hamiltonians.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace twm {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Absolute tolerance for positivity, trace and Hermiticity checks.
inline constexpr double kTolerance = 1e-9;

/// Couplings at or above this fraction of omega fall outside the local
/// master equation's validity. Flagged, not rejected.
inline constexpr double kCouplingWarningRatio = 0.1;

enum class ErrorKind {
    OutOfRange,
    NonPositive,
    DimensionMismatch,
    InvalidTemperature,
    NegativeTime,
    ZeroProbability,
    ZeroTemperature,
    TooLarge,
    StepFailure,
    InvalidConfig,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::OutOfRange: return "OutOfRange";
        case ErrorKind::NonPositive: return "NonPositive";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::InvalidTemperature: return "InvalidTemperature";
        case ErrorKind::NegativeTime: return "NegativeTime";
        case ErrorKind::ZeroProbability: return "ZeroProbability";
        case ErrorKind::ZeroTemperature: return "ZeroTemperature";
        case ErrorKind::TooLarge: return "TooLarge";
        case ErrorKind::StepFailure: return "StepFailure";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Heaviside step with theta(0) = 1, so quantities gated by
/// [1 - theta(x)] vanish at the threshold itself.
inline double heaviside(double x) { return x >= 0.0 ? 1.0 : 0.0; }

/// Single-qubit battery state in the {|g>, |e>} basis:
///   rho = [[1 - P, Q], [Q*, P]].
struct QubitState {
    double P = 0.0;
    cplx Q = 0.0;

    double coherence_sq() const { return std::norm(Q); }
};

struct BathParams {
    double gamma = 1e-2;
    double f = 0.3;
    double omega = 1.0;

    /// tau_gamma = 1/gamma, the dissipative timescale.
    double tau_gamma() const { return 1.0 / gamma; }
};

inline BathParams make_bath(double gamma, double f, double omega = 1.0) {
    if (!(gamma > 0.0)) throw Error(ErrorKind::OutOfRange, "gamma must be positive");
    if (!(omega > 0.0)) throw Error(ErrorKind::OutOfRange, "omega must be positive");
    if (!(f >= 0.0 && f < 0.5)) throw Error(ErrorKind::OutOfRange, "thermal population must lie in [0, 1/2)");
    return BathParams{gamma, f, omega};
}

inline void check_strength(double s, const char* name) {
    if (!(s >= 0.0 && s <= 1.0))
        throw Error(ErrorKind::OutOfRange, std::string(name) + " strength must lie in [0, 1]");
}

/// Measurement strengths and dissipation time. Scalar runs use the first
/// entry of each vector.
struct ProtocolParams {
    std::vector<double> m;
    std::vector<double> w;
    double tau = 0.0;

    static ProtocolParams scalar(double m, double w, double tau) { return {{m}, {w}, tau}; }

    void validate() const {
        if (m.size() != w.size()) throw Error(ErrorKind::DimensionMismatch, "strength vectors differ in length");
        for (double s : m) check_strength(s, "weak");
        for (double s : w) check_strength(s, "reversal");
        if (!(tau >= 0.0)) throw Error(ErrorKind::NegativeTime, "dissipation time must be non-negative");
    }
};

inline QubitState validate_qubit_state(double P, cplx Q) {
    if (!(P >= 0.0 && P <= 1.0)) throw Error(ErrorKind::OutOfRange, "population must lie in [0, 1]");
    if (std::norm(Q) > P * (1.0 - P) + kTolerance)
        throw Error(ErrorKind::NonPositive, "|Q|^2 exceeds P(1-P)");
    return QubitState{P, Q};
}

/// mu = Tr[rho^2] = P^2 + (1-P)^2 + 2|Q|^2.
inline double purity(const QubitState& s) {
    return s.P * s.P + (1.0 - s.P) * (1.0 - s.P) + 2.0 * s.coherence_sq();
}

/// f = e^{-beta omega} / (1 + e^{-beta omega}). Infinite beta gives f = 0;
/// beta <= 0 would give f >= 1/2 and is rejected.
inline double thermal_population(double beta, double omega) {
    if (!(omega > 0.0)) throw Error(ErrorKind::OutOfRange, "omega must be positive");
    if (std::isnan(beta) || beta <= 0.0)
        throw Error(ErrorKind::InvalidTemperature, "inverse temperature must be positive");
    if (std::isinf(beta)) return 0.0;
    const double x = beta * omega;
    // 1/(1+e^x) is the stable form of e^{-x}/(1+e^{-x}).
    return 1.0 / (1.0 + std::exp(x));
}

/// Dense d x d density matrix. Construction does not validate; use
/// validate_density for inputs that come from outside the library.
class DensityMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(Matrix m) : m_(std::move(m)) {}

    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    cplx operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
    double trace() const { return m_.trace().real(); }

private:
    Matrix m_;
};

inline double hermiticity_error(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

inline double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline DensityMatrix validate_density(const Matrix& m, double tol = kTolerance) {
    if (m.rows() != m.cols() || m.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "density matrix must be square");
    if (hermiticity_error(m) > tol) throw Error(ErrorKind::NonPositive, "density matrix is not Hermitian");
    if (std::abs(m.trace() - cplx(1.0)) > tol) throw Error(ErrorKind::OutOfRange, "density matrix trace differs from 1");
    if (min_eigenvalue(m) < -tol) throw Error(ErrorKind::NonPositive, "density matrix has a negative eigenvalue");
    return DensityMatrix(m);
}

inline DensityMatrix to_density(const QubitState& s) {
    Matrix m(2, 2);
    m << cplx(1.0 - s.P), s.Q, std::conj(s.Q), cplx(s.P);
    return DensityMatrix(std::move(m));
}

/// Reads P and Q back from a 2 x 2 density matrix.
inline QubitState to_qubit(const DensityMatrix& rho) {
    if (rho.dim() != 2) throw Error(ErrorKind::DimensionMismatch, "not a single-qubit state");
    return QubitState{rho(1, 1).real(), rho(0, 1)};
}

namespace detail {

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Embeds a single-site operator at `site` (0 = most significant factor)
/// of an n-qubit register.
inline Matrix embed(const Matrix& op, int site, int n) {
    Matrix out = Matrix::Identity(1, 1);
    for (int k = 0; k < n; ++k) out = kron(out, k == site ? op : Matrix::Identity(2, 2));
    return out;
}

/// |g><e| in the {|g>, |e>} basis.
inline Matrix lowering() {
    Matrix s = Matrix::Zero(2, 2);
    s(0, 1) = 1.0;
    return s;
}

inline Matrix excited_projector() {
    Matrix p = Matrix::Zero(2, 2);
    p(1, 1) = 1.0;
    return p;
}

}  // namespace detail

/// H = omega sum_k |e><e|_k + sum_{k != j} J_kj sigma_+^k sigma_-^j on n
/// qubits, with its eigendecomposition cached (eigenvalues ascending).
struct HamiltonianSpec {
    int n_cells = 1;
    double omega = 1.0;
    RealMatrix J;
    Matrix H;
    RealVector energies;
    Matrix eigenvectors;
    bool coupling_warning = false;

    Eigen::Index dim() const { return H.rows(); }
};

inline HamiltonianSpec make_hamiltonian(int n, double omega, const RealMatrix& J) {
    if (n < 1) throw Error(ErrorKind::OutOfRange, "need at least one cell");
    if (!(omega > 0.0)) throw Error(ErrorKind::OutOfRange, "omega must be positive");
    RealMatrix coupling = J.size() == 0 ? RealMatrix::Zero(n, n) : J;
    if (coupling.rows() != n || coupling.cols() != n)
        throw Error(ErrorKind::DimensionMismatch, "coupling matrix must be n x n");
    for (int k = 0; k < n; ++k) {
        if (coupling(k, k) != 0.0) throw Error(ErrorKind::OutOfRange, "coupling matrix must have zero diagonal");
        for (int j = 0; j < n; ++j)
            if (std::abs(coupling(k, j) - coupling(j, k)) > kTolerance)
                throw Error(ErrorKind::OutOfRange, "coupling matrix must be symmetric");
    }

    HamiltonianSpec spec;
    spec.n_cells = n;
    spec.omega = omega;
    spec.J = coupling;
    const Eigen::Index d = Eigen::Index(1) << n;
    spec.H = Matrix::Zero(d, d);
    const Matrix lower = detail::lowering();
    const Matrix raise = lower.adjoint();
    for (int k = 0; k < n; ++k) spec.H += omega * detail::embed(detail::excited_projector(), k, n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            if (k != j && coupling(k, j) != 0.0)
                spec.H += coupling(k, j) * detail::embed(raise, k, n) * detail::embed(lower, j, n);

    spec.coupling_warning = coupling.cwiseAbs().maxCoeff() >= kCouplingWarningRatio * omega;

    if (coupling.cwiseAbs().maxCoeff() == 0.0) {
        // Diagonal H: the product basis is an exact eigenbasis, and using it
        // keeps dephasing well defined inside degenerate levels.
        RealVector diag = spec.H.diagonal().real();
        std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
        for (Eigen::Index i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return diag(a) < diag(b); });
        spec.energies.resize(d);
        spec.eigenvectors = Matrix::Zero(d, d);
        for (Eigen::Index c = 0; c < d; ++c) {
            spec.energies(c) = diag(order[static_cast<std::size_t>(c)]);
            spec.eigenvectors(order[static_cast<std::size_t>(c)], c) = 1.0;
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(spec.H);
        spec.energies = es.eigenvalues();
        spec.eigenvectors = es.eigenvectors();
    }
    return spec;
}

inline HamiltonianSpec qubit_hamiltonian(double omega = 1.0) { return make_hamiltonian(1, omega, RealMatrix()); }

/// Removes coherences in the energy eigenbasis of H.
inline DensityMatrix dephase(const DensityMatrix& rho, const HamiltonianSpec& h) {
    if (rho.dim() != h.dim()) throw Error(ErrorKind::DimensionMismatch, "state and Hamiltonian dimensions differ");
    const Matrix& V = h.eigenvectors;
    const Matrix in_energy = V.adjoint() * rho.matrix() * V;
    Matrix diag = Matrix::Zero(rho.dim(), rho.dim());
    for (Eigen::Index k = 0; k < rho.dim(); ++k) diag(k, k) = in_energy(k, k).real();
    return DensityMatrix(V * diag * V.adjoint());
}

inline double energy(const DensityMatrix& rho, const HamiltonianSpec& h) {
    if (rho.dim() != h.dim()) throw Error(ErrorKind::DimensionMismatch, "state and Hamiltonian dimensions differ");
    return (rho.matrix() * h.H).trace().real();
}

}  // namespace twm
