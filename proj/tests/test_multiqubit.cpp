#include "twm/multiqubit.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace twm;

namespace {

constexpr double kGamma = 0.01;
constexpr double kF = 0.3;
constexpr double kJ = 2.0 * kGamma;

CollectiveModel two_cells(double f = kF, double J = kJ) {
    return build_model(2, 1.0, uniform_coupling(2, J), BathParams{kGamma, f, 1.0});
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

bool is_x_shaped(const Matrix& r, double tol) {
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const bool allowed = i == j || i + j == 3;
            if (!allowed && std::abs(r(i, j)) > tol) return false;
        }
    return true;
}

}  // namespace

TEST(Model, Construction) {
    const auto m1 = build_model(1, 1.0, RealMatrix(), BathParams{});
    EXPECT_EQ(m1.dim(), 2);
    const auto m3 = build_model(3, 1.0, uniform_coupling(3, 0.01), BathParams{});
    EXPECT_EQ(m3.dim(), 8);
    EXPECT_LT(max_abs(m3.S_raise - m3.S_lower.adjoint()), 1e-15);
    EXPECT_NO_THROW(build_model(6, 1.0, RealMatrix(), BathParams{}));
    try {
        build_model(7, 1.0, RealMatrix(), BathParams{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TooLarge);
    }
    EXPECT_NO_THROW(build_model(8, 1.0, RealMatrix(), BathParams{}, 8));
    const auto c = uniform_coupling(3, 0.5);
    EXPECT_EQ(c(0, 0), 0.0);
    EXPECT_EQ(c(0, 2), 0.5);
}

TEST(LindbladRhs, GroundStateIsStationaryAtZeroTemperature) {
    const auto model = two_cells(0.0);
    Matrix g = Matrix::Zero(4, 4);
    g(0, 0) = 1.0;
    EXPECT_LT(max_abs(lindblad_rhs(model, g)), 1e-15);
}

TEST(LindbladRhs, SingletIsDark) {
    for (double f : {0.0, 0.3}) {
        const auto model = two_cells(f);
        Matrix psi = Matrix::Zero(4, 1);
        psi(1, 0) = 1.0 / std::sqrt(2.0);
        psi(2, 0) = -1.0 / std::sqrt(2.0);
        const Matrix singlet = psi * psi.adjoint();
        EXPECT_LT(max_abs(lindblad_rhs(model, singlet)), 1e-15);
        const auto later = integrate(model, DensityMatrix(singlet), 100.0);
        EXPECT_LT(max_abs(later.matrix() - singlet), 1e-10);
    }
}

TEST(LindbladRhs, MatchesHandWrittenXStateEquations) {
    std::mt19937_64 rng(40);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double f = 0.49 * u(rng), J = 0.2 * u(rng), gamma = 0.1 * u(rng) + 1e-3;
        const auto model = build_model(2, 1.0, uniform_coupling(2, J), BathParams{gamma, f, 1.0});
        const Matrix r = oracle::random_x_state(rng);
        EXPECT_LT(max_abs(lindblad_rhs(model, r) - oracle::x_state_rhs(r, gamma, f, 1.0, J)), 1e-12);
    }
    const auto model = two_cells();
    for (double q : {0.0, 0.1, 0.5, 0.9, 1.0}) {
        const Matrix r = x_state(q).rho.matrix();
        EXPECT_LT(max_abs(lindblad_rhs(model, r) - oracle::x_state_rhs(r, kGamma, kF, 1.0, kJ)), 1e-12);
    }
}

TEST(LindbladRhs, RejectsWrongDimension) {
    EXPECT_THROW(lindblad_rhs(two_cells(), Matrix::Identity(2, 2)), Error);
}

TEST(Integrator, ZeroTimeIsIdentity) {
    const auto rho = x_state(0.3).rho;
    EXPECT_LT(max_abs(integrate(two_cells(), rho, 0.0).matrix() - rho.matrix()), 1e-15);
}

TEST(Integrator, SingleCellMatchesClosedForm) {
    const BathParams bath{kGamma, kF, 1.0};
    const auto model = build_model(1, 1.0, RealMatrix(), bath);
    const QubitState s0{0.9, cplx(0.2, 0.1)};
    for (double gt = 0.0; gt <= 10.0; gt += 0.5) {
        const auto num = integrate(model, to_density(s0), gt / kGamma);
        const auto exact = to_density(evolve_free(s0, bath, gt / kGamma));
        EXPECT_LT(max_abs(num.matrix() - exact.matrix()), 1e-8) << "gamma t = " << gt;
    }
}

TEST(Integrator, PreservesDensityMatrixProperties) {
    std::mt19937_64 rng(41);
    const auto model = two_cells();
    for (int k = 0; k < 20; ++k) {
        const Matrix r0 = oracle::random_density(rng, 4);
        const auto r = integrate(model, DensityMatrix(r0), 60.0);
        EXPECT_NEAR(r.trace(), 1.0, 1e-8);
        EXPECT_LT(hermiticity_error(r.matrix()), 1e-8);
        EXPECT_GT(min_eigenvalue(r.matrix()), -1e-8);
    }
    const auto three = build_model(3, 1.0, uniform_coupling(3, kJ), BathParams{});
    const auto r3 = integrate(three, DensityMatrix(oracle::random_density(rng, 8)), 100.0);
    EXPECT_NEAR(r3.trace(), 1.0, 1e-8);
    EXPECT_GT(min_eigenvalue(r3.matrix()), -1e-8);
}

TEST(Integrator, KeepsXStructure) {
    std::mt19937_64 rng(42);
    const auto model = two_cells();
    for (int k = 0; k < 20; ++k) {
        const auto r = integrate(model, DensityMatrix(oracle::random_x_state(rng)), 100.0);
        EXPECT_TRUE(is_x_shaped(r.matrix(), 1e-10));
    }
}

TEST(Integrator, ThermalizesToProductGibbsState) {
    const auto model = build_model(2, 1.0, RealMatrix(), BathParams{0.5, kF, 1.0});
    const auto r = integrate(model, x_state(0.9).rho, 60.0);
    // The collective channel conserves the singlet weight, so compare populations
    // of |gg> and |ee> only.
    EXPECT_NEAR(r(3, 3).real() / r(0, 0).real(), kF * kF / ((1 - kF) * (1 - kF)), 1e-6);
}

TEST(XState, Entries) {
    const auto x = x_state(0.1).rho;
    EXPECT_NEAR(x(0, 0).real(), 0.05, 1e-15);
    EXPECT_NEAR(x(3, 3).real(), 0.05, 1e-15);
    EXPECT_NEAR(x(0, 3).real(), -0.04, 1e-15);
    EXPECT_NEAR(x(1, 1).real(), 0.09, 1e-15);
    EXPECT_NEAR(x(2, 2).real(), 0.81, 1e-15);
    const auto one = x_state(1.0).rho;
    EXPECT_NEAR(one(0, 3).real(), 0.5, 1e-15);
    EXPECT_NEAR(one(2, 2).real(), 0.0, 1e-15);
    EXPECT_THROW(x_state(1.2), Error);
    EXPECT_NO_THROW(validate_density(x_state(0.9).rho.matrix()));
}

TEST(XState, ErgotropyIsSymmetricAboutHalf) {
    const auto h = two_cells().H;
    for (int k = 0; k <= 100; ++k) {
        const double q = k / 100.0;
        EXPECT_NEAR(ergotropy(x_state(q).rho, h), std::abs(1.0 - 2.0 * q), 1e-12) << q;
    }
}

TEST(Concurrence, KnownStates) {
    Matrix gg = Matrix::Zero(4, 4);
    gg(0, 0) = 1.0;
    EXPECT_NEAR(concurrence(DensityMatrix(gg)), 0.0, 1e-12);
    Matrix psi = Matrix::Zero(4, 1);
    psi(0, 0) = psi(3, 0) = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(concurrence(DensityMatrix(psi * psi.adjoint())), 1.0, 1e-7);
    EXPECT_NEAR(concurrence(DensityMatrix(Matrix::Identity(4, 4) / 4.0)), 0.0, 1e-12);
    EXPECT_NEAR(concurrence(x_state(0.9).rho), 0.66, 0.005);
    EXPECT_THROW(concurrence(DensityMatrix(gg.topLeftCorner(2, 2))), Error);
}

TEST(Concurrence, MatchesXStateClosedForm) {
    for (int k = 0; k <= 1000; ++k) {
        const double q = k / 1000.0;
        EXPECT_NEAR(concurrence(x_state(q).rho), x_state_concurrence(q), 1e-7) << q;
    }
}

TEST(Concurrence, SuddenDeathThreshold) {
    // Root of 2q^2 - q = 2(1-q) sqrt(q(1-q)), about 0.6983.
    const auto root = bisect([](double q) { return 2 * q * q - q - 2 * (1 - q) * std::sqrt(q * (1 - q)); }, 0.6, 0.8);
    ASSERT_TRUE(root);
    EXPECT_NEAR(*root, 0.6983, 1e-4);
    for (int k = 0; k <= 69; ++k) EXPECT_EQ(x_state_concurrence(k / 100.0), 0.0);
    for (int k = 70; k <= 100; ++k) EXPECT_GT(concurrence(x_state(k / 100.0).rho), 0.0);
}

TEST(Dynamics, ErgotropyAndConcurrenceCurves) {
    const auto model = two_cells();
    std::vector<double> grid;
    for (int k = 0; k <= 100; ++k) grid.push_back(k * 1.0);
    const auto low = multi_timeseries(model, x_state(0.1).rho, std::nullopt, grid);
    const auto high = multi_timeseries(model, x_state(0.9).rho, std::nullopt, grid);
    ASSERT_EQ(low.size(), grid.size());
    EXPECT_NEAR(low.front().R.total, 0.8, 1e-12);
    EXPECT_NEAR(high.front().R.total, 0.8, 1e-12);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        EXPECT_LT(low[k].R.total, low[k - 1].R.total);
        EXPECT_LT(high[k].R.total, high[k - 1].R.total);
        if (*high[k - 1].concurrence > 0.0)
            EXPECT_LT(*high[k].concurrence, *high[k - 1].concurrence);
        else
            EXPECT_EQ(*high[k].concurrence, 0.0);
    }
    // Dissipation first creates entanglement from the product state, then loses it.
    EXPECT_EQ(*low.front().concurrence, 0.0);
    std::size_t peak = 0;
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (*low[k].concurrence > *low[peak].concurrence) peak = k;
    EXPECT_GT(peak, 0u);
    EXPECT_LT(peak, grid.size() - 1);
    EXPECT_GT(*low[peak].concurrence, 0.0);
}

TEST(MultiRun, NoMeasurementReproducesBaseline) {
    const auto o = run_twm_multi(two_cells(), x_state(0.1).rho, {0.0, 0.0}, {0.0, 0.0}, 100.0);
    EXPECT_NEAR(o.gain.total, 0.0, 1e-12);
    EXPECT_NEAR(o.success, 1.0, 1e-12);
    EXPECT_NEAR(o.shifts.epsilon, 0.0, 1e-12);
}

TEST(MultiRun, StrengthCountMustMatchCells) {
    EXPECT_THROW(run_twm_multi(two_cells(), x_state(0.1).rho, {0.5}, {0.5}, 100.0), Error);
    EXPECT_THROW(run_twm_multi(two_cells(), x_state(0.1).rho, {0.5, 1.5}, {0.5, 0.5}, 100.0), Error);
}

TEST(MultiRun, ProductStateExample) {
    const auto model = two_cells();
    const auto pts = find_operational_points_2q(model, x_state(0.1).rho, {0.5, 0.6}, 100.0);
    ASSERT_FALSE(pts.empty());
    const auto& p = pts.front();
    EXPECT_NEAR(p.w[0], 0.21, 0.03);
    EXPECT_NEAR(p.w[1], 0.21, 0.03);
    EXPECT_LT(p.epsilon_residual, kTolerance);
    EXPECT_LT(p.W_residual, kTolerance);
    const auto o = run_twm_multi(model, x_state(0.1).rho, {0.5, 0.6}, p.w, 100.0);
    EXPECT_NEAR(o.gain.total, 0.049, 0.005);
    EXPECT_NEAR(o.success, 0.37, 0.02);
    EXPECT_NEAR(100.0 * o.gain.total / o.steps[0].total, 6.12, 0.1);
    ASSERT_TRUE(o.concurrence_final && o.concurrence_baseline);
    EXPECT_GT(*o.concurrence_final, *o.concurrence_baseline);
}

TEST(MultiRun, EntangledStateExample) {
    const auto model = two_cells();
    const auto pts = find_operational_points_2q(model, x_state(0.9).rho, {0.5, 0.9}, 100.0);
    const auto it = std::find_if(pts.begin(), pts.end(), [](const auto& p) {
        return std::abs(p.w[0] - 0.97) < 0.03 && std::abs(p.w[1] - 0.17) < 0.03;
    });
    ASSERT_NE(it, pts.end());
    const auto o = run_twm_multi(model, x_state(0.9).rho, {0.5, 0.9}, it->w, 100.0);
    EXPECT_NEAR(o.gain.total, 0.61, 0.03);
    EXPECT_NEAR(o.success, 0.09, 0.01);
    EXPECT_NEAR(o.steps[3].total - o.steps[0].total, 0.003, 0.002);
    EXPECT_NEAR(100.0 * o.gain.total / o.steps[0].total, 75.81, 0.5);
    EXPECT_LE(*o.concurrence_final, *o.concurrence_baseline);
}

TEST(OperationalSearch2q, NoMeasurementPlaneContainsOrigin) {
    const auto pts = find_operational_points_2q(two_cells(), x_state(0.1).rho, {0.0, 0.0}, 100.0);
    const bool origin = std::any_of(pts.begin(), pts.end(), [](const auto& p) {
        return std::abs(p.w[0]) < 1e-6 && std::abs(p.w[1]) < 1e-6;
    });
    EXPECT_TRUE(origin);
}

TEST(OperationalSearch2q, Configuration) {
    const auto three = build_model(3, 1.0, RealMatrix(), BathParams{});
    EXPECT_THROW(find_operational_points_2q(three, DensityMatrix(Matrix::Identity(8, 8) / 8.0), {0.1, 0.1, 0.1}, 1.0),
                 Error);
    EXPECT_THROW(find_operational_points_2q(two_cells(), x_state(0.1).rho, {0.5, 0.6}, 100.0, {8}), Error);
}

TEST(OperationalSearch2q, WorkerCountDoesNotChangeResults) {
    const auto model = two_cells();
    const auto a = find_operational_points_2q(model, x_state(0.9).rho, {0.5, 0.9}, 100.0, {48, kTolerance, 1});
    const auto b = find_operational_points_2q(model, x_state(0.9).rho, {0.5, 0.9}, 100.0, {48, kTolerance, 3});
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].w, b[i].w);
}

TEST(MultiTimeseries, JumpRows) {
    const auto model = two_cells();
    const auto rows = multi_timeseries(model, x_state(0.1).rho, MultiProtocol{{0.5, 0.6}, {0.21, 0.21}, 100.0},
                                       {0.0, 50.0, 100.0});
    std::size_t protocol = 0;
    for (const auto& r : rows) protocol += r.series == "protocol";
    EXPECT_EQ(rows.size() - protocol, 3u);
    EXPECT_EQ(protocol, 5u);
    const auto o = run_twm_multi(model, x_state(0.1).rho, {0.5, 0.6}, {0.21, 0.21}, 100.0);
    EXPECT_NEAR(rows.back().R.total, o.steps[3].total, 1e-9);
}
