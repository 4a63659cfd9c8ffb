#include <gtest/gtest.h>

#include <cmath>

#include "mll/wkb.hpp"
#include "oracles.hpp"

using namespace mll;

namespace {

const Phase carrier = solve_phase(2.0, +1);

Grid small_grid() { return Grid{4, 128, 64.0}; }

std::vector<cplx> test_envelope(const ScalarGrid& g) {
    auto a = gaussian_envelope(g, 0.5, 4.0, g.Ly / 2);
    for (int i = 0; i < g.Ny; ++i) a[i] *= std::exp(I * (0.3 * g.Ly * i / g.Ny));  // carries a phase gradient
    return a;
}

double max_coeff(const ThetaProfile& v) {
    double m = 0.0;
    for (const auto& c : v.data()) m = std::max(m, c.cwiseAbs().maxCoeff());
    return m;
}

struct Layers {
    WkbProfile w, w_tau;
};

Layers layers_at(double eps, const Grid& grid) {
    const auto c = compute_coefficients(carrier);
    const ScalarGrid sg{grid.Ny, grid.Ly};
    const auto g = test_envelope(sg);
    NlsSolver nls(sg, c.nu1, c.nu2);
    const auto gdot = nls.rhs(g);
    return {assemble(g, c, grid, eps), assemble_tau_derivative(g, gdot, c, grid, eps)};
}

}  // namespace

TEST(Coefficients, MatchRationalOracle) {
    const auto c = compute_coefficients(carrier);
    const auto r = oracle::rational_coefficients(2, +1);
    EXPECT_NEAR(c.nu, oracle::to_double(r.nu), 1e-12);
    EXPECT_NEAR(c.rho * carrier.k / carrier.omega, oracle::to_double(r.k_rho_over_omega), 1e-12);
    EXPECT_NEAR(c.nu1, oracle::to_double(r.nu1), 1e-12);
    EXPECT_NEAR(c.closed_form.nu1, oracle::to_double(r.nu1), 1e-12);
    EXPECT_NEAR(c.closed_form.nu2, oracle::to_double(r.nu2_closed), 1e-12);
    EXPECT_NEAR(c.closed_form.mean_coeff, oracle::to_double(r.mean_closed), 1e-12);
    EXPECT_NEAR(c.nu2, oracle::to_double(r.nu2_cascade), 1e-12);
    EXPECT_NEAR(c.mean_coeff, oracle::to_double(r.mean_cascade), 1e-12);
}

TEST(Coefficients, KnownValuesForUnitCarrier) {
    const auto c = compute_coefficients(carrier);
    EXPECT_NEAR(c.nu, 22.0 / 9.0, 1e-13);
    EXPECT_NEAR(c.rho, 0.944755, 1e-6);
    EXPECT_NEAR(c.nu1, -81.0 / 5324.0, 1e-13);
    EXPECT_NEAR(c.closed_form.nu2, -32.0 / 81.0, 1e-13);
    EXPECT_NEAR(c.closed_form.mean_coeff, -4.0 / 9.0, 1e-13);
    EXPECT_NEAR(c.mean_coeff, -2.0 / 9.0, 1e-13);
    EXPECT_NEAR(c.nu2, -8.0 / 99.0, 1e-13);
}

TEST(Coefficients, GroupVelocityIdentities) {
    for (auto [w, d] : {std::pair{2.0, 1}, {0.7, 1}, {3.5, 1}, {0.5, -1}, {2.5, -1}, {6.0, -1}}) {
        const Phase ph = solve_phase(w, d);
        const auto c = compute_coefficients(ph);
        EXPECT_NEAR(c.rho, 2.0 * ph.k / (ph.omega * c.nu), 1e-14);
        EXPECT_NEAR(c.rho, c.closed_form.rho, 1e-14);
        EXPECT_NEAR(ph.k * c.rho / ph.omega, 2.0 * ph.k * ph.k / (ph.omega * ph.omega * c.nu), 1e-14);
        EXPECT_NEAR(c.nu1, c.closed_form.nu1, 1e-12);
    }
}

TEST(Coefficients, FirstCorrectorSolvesItsEquation) {
    for (auto [w, d] : {std::pair{2.0, 1}, {0.5, -1}, {3.0, -1}}) {
        const Phase ph = solve_phase(w, d);
        const auto c = compute_coefficients(ph);
        const Mat9 a = SystemMatrices::get().A1.cast<cplx>();
        const Mat9 l1 = harmonic_operator(1, ph.omega, ph.k);
        EXPECT_LT((l1 * c.X + (a * c.W0 - c.rho * c.W0)).norm(), 1e-12);
        EXPECT_LT((l1 * c.W0).norm(), 1e-12);
    }
}

TEST(Coefficients, SecondCorrectorSolvesItsEquationModuloKernel) {
    const auto c = compute_coefficients(carrier);
    const auto l1 = harmonic_matrix(1, carrier);
    const Mat9 as = SystemMatrices::get().A1.cast<cplx>() - c.rho * Mat9::Identity();
    const StateVector src = -(as * c.X) - I * c.mu * (as * c.W0);
    const StateVector range = src - l1.pip * src;
    EXPECT_LT((l1.Lp * c.v21_disp - range).norm(), 1e-12);
    EXPECT_LT((l1.pip * c.v21_disp).norm(), 1e-12);
    const StateVector csrc = 2.0 * c.mean_coeff * bilinear_B(c.W0, transparency_direction());
    EXPECT_LT((l1.Lp * c.v21_cubic - (csrc - l1.pip * csrc)).norm(), 1e-12);
}

TEST(Coefficients, RealityConditions) {
    const auto c = compute_coefficients(carrier);
    EXPECT_LT(std::abs(std::imag(bilinear_B(c.W0.conjugate(), c.X)(3))), 1e-14);
    EXPECT_LT(std::abs(std::real(bilinear_B(c.W0.conjugate(), c.v21_disp)(3))), 1e-13);
    EXPECT_LT(std::abs(std::real(bilinear_B(c.W0.conjugate(), c.v21_cubic)(3))), 1e-13);
    EXPECT_TRUE(std::isfinite(c.mu));
    // mu is fixed by the order-eps^2 mean balance
    EXPECT_NEAR(std::imag(bilinear_B(c.W0.conjugate(), c.v21_disp)(3)), 0.5 * c.mean_coeff * c.nu1, 1e-14);
}

TEST(Coefficients, SecondCorrectorStaysInKernelRangeOfSlowProjector) {
    const auto c = compute_coefficients(carrier);
    for (int i : pis_indices) {
        EXPECT_LT(std::abs(c.v21_disp(i)), 1e-13);
        EXPECT_LT(std::abs(c.v21_cubic(i)), 1e-13);
    }
    // The H and M slots of V21 cannot vanish together for the cascade source.
    EXPECT_GT(h_part(c.v21_disp).norm() + m_part(c.v21_disp).norm(), 1e-3);
}

TEST(Nls, ZeroStaysZero) {
    const auto c = compute_coefficients(carrier);
    EnvelopeState s{{64, 10.0}, std::vector<cplx>(64, 0.0), 0.0};
    for (int i = 0; i < 10; ++i) s = nls_evolve(s, 1e-3, c);
    for (auto z : s.g1) EXPECT_EQ(z, cplx(0.0));
}

TEST(Nls, PlaneWaveIsExact) {
    const auto c = compute_coefficients(carrier);
    const ScalarGrid grid{128, 64.0};
    const double kappa = 2.0 * std::numbers::pi * 3 / grid.Ly, amp = 0.7;
    const double freq = -c.nu1 * kappa * kappa - c.nu2 * amp * amp;
    auto wave = [&](double tau) {
        std::vector<cplx> g(grid.Ny);
        for (int i = 0; i < grid.Ny; ++i) g[i] = amp * std::exp(I * (kappa * grid.Ly * i / grid.Ny - freq * tau));
        return g;
    };
    EnvelopeState s{grid, wave(0.0), 0.0};
    NlsSolver(grid, c.nu1, c.nu2).advance(s, 1.0, 1e-3);
    const auto exact = wave(1.0);
    double err = 0.0;
    for (int i = 0; i < grid.Ny; ++i) err = std::max(err, std::abs(s.g1[i] - exact[i]));
    EXPECT_LT(err / amp, 1e-6);
    EXPECT_DOUBLE_EQ(s.tau, 1.0);
}

TEST(Nls, MassConserved) {
    const auto c = compute_coefficients(carrier);
    const ScalarGrid grid{256, 64.0};
    EnvelopeState s{grid, test_envelope(grid), 0.0};
    const double m0 = discrete_mass(s);
    NlsSolver solver(grid, c.nu1, c.nu2);
    for (int i = 0; i < 10; ++i) {
        solver.advance(s, 0.1 * (i + 1), 1e-3);
        EXPECT_LT(std::abs(discrete_mass(s) - m0), 1e-10);
    }
}

TEST(Nls, StrangSplittingIsSecondOrder) {
    const ScalarGrid grid{128, 64.0};
    const double nu1 = -0.5, nu2 = -2.0;  // larger coefficients make the splitting error visible
    auto run = [&](double dt) {
        EnvelopeState s{grid, test_envelope(grid), 0.0};
        NlsSolver(grid, nu1, nu2, 1.0).advance(s, 1.0, dt);
        return s.g1;
    };
    const auto ref = run(1e-4), a = run(0.04), b = run(0.02);
    double ea = 0.0, eb = 0.0;
    for (int i = 0; i < grid.Ny; ++i) {
        ea = std::max(ea, std::abs(a[i] - ref[i]));
        eb = std::max(eb, std::abs(b[i] - ref[i]));
    }
    EXPECT_NEAR(ea / eb, 4.0, 0.4);
}

TEST(Nls, StepTooLargeRejected) {
    const auto c = compute_coefficients(carrier);
    EnvelopeState s{{32, 10.0}, std::vector<cplx>(32, 1.0), 0.0};
    EXPECT_THROW(nls_evolve(s, 0.5, c, 0.01), StepTooLarge);
    EXPECT_THROW(nls_evolve(s, -1e-3, c), StepTooLarge);
}

TEST(Nls, HorizonGuardAborts) {
    const ScalarGrid grid{64, 64.0};
    EnvelopeState s{grid, test_envelope(grid), 0.0};
    NlsSolver solver(grid, -0.5, -1.0, 1e-2, 0.9);
    EXPECT_THROW(solver.advance(s, 1.0, 1e-2), Blowup);
}

TEST(EnvelopeToLab, IdentityAtZeroTime) {
    const auto c = compute_coefficients(carrier);
    const ScalarGrid grid{128, 64.0};
    EnvelopeState s{grid, test_envelope(grid), 0.0};
    EXPECT_EQ(envelope_to_lab(s, 0.0, c), s.g1);
}

TEST(EnvelopeToLab, FullPeriodShiftReturnsField) {
    const auto c = compute_coefficients(carrier);
    const ScalarGrid grid{128, 64.0};
    EnvelopeState s{grid, test_envelope(grid), 0.0};
    const auto g = envelope_to_lab(s, grid.Ly / c.rho, c);
    for (int i = 0; i < grid.Ny; ++i) EXPECT_NEAR(std::abs(g[i] - s.g1[i]), 0.0, 1e-12);
}

TEST(EnvelopeToLab, TransportResidualVanishes) {
    const auto c = compute_coefficients(carrier);
    const ScalarGrid grid{256, 64.0};
    EnvelopeState s{grid, test_envelope(grid), 0.0};
    const double t = 1.3, h = 1e-3;
    const auto gp = envelope_to_lab(s, t + h, c), gm = envelope_to_lab(s, t - h, c), g0 = envelope_to_lab(s, t, c);
    Fft1D fft(grid.Ny);
    auto spec = fft.to_spectral(g0);
    for (int n = 0; n < grid.Ny; ++n) spec[n] *= I * wavenumber(n, grid);
    const auto dy = fft.to_physical(spec);
    double res = 0.0;
    for (int i = 0; i < grid.Ny; ++i) res = std::max(res, std::abs((gp[i] - gm[i]) / (2 * h) + c.rho * dy[i]));
    EXPECT_LT(res, 1e-6);  // central difference error O(h^2)
}

TEST(Assemble, ZeroEnvelopeGivesZeroLayers) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    const auto w = assemble(std::vector<cplx>(grid.Ny, 0.0), c, grid, 0.05);
    EXPECT_EQ(max_coeff(w.V0) + max_coeff(w.V1) + max_coeff(w.V2), 0.0);
}

TEST(Assemble, ConstantEnvelopeDropsDerivativeTerms) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    const cplx g0(0.3, -0.2);
    const auto w = assemble(std::vector<cplx>(grid.Ny, g0), c, grid, 0.05);
    EXPECT_LT((w.V1.at(1, 0)).norm(), 1e-15);
    EXPECT_LT((w.V2.at(1, 0) - std::norm(g0) * g0 * c.v21_cubic).norm(), 1e-15);
    EXPECT_LT((w.V0.at(1, 0) - g0 * c.W0).norm(), 1e-15);
}

TEST(Assemble, LayerStructure) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    const ScalarGrid sg{grid.Ny, grid.Ly};
    const auto g = test_envelope(sg);
    const auto w = assemble(g, c, grid, 0.05);
    const int nt = dealiased_theta_points(grid.P);
    // V0 = g W0 e^{i theta} + c.c. at theta = 0
    const auto v0 = to_physical(w.V0, nt);
    const auto v1 = to_physical(w.V1, nt);
    for (int i = 0; i < grid.Ny; ++i) {
        EXPECT_LT((v0[i] - 2.0 * (g[i] * c.W0).real().cast<cplx>()).norm(), 1e-13);
    }
    // V1 mean = mean_coeff n |g|^2
    const StateVector n = transparency_direction();
    Fft1D fft(grid.Ny);
    std::vector<cplx> mod2(grid.Ny);
    for (int i = 0; i < grid.Ny; ++i) mod2[i] = std::norm(g[i]);
    const auto spec = fft.to_spectral(mod2);
    for (int m = 0; m < grid.Ny; ++m) {
        if (!retained_mode(m, grid.Ny)) continue;
        EXPECT_LT((w.V1.at(0, m) - c.mean_coeff * spec[m] * n).norm(), 1e-15);
    }
    for (int p : {-1, 1})
        for (int m = 0; m < grid.Ny; ++m)
            for (int idx : pis_indices) EXPECT_LT(std::abs(w.V1.at(p, m)(idx)), 1e-15);
    for (const auto* v : {&w.V0, &w.V1, &w.V2}) {
        EXPECT_LT(reality_defect(*v), 1e-15);
        for (int p = -grid.P; p <= grid.P; ++p) {
            if (std::abs(p) <= 1) continue;
            for (int m = 0; m < grid.Ny; ++m) EXPECT_EQ(v->at(p, m).norm(), 0.0);
        }
    }
    (void)v1;
}

TEST(Assemble, CascadeOrdersVanish) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    const auto [w, wt] = layers_at(0.05, grid);
    ProfileProducts prod(grid);
    EXPECT_LT(max_coeff(apply_fast_operator(w.V0, carrier)), 1e-14);
    const ThetaProfile order0 =
        apply_transport(w.V0, c.rho) + apply_fast_operator(w.V1, carrier) - prod.bilinear(w.V0, w.V0);
    EXPECT_LT(max_coeff(order0), 1e-13);
    const ThetaProfile order1 = wt.V0 + apply_transport(w.V1, c.rho) + apply_fast_operator(w.V2, carrier) -
                                2.0 * prod.bilinear(w.V0, w.V1);
    EXPECT_LT(max_coeff(order1), 1e-12);
}

TEST(Assemble, MeanFieldSolvesSlowSystem) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    const ScalarGrid sg{grid.Ny, grid.Ly};
    const auto g = test_envelope(sg);
    const auto w = assemble(g, c, grid, 0.05);
    const Mat9 pi0 = harmonic_matrix_of(0, carrier.omega, carrier.k).pip;
    const Mat9 pap = pi0 * SystemMatrices::get().A1.cast<cplx>() * pi0;
    Fft1D fft(grid.Ny);
    std::vector<cplx> mod2(grid.Ny);
    for (int i = 0; i < grid.Ny; ++i) mod2[i] = std::norm(g[i]);
    const auto spec = fft.to_spectral(mod2);
    const double k = carrier.k, om = carrier.omega;
    const double k0_coeff = 4.0 * k * carrier.delta / (om * om) * (1.0 - k * c.rho / om);
    ProfileProducts prod(grid);
    const ThetaProfile b01 = prod.bilinear(w.V0, w.V1);
    for (int m = 0; m < grid.Ny; ++m) {
        if (!retained_mode(m, grid.Ny)) continue;
        const cplx dy = I * wavenumber(m, grid);
        StateVector source = StateVector::Zero();
        source(3) = k0_coeff * dy * spec[m];
        source(6) = -source(3);
        const StateVector lhs = dy * (pap * w.V1.at(0, m) - c.rho * w.V1.at(0, m));
        EXPECT_LT((lhs - source).norm(), 1e-14);
        // 2 pi0 B(V0, V1) at p = 0 produces the same source
        EXPECT_LT((2.0 * (pi0 * b01.at(0, m)) - source).norm(), 1e-13);
    }
}

TEST(Assemble, FCancellation) {
    const auto c = compute_coefficients(carrier);
    const ScalarGrid sg{128, 64.0};
    const auto g = test_envelope(sg);
    Fft1D fft(sg.Ny);
    auto spec = fft.to_spectral(g);
    for (int n = 0; n < sg.Ny; ++n) spec[n] *= I * wavenumber(n, sg);
    const auto dg = fft.to_physical(spec);
    for (int i = 0; i < sg.Ny; ++i) {
        const cplx f = I * c.mu * dg[i];
        EXPECT_LT(std::abs(std::conj(f) * dg[i] + f * std::conj(dg[i])), 1e-15);
    }
}

TEST(Remainder, SlowPartOfLeadingRemainderVanishes) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    const auto [w, wt] = layers_at(0.05, grid);
    const auto r = remainder(w, wt, c);
    EXPECT_LT(max_coeff(project_pis(r.R0)), 1e-12);
    EXPECT_GT(max_coeff(project_pi0(r.R0)), 1e-4);
    // The product-only remainder keeps the slow part -d_tau V1, which is O(1) in eps.
    EXPECT_GT(max_coeff(project_pis(r.products)), 1e-6);
    EXPECT_LT(max_coeff(project_pis(r.products + wt.V1)), 1e-12);
}

TEST(Remainder, ResidualIdentity) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    for (double eps : {0.08, 0.02}) {
        const auto [w, wt] = layers_at(eps, grid);
        const ThetaProfile res = profile_residual(w, wt, c, carrier);
        const ThetaProfile rem = remainder(w, wt, c).total(eps);
        EXPECT_LT(max_coeff(res - (eps * eps) * rem), 1e-12 * std::max(1.0, 1.0 / eps));
    }
}

TEST(Remainder, ScalingWithEps) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    auto norms = [&](double eps) {
        const auto [w, wt] = layers_at(eps, grid);
        const ThetaProfile rem = remainder(w, wt, c).total(eps);
        const int nt = dealiased_theta_points(grid.P);
        return std::pair{sup_norm_components(rem, pi0_indices, nt), sup_norm_components(rem, pis_indices, nt)};
    };
    const auto [a0, as] = norms(0.02);
    const auto [b0, bs] = norms(0.01);
    EXPECT_NEAR(as / bs, 2.0, 0.4);
    EXPECT_NEAR(a0 / b0, 1.0, 0.2);
}

TEST(InitialData, PreparedHasNoSlowDefect) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    const auto a0 = test_envelope({grid.Ny, grid.Ly});
    const auto d = initial_data(a0, Preparation::prepared, 0.05, c, grid);
    EXPECT_LT(max_coeff(project_pis(d.b)), 1e-12);
    EXPECT_GT(max_coeff(project_pi0(d.b)), 1e-3);  // the oscillating corrector is left in b
    EXPECT_LT(max_coeff(d.b1 - d.wkb.V2), 1e-15);
    const auto full = initial_data(a0, Preparation::prepared_full, 0.05, c, grid);
    EXPECT_EQ(max_coeff(full.b), 0.0);
}

TEST(InitialData, UnpreparedDefectIsFirstCorrector) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    const auto a0 = test_envelope({grid.Ny, grid.Ly});
    const auto d = initial_data(a0, Preparation::unprepared, 0.05, c, grid);
    EXPECT_EQ(max_coeff(d.b - d.wkb.V1), 0.0);
    EXPECT_GT(max_coeff(project_pis(d.b)), 1e-3);
    EXPECT_LT(max_coeff(d.exact - d.wkb.V0), 1e-15);
}

TEST(InitialData, ZeroAmplitude) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    ThetaProfile a2(grid, 0.05);
    a2.at(0, 3)(0) = 1.0;
    a2.at(0, grid.Ny - 3)(0) = 1.0;
    const auto d = initial_data(std::vector<cplx>(grid.Ny, 0.0), Preparation::prepared, 0.05, c, grid, nullptr, &a2);
    EXPECT_EQ(max_coeff(approximate_profile(d.wkb)), 0.0);
    EXPECT_LT(max_coeff(d.exact - 0.0025 * a2), 1e-18);
}

TEST(InitialData, CustomRequiresCorrector) {
    const auto c = compute_coefficients(carrier);
    const Grid grid = small_grid();
    EXPECT_THROW(initial_data(std::vector<cplx>(grid.Ny, 0.0), Preparation::custom, 0.05, c, grid), ConfigError);
}
