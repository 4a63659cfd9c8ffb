#include <gtest/gtest.h>

#include <random>

#include "mll/core_algebra.hpp"
#include "mll/spectral.hpp"
#include "oracles.hpp"

using namespace mll;

namespace {

StateVector basis_state(int block, const Vec3& v) {
    StateVector u = StateVector::Zero();
    u.segment<3>(3 * block) = v;
    return u;
}

}  // namespace

TEST(ApplyA, CrossOfE1WithItselfVanishes) {
    EXPECT_EQ(apply_A(basis_state(0, unit3(0))).norm(), 0.0);
}

TEST(ApplyA, MagneticE2MapsToMinusE3) {
    const StateVector out = apply_A(basis_state(1, unit3(1)));
    EXPECT_EQ(out, basis_state(0, -unit3(2)));
}

TEST(ApplyA, SymmetricOnRandomPairs) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        const StateVector u = oracle::random_state(rng), v = oracle::random_state(rng);
        EXPECT_NEAR(std::abs(apply_A(u).dot(v) - u.dot(apply_A(v))), 0.0, 1e-13);
    }
    const auto& s = SystemMatrices::get();
    EXPECT_EQ((s.A1 - s.A1.transpose()).norm(), 0.0);
}

TEST(ApplyL0, EqualHAndMIsKernel) {
    std::mt19937_64 rng(2);
    StateVector u = oracle::random_state(rng);
    u.segment<3>(6) = u.segment<3>(3);
    EXPECT_EQ(apply_L0(u).norm(), 0.0);
}

TEST(ApplyL0, CircularStateIsEigenvectorWithEigenvalueTwo) {
    const Vec3 c = unit3(1) + I * unit3(2);
    const StateVector u = make_state(Vec3::Zero(), c, -c);
    EXPECT_LT((apply_L0(u) - 2.0 * I * u).norm(), 1e-15);
}

TEST(ApplyL0, SkewSymmetricOnRandomPairs) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        const StateVector u = oracle::random_state(rng), v = oracle::random_state(rng);
        EXPECT_NEAR(std::abs(apply_L0(u).dot(v) + u.dot(apply_L0(v))), 0.0, 1e-13);
    }
    const auto& s = SystemMatrices::get();
    EXPECT_EQ((s.L0 + s.L0.transpose()).norm(), 0.0);
}

TEST(ApplyOperators, MatchMatrixForms) {
    std::mt19937_64 rng(4);
    const auto& s = SystemMatrices::get();
    const StateVector u = oracle::random_state(rng);
    EXPECT_LT((apply_A(u) - s.A1.cast<cplx>() * u).norm(), 1e-15);
    EXPECT_LT((apply_L0(u) - s.L0.cast<cplx>() * u).norm(), 1e-15);
}

TEST(BilinearB, ZeroArgument) {
    std::mt19937_64 rng(5);
    EXPECT_EQ(bilinear_B(oracle::random_state(rng), StateVector::Zero()).norm(), 0.0);
}

TEST(BilinearB, HandComputedValue) {
    StateVector u = StateVector::Zero();
    u.segment<3>(3) = unit3(1);
    u.segment<3>(6) = unit3(2);
    EXPECT_EQ(bilinear_B(u, u), transparency_direction());
}

TEST(BilinearB, SymmetricExactly) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
        const StateVector u = oracle::random_state(rng), v = oracle::random_state(rng);
        EXPECT_EQ(bilinear_B(u, v), bilinear_B(v, u));
    }
}

TEST(BilinearB, KernelGeneratorAgainstConjugate) {
    const Phase ph = solve_phase(2.0, 1);
    const StateVector w0 = kernel_basis(ph).W0;
    EXPECT_LT(bilinear_B(w0, w0.conjugate()).norm(), 1e-15);
    EXPECT_LT(bilinear_B(w0, w0).norm(), 1e-15);
}

TEST(HarmonicMatrix, Pi0MatchesBlockForm) {
    const HarmonicMatrix h0 = harmonic_matrix(0, solve_phase(2.0, 1));
    EXPECT_LE((h0.pip - oracle::pi0_blocks()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(h0.kernel_dim, 7);
}

TEST(HarmonicMatrix, KernelOfL0SpannedByListedGenerators) {
    const HarmonicMatrix h0 = harmonic_matrix(0, solve_phase(2.0, 1));
    for (const auto& g : oracle::kernel_generators_L0()) {
        EXPECT_LT(apply_L0(g).norm(), 1e-15);
        EXPECT_LT((h0.pip * g - g).norm(), 1e-14);
    }
}

TEST(HarmonicMatrix, Pi1IsRankOneProjectorOnW0) {
    const Phase ph = solve_phase(2.0, 1);
    const HarmonicMatrix h1 = harmonic_matrix(1, ph);
    const StateVector w0 = kernel_basis(ph).W0;
    EXPECT_EQ(h1.kernel_dim, 1);
    const Mat9 expected = w0 * w0.adjoint() / w0.squaredNorm();
    EXPECT_LT((h1.pip - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(harmonic_matrix(-1, ph).kernel_dim, 1);
}

TEST(HarmonicMatrix, HigherHarmonicsInvertible) {
    const Phase ph = solve_phase(2.0, 1);
    for (int p : {2, -2, 3, -3}) {
        const HarmonicMatrix h = harmonic_matrix(p, ph);
        EXPECT_EQ(h.kernel_dim, 0);
        EXPECT_EQ(h.pip.norm(), 0.0);
        EXPECT_LT((h.Lp_pinv - h.Lp.inverse()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(HarmonicMatrix, PartialInverseIdentities) {
    for (double omega : {2.0, 0.5, -3.0}) {
        for (int delta : {1, -1}) {
            Phase ph;
            try {
                ph = solve_phase(omega, delta);
            } catch (const InvalidBranch&) {
                continue;
            }
            for (int p = -4; p <= 4; ++p) {
                const HarmonicMatrix h = harmonic_matrix(p, ph);
                const Mat9 id = Mat9::Identity();
                EXPECT_LE((h.pip * h.Lp_pinv).norm(), 1e-12);
                EXPECT_LE((h.Lp_pinv * h.pip).norm(), 1e-12);
                EXPECT_LE((h.Lp * h.Lp_pinv - (id - h.pip)).norm(), 1e-12);
                EXPECT_LE((h.Lp_pinv * h.Lp - (id - h.pip)).norm(), 1e-12);
                EXPECT_LE((h.pip * h.pip - h.pip).norm(), 1e-12);
                EXPECT_LE((h.pip - h.pip.adjoint()).norm(), 1e-14);
            }
        }
    }
}

TEST(HarmonicMatrix, WeakTransparencyOnRandomPairs) {
    const Phase ph = solve_phase(2.0, 1);
    std::mt19937_64 rng(7);
    for (int p : {1, -1}) {
        const HarmonicMatrix h = harmonic_matrix(p, ph);
        for (int t = 0; t < 100; ++t) {
            const StateVector u = h.pip * oracle::random_state(rng), v = h.pip * oracle::random_state(rng);
            EXPECT_LE(bilinear_B(u, v).norm(), 1e-13);
        }
    }
}

TEST(HarmonicMatrix, AmbiguousRankIsReported) {
    // The dispersion relation perturbed by ~1e-8 leaves a singular value inside the ambiguous band.
    const Phase ph = solve_phase(2.0, 1);
    EXPECT_THROW(harmonic_matrix_of(1, ph.omega, ph.k * (1.0 + 1e-8)), DegenerateKernel);
}
