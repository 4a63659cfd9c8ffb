#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "core_algebra.hpp"

namespace mll {

inline constexpr double degeneracy_gap = 1e-9;

// Indices carrying the y,z components of E, H, M: the range of Pi_0.
inline constexpr std::array<int, 6> pi0_indices{1, 2, 4, 5, 7, 8};
inline constexpr std::array<int, 3> pis_indices{0, 3, 6};

inline Mat9 pi0_total() {
    Mat9 p = Mat9::Zero();
    for (int i : pi0_indices) p(i, i) = 1.0;
    return p;
}

inline Mat9 pis_total() {
    Mat9 p = Mat9::Zero();
    for (int i : pis_indices) p(i, i) = 1.0;
    return p;
}

// A(e1) xi + L0 / i
inline Mat9 symbol_matrix(double xi) {
    const auto& s = SystemMatrices::get();
    Mat9 h = xi * s.A1.cast<cplx>();
    h += -I * s.L0.cast<cplx>();
    return h;
}

inline constexpr int branch_sign(int j) { return (j % 2 == 0) ? 1 : -1; }

// Eigenpairs of the symbol on range Pi_0, sorted descending: entry j-1 is branch j.
struct BranchEigen {
    double xi{};
    std::array<double, 6> lambda{};
    std::array<StateVector, 6> vec{};
};

inline BranchEigen branch_eigen(double xi) {
    const Mat9 h = symbol_matrix(xi);
    Eigen::Matrix<cplx, 6, 6> hr;
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) hr(a, b) = h(pi0_indices[a], pi0_indices[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<cplx, 6, 6>> es(hr);
    BranchEigen be;
    be.xi = xi;
    for (int j = 0; j < 6; ++j) {
        const int col = 5 - j;
        be.lambda[j] = es.eigenvalues()(col);
        StateVector v = StateVector::Zero();
        for (int a = 0; a < 6; ++a) v(pi0_indices[a]) = es.eigenvectors()(a, col);
        be.vec[j] = v;
    }
    return be;
}

struct SpectralGroup {
    double lambda{};
    Mat9 projector;
    std::vector<int> branches;  // 1-based branch labels
};

struct EigenDecomposition {
    double xi{};
    std::array<double, 9> lambdas{};  // lambda_7..9 = 0 on range Pi_s
    std::vector<SpectralGroup> groups;
    std::array<int, 9> group_of{};   // branch j -> index into groups
    Mat9 pi0;
    Mat9 pis;

    // Projector of the group containing branch j (merged when degenerate).
    const Mat9& projector(int j) const { return groups[group_of[j - 1]].projector; }
    bool merged(int j) const { return groups[group_of[j - 1]].branches.size() > 1; }
};

inline EigenDecomposition decompose(double xi) {
    const BranchEigen be = branch_eigen(xi);
    EigenDecomposition d;
    d.xi = xi;
    d.pi0 = pi0_total();
    d.pis = pis_total();
    for (int j = 0; j < 6; ++j) d.lambdas[j] = be.lambda[j];
    for (int j = 6; j < 9; ++j) d.lambdas[j] = 0.0;

    int j = 0;
    while (j < 6) {
        SpectralGroup g;
        g.lambda = be.lambda[j];
        g.projector = Mat9::Zero();
        int last = j;
        while (last + 1 < 6 && std::abs(be.lambda[last] - be.lambda[last + 1]) < degeneracy_gap) ++last;
        double sum = 0.0;
        for (int q = j; q <= last; ++q) {
            g.projector += be.vec[q] * be.vec[q].adjoint();
            g.branches.push_back(q + 1);
            sum += be.lambda[q];
            d.group_of[q] = int(d.groups.size());
        }
        g.lambda = sum / double(last - j + 1);
        d.groups.push_back(std::move(g));
        j = last + 1;
    }
    for (int q = 0; q < 3; ++q) {
        SpectralGroup g;
        g.lambda = 0.0;
        g.projector = Mat9::Zero();
        g.projector(pis_indices[q], pis_indices[q]) = 1.0;
        g.branches.push_back(7 + q);
        d.group_of[6 + q] = int(d.groups.size());
        d.groups.push_back(std::move(g));
    }
    return d;
}

inline Vec3 omega_vector(int delta) { return Vec3(0.0, I * double(delta), 1.0); }

// Ratio xi/lambda on a nonzero branch; at xi = 0 the limit from xi > 0 is used.
inline double branch_ratio(double xi, double lambda, int j) {
    const int delta = branch_sign(j);
    if (std::abs(lambda) >= 1e-4) return xi / lambda;
    const double r = std::sqrt((lambda + 2.0 * delta) / (lambda + delta));
    double sign = (xi > 0.0) == (lambda > 0.0) ? 1.0 : -1.0;
    if (xi == 0.0 || lambda == 0.0) sign = (j <= 3) ? 1.0 : -1.0;
    return sign * r;
}

inline StateVector branch_vector_from(double xi, double lambda, int j) {
    const int delta = branch_sign(j);
    const double r = branch_ratio(xi, lambda, j);
    const double gamma = 1.0 - r * r;
    const Vec3 om = omega_vector(delta);
    return make_state((-I * double(delta) * r) * om, om, -gamma * om);
}

inline double branch_gamma(double xi, double lambda, int j) {
    const double r = branch_ratio(xi, lambda, j);
    return 1.0 - r * r;
}

inline StateVector branch_vector(double xi, int j) {
    if (j < 1 || j > 6) throw ZeroEigenvalue("branch index must be in 1..6");
    const double lambda = branch_eigen(xi).lambda[j - 1];
    if (std::abs(lambda) < degeneracy_gap)
        throw ZeroEigenvalue("branch " + std::to_string(j) + " has zero eigenvalue at xi = " + std::to_string(xi));
    return branch_vector_from(xi, lambda, j);
}

struct VarietyRow {
    double xi{};
    std::array<double, 6> lambda{};
};

inline std::vector<VarietyRow> char_variety_sample(const std::vector<double>& xi_grid) {
    std::vector<VarietyRow> rows;
    rows.reserve(xi_grid.size());
    for (double xi : xi_grid) rows.push_back({xi, branch_eigen(xi).lambda});
    return rows;
}

struct KernelBasis {
    StateVector W0;
    Vec3 Omega0;
};

inline KernelBasis kernel_basis(const Phase& ph) {
    KernelBasis kb;
    kb.Omega0 = omega_vector(ph.delta);
    kb.W0 = make_state((-I * double(ph.delta) * ph.k / ph.omega) * kb.Omega0, kb.Omega0, -ph.gamma * kb.Omega0);
    return kb;
}

}  // namespace mll
