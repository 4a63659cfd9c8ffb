#pragma once

#include <cmath>

#include <Eigen/SVD>

#include "errors.hpp"
#include "phase.hpp"
#include "state.hpp"

namespace mll {

// Singular values below rank_tolerance * sigma_max count as zero; values
// between the two band edges are too close to call and are reported.
inline constexpr double rank_tolerance = 1e-9;
inline constexpr double ambiguous_band_low = 1e-12;
inline constexpr double ambiguous_band_high = 1e-6;

namespace detail {

// Matrix of v -> e1 x v.
inline Eigen::Matrix3d cross_e1() {
    Eigen::Matrix3d c;
    c << 0, 0, 0,
         0, 0, -1,
         0, 1, 0;
    return c;
}

}  // namespace detail

struct SystemMatrices {
    RealMat9 A1;  // A(e1), symmetric
    RealMat9 L0;  // skew-symmetric

    static const SystemMatrices& get() {
        static const SystemMatrices instance = build();
        return instance;
    }

private:
    static SystemMatrices build() {
        const Eigen::Matrix3d c = detail::cross_e1();
        SystemMatrices s;
        s.A1.setZero();
        s.A1.block<3, 3>(0, 3) = -c;
        s.A1.block<3, 3>(3, 0) = c;
        s.L0.setZero();
        s.L0.block<3, 3>(3, 3) = -c;
        s.L0.block<3, 3>(3, 6) = c;
        s.L0.block<3, 3>(6, 3) = c;
        s.L0.block<3, 3>(6, 6) = -c;
        return s;
    }
};

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return Vec3(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
}

inline StateVector apply_A(const StateVector& u) {
    const Vec3 e1 = unit3(0);
    return make_state(-cross(e1, h_part(u)), cross(e1, e_part(u)), Vec3::Zero());
}

inline StateVector apply_L0(const StateVector& u) {
    const Vec3 e1 = unit3(0);
    const Vec3 x = cross(e1, m_part(u)) - cross(e1, h_part(u));
    return make_state(Vec3::Zero(), x, -x);
}

// Symmetric and complex bilinear (no conjugation).
inline StateVector bilinear_B(const StateVector& u, const StateVector& v) {
    const Vec3 x = 0.5 * (cross(m_part(u), h_part(v)) + cross(m_part(v), h_part(u)));
    return make_state(Vec3::Zero(), x, -x);
}

// -i p omega + i p k A(e1) + L0
inline Mat9 harmonic_operator(int p, double omega, double k) {
    const auto& s = SystemMatrices::get();
    Mat9 l = s.L0.cast<cplx>();
    l += (I * double(p) * k) * s.A1.cast<cplx>();
    l.diagonal().array() -= I * double(p) * omega;
    return l;
}

struct HarmonicMatrix {
    int p{};
    double omega{};
    double k{};
    Mat9 Lp;
    Mat9 pip;      // orthogonal projector onto ker Lp
    Mat9 Lp_pinv;  // inverse on (ker Lp)^perp, zero on ker Lp
    int kernel_dim{};
};

inline HarmonicMatrix harmonic_matrix_of(int p, double omega, double k) {
    HarmonicMatrix hm;
    hm.p = p;
    hm.omega = omega;
    hm.k = k;
    hm.Lp = harmonic_operator(p, omega, k);
    Eigen::JacobiSVD<Mat9> svd(hm.Lp, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    hm.pip.setZero();
    hm.Lp_pinv.setZero();
    for (int i = 0; i < 9; ++i) {
        const double rel = smax > 0.0 ? sv(i) / smax : 0.0;
        if (rel > ambiguous_band_low && rel < ambiguous_band_high)
            throw DegenerateKernel("singular value " + std::to_string(sv(i)) +
                                   " lies in the ambiguous rank band");
        const auto vi = svd.matrixV().col(i);
        if (rel < rank_tolerance) {
            hm.pip += vi * vi.adjoint();
            ++hm.kernel_dim;
        } else {
            hm.Lp_pinv += vi * (1.0 / sv(i)) * svd.matrixU().col(i).adjoint();
        }
    }
    return hm;
}

inline HarmonicMatrix harmonic_matrix(int p, const Phase& phase) {
    return harmonic_matrix_of(p, phase.omega, phase.k);
}

}  // namespace mll
