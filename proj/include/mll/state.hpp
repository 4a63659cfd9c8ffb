#pragma once

#include <complex>

#include <Eigen/Dense>

namespace mll {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};

using Vec3 = Eigen::Matrix<cplx, 3, 1>;
// Pointwise unknown (E, H, M), grouped as three consecutive 3-vectors.
using StateVector = Eigen::Matrix<cplx, 9, 1>;
using Mat9 = Eigen::Matrix<cplx, 9, 9>;
using RealMat9 = Eigen::Matrix<double, 9, 9>;

inline auto e_part(StateVector& u) { return u.segment<3>(0); }
inline auto h_part(StateVector& u) { return u.segment<3>(3); }
inline auto m_part(StateVector& u) { return u.segment<3>(6); }
inline auto e_part(const StateVector& u) { return u.segment<3>(0); }
inline auto h_part(const StateVector& u) { return u.segment<3>(3); }
inline auto m_part(const StateVector& u) { return u.segment<3>(6); }

inline StateVector make_state(const Vec3& e, const Vec3& h, const Vec3& m) {
    StateVector u;
    u << e, h, m;
    return u;
}

inline Vec3 unit3(int axis) {
    Vec3 v = Vec3::Zero();
    v(axis) = 1.0;
    return v;
}

// (0, -e1, e1): the direction spanned by every Pi_s B output.
inline StateVector transparency_direction() {
    return make_state(Vec3::Zero(), -unit3(0), unit3(0));
}

}  // namespace mll
