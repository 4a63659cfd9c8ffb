#pragma once

#include <cmath>

#include "errors.hpp"

namespace mll {

// Carrier (omega, k) on the branch with sign delta.
struct Phase {
    double omega{};
    double k{};
    int delta{1};
    double gamma{};  // 1 - k^2/omega^2
};

// Branch dispersion relation: k^2 = (omega + 2 delta)/(omega + delta) omega^2.
inline double dispersion_k2(double omega, int delta) {
    return (omega + 2.0 * delta) / (omega + delta) * omega * omega;
}

inline Phase solve_phase(double omega, int delta) {
    if (delta != 1 && delta != -1) throw InvalidBranch("branch sign must be +1 or -1");
    if (omega == 0.0) throw ZeroFrequency("carrier frequency omega must be nonzero");
    if (omega + delta == 0.0) throw InvalidBranch("omega = -delta makes the dispersion relation singular");
    const double k2 = dispersion_k2(omega, delta);
    if (!(k2 > 0.0) || !std::isfinite(k2)) throw InvalidBranch("dispersion radicand is not positive");
    Phase ph;
    ph.omega = omega;
    ph.k = std::sqrt(k2);
    ph.delta = delta;
    ph.gamma = 1.0 - k2 / (omega * omega);
    return ph;
}

// Branch sign recovered from (omega, k).
inline double branch_sign_from(const Phase& ph) {
    const double q = ph.k * ph.k / (ph.omega * ph.omega);
    return -ph.omega * (1.0 - q) / (2.0 - q);
}

}  // namespace mll
