#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "core_algebra.hpp"
#include "fft.hpp"
#include "profile.hpp"
#include "spectral.hpp"

namespace mll {

// Coefficients of the WKB cascade. nu2 and mean_coeff are the values the cascade
// equations impose; `closed_form` keeps the reference closed-form expressions for comparison.
struct WkbCoefficients {
    double rho{};         // group velocity
    double nu{};          // |W0|^2 / 2
    double nu1{}, nu2{};  // d_tau g + i nu1 d_y^2 g = i nu2 g |g|^2
    double mean_coeff{};  // V10 = mean_coeff (0, -e1, e1) |g|^2
    double mu{};          // f = i mu d_y g
    double nu3{}, nu4{};  // E21, M21 coefficients of d_y^2 g along Omega0 (E21 carries i nu3)
    double nu_h{};        // H21 coefficient of d_y^2 g along Omega0
    cplx cubic_e{}, cubic_h{}, cubic_m{};  // V21 coefficients of g|g|^2 along Omega0

    StateVector W0;
    StateVector X;          // V11 = f W0 + d_y g X
    StateVector v21_disp;   // V21 = v21_disp d_y^2 g + v21_cubic g|g|^2
    StateVector v21_cubic;

    struct ClosedForm {
        double rho{}, nu1{}, nu2{}, mean_coeff{};
    } closed_form;
};

namespace detail {

inline cplx along(const Vec3& v, const Vec3& dir) { return dir.dot(v) / dir.squaredNorm(); }

}  // namespace detail

inline WkbCoefficients compute_coefficients(const Phase& ph) {
    const double w = ph.omega, k = ph.k, g = ph.gamma;
    const int d = ph.delta;
    const auto& sys = SystemMatrices::get();
    const Mat9 A = sys.A1.cast<cplx>();
    const KernelBasis kb = kernel_basis(ph);
    const HarmonicMatrix L1 = harmonic_matrix(1, ph);
    const StateVector nvec = transparency_direction();

    WkbCoefficients c;
    c.W0 = kb.W0;
    const double w0n2 = kb.W0.squaredNorm();
    c.nu = 0.5 * w0n2;
    c.rho = std::real(kb.W0.dot(A * kb.W0)) / w0n2;
    const Mat9 Ashift = A - c.rho * Mat9::Identity();

    const double kr = k * c.rho / w;
    c.X = make_state((d / w * (kr - 1.0)) * kb.Omega0, Vec3::Zero(), (2.0 * I * k / (w * w) * (kr - 1.0)) * kb.Omega0);

    // Mean field: 2[B(V01, conj V11) + c.c.] = 2 c d_y|g|^2 n balances -rho m d_y|g|^2 n.
    const cplx cmean = -bilinear_B(kb.W0.conjugate(), c.X)(3);
    c.mean_coeff = -2.0 * std::real(cmean) / c.rho;

    c.nu1 = std::real(-I * kb.W0.dot(Ashift * c.X) / w0n2);
    const StateVector bwn = bilinear_B(kb.W0, nvec);
    c.nu2 = std::real(-2.0 * I * c.mean_coeff * kb.W0.dot(bwn) / w0n2);

    const StateVector a0 = -(L1.Lp_pinv * (Ashift * c.X));
    const StateVector a1 = -I * (L1.Lp_pinv * (Ashift * kb.W0));
    c.v21_cubic = 2.0 * c.mean_coeff * (L1.Lp_pinv * bwn);

    // Zero p = 0 Pi_s residual at order eps^2: Im x(W0bar, v21_disp) = mean_coeff nu1 / 2,
    // with x the first component of the H-slot of B.
    const double s0 = std::imag(bilinear_B(kb.W0.conjugate(), a0)(3));
    const double s1 = std::imag(bilinear_B(kb.W0.conjugate(), a1)(3));
    c.mu = (0.5 * c.mean_coeff * c.nu1 - s0) / s1;
    c.v21_disp = a0 + c.mu * a1;

    c.nu3 = std::imag(detail::along(e_part(c.v21_disp), kb.Omega0));
    c.nu_h = std::real(detail::along(h_part(c.v21_disp), kb.Omega0));
    c.nu4 = std::real(detail::along(m_part(c.v21_disp), kb.Omega0));
    c.cubic_e = detail::along(e_part(c.v21_cubic), kb.Omega0);
    c.cubic_h = detail::along(h_part(c.v21_cubic), kb.Omega0);
    c.cubic_m = detail::along(m_part(c.v21_cubic), kb.Omega0);

    const double q = k * k / (w * w);
    c.closed_form.rho = 2.0 * k / w / (1.0 + q + g * g);
    const double krp = k * c.closed_form.rho / w;
    c.closed_form.nu1 = 1.0 / (c.nu * w) * (krp * (1.0 - 2.0 * g) - 1.0) * (1.0 - krp);
    c.closed_form.mean_coeff = 4.0 * k * d / (w * c.closed_form.rho) * (1.0 - krp);
    c.closed_form.nu2 = 4.0 * k / (w * c.closed_form.rho) * (1.0 - krp) * (1.0 - g * g);
    return c;
}

// Periodic scalar field sampled on y_i = i Ly / Ny.
struct ScalarGrid {
    int Ny{256};
    double Ly{64.0};
};

struct EnvelopeState {
    ScalarGrid grid;
    std::vector<cplx> g1;  // moving-frame envelope g1(tau, z)
    double tau{};
};

inline double wavenumber(int n, const ScalarGrid& g) { return 2.0 * std::numbers::pi * signed_mode(n, g.Ny) / g.Ly; }

inline double sup_abs(const std::vector<cplx>& f) {
    double m = 0.0;
    for (auto z : f) m = std::max(m, std::abs(z));
    return m;
}

inline double discrete_mass(const EnvelopeState& s) {
    double m = 0.0;
    for (auto z : s.g1) m += std::norm(z);
    return m * s.grid.Ly / s.grid.Ny;
}

// Strang split-step integrator for d_tau g + i nu1 d_z^2 g = i nu2 g |g|^2.
class NlsSolver {
public:
    NlsSolver(const ScalarGrid& grid, double nu1, double nu2, double max_dtau = 1e-2, double blowup_factor = 10.0)
        : grid_(grid), nu1_(nu1), nu2_(nu2), max_dtau_(max_dtau), blowup_factor_(blowup_factor), fft_(grid.Ny) {}

    double max_dtau() const { return max_dtau_; }

    void step(EnvelopeState& s, double dtau) {
        if (!(dtau > 0.0) || dtau > max_dtau_) throw StepTooLarge("NLS sub-step exceeds the configured maximum");
        if (!reference_sup_) reference_sup_ = sup_abs(s.g1);
        linear(s.g1, 0.5 * dtau);
        for (auto& z : s.g1) z *= std::exp(I * (nu2_ * std::norm(z) * dtau));
        linear(s.g1, 0.5 * dtau);
        s.tau += dtau;
        if (sup_abs(s.g1) > blowup_factor_ * std::max(*reference_sup_, 1e-300))
            throw Blowup("envelope sup-norm exceeded the horizon guard");
    }

    // Advance to tau_target with equal sub-steps no larger than dtau.
    void advance(EnvelopeState& s, double tau_target, double dtau) {
        const double span = tau_target - s.tau;
        if (span <= 0.0) return;
        const int n = std::max(1, int(std::ceil(span / dtau - 1e-9)));
        const double h = span / n;
        for (int i = 0; i < n; ++i) step(s, h);
        s.tau = tau_target;
    }

    // Right-hand side -i nu1 g'' + i nu2 g |g|^2 evaluated spectrally.
    std::vector<cplx> rhs(const std::vector<cplx>& g) {
        auto c = fft_.to_spectral(g);
        for (int n = 0; n < grid_.Ny; ++n) {
            const double eta = wavenumber(n, grid_);
            c[n] *= I * nu1_ * eta * eta;
        }
        auto out = fft_.to_physical(c);
        for (std::size_t i = 0; i < g.size(); ++i) out[i] += I * nu2_ * g[i] * std::norm(g[i]);
        return out;
    }

private:
    void linear(std::vector<cplx>& g, double h) {
        auto c = fft_.to_spectral(g);
        for (int n = 0; n < grid_.Ny; ++n) {
            const double eta = wavenumber(n, grid_);
            c[n] *= std::exp(I * (nu1_ * eta * eta * h));
        }
        g = fft_.to_physical(c);
    }

    ScalarGrid grid_;
    double nu1_, nu2_, max_dtau_, blowup_factor_;
    Fft1D fft_;
    std::optional<double> reference_sup_;
};

inline EnvelopeState nls_evolve(EnvelopeState state, double dtau, const WkbCoefficients& c, double max_dtau = 1e-2) {
    NlsSolver solver(state.grid, c.nu1, c.nu2, max_dtau);
    solver.step(state, dtau);
    return state;
}

// Spectral translate: returns f(y - shift).
inline std::vector<cplx> spectral_shift(const std::vector<cplx>& f, const ScalarGrid& grid, double shift) {
    Fft1D fft(grid.Ny);
    auto c = fft.to_spectral(f);
    for (int n = 0; n < grid.Ny; ++n) {
        if (2 * std::abs(signed_mode(n, grid.Ny)) == grid.Ny) {
            c[n] *= std::cos(wavenumber(n, grid) * shift);  // Nyquist mode kept real
            continue;
        }
        c[n] *= std::exp(-I * (wavenumber(n, grid) * shift));
    }
    return fft.to_physical(c);
}

// g(tau, t, y) = g1(tau, y - rho t)
inline std::vector<cplx> envelope_to_lab(const EnvelopeState& s, double t, const WkbCoefficients& c) {
    if (t == 0.0) return s.g1;
    return spectral_shift(s.g1, s.grid, c.rho * t);
}

// Layers of V^a = V0 + eps V1 + eps^2 V2 on a theta-grid with P >= 1.
struct WkbProfile {
    ThetaProfile V0, V1, V2;
    double eps{};
};

inline ThetaProfile approximate_profile(const WkbProfile& w) {
    return w.V0 + w.eps * w.V1 + (w.eps * w.eps) * w.V2;
}

namespace detail {

struct EnvelopeSpectra {
    std::vector<cplx> g, dg, d2g, mod2, cubic;  // spectral coefficients
};

inline void truncate(std::vector<cplx>& c, int ny) {
    for (int n = 0; n < ny; ++n)
        if (!retained_mode(n, ny)) c[n] = 0.0;
}

inline EnvelopeSpectra envelope_spectra(const std::vector<cplx>& g, const ScalarGrid& grid, Fft1D& fft) {
    EnvelopeSpectra s;
    s.g = fft.to_spectral(g);
    truncate(s.g, grid.Ny);
    s.dg = s.g;
    s.d2g = s.g;
    for (int n = 0; n < grid.Ny; ++n) {
        const double eta = wavenumber(n, grid);
        s.dg[n] *= I * eta;
        s.d2g[n] *= -eta * eta;
    }
    std::vector<cplx> m2(g.size()), cu(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        m2[i] = std::norm(g[i]);
        cu[i] = g[i] * std::norm(g[i]);
    }
    s.mod2 = fft.to_spectral(m2);
    s.cubic = fft.to_spectral(cu);
    truncate(s.mod2, grid.Ny);
    truncate(s.cubic, grid.Ny);
    return s;
}

// Place a p = +1 coefficient field and its mirror at p = -1; p = 0 fields are placed as given.
inline void put_harmonic_one(ThetaProfile& v, int n, const StateVector& c) {
    const int ny = v.Ny();
    v.at(1, n) += c;
    v.at(-1, fft_index(-signed_mode(n, ny), ny)) += c.conjugate();
}

}  // namespace detail

inline WkbProfile build_layers(const detail::EnvelopeSpectra& s, const WkbCoefficients& c, const Grid& grid,
                               double eps) {
    if (grid.P < 1) throw GridMismatch("WKB layers need at least one harmonic");
    WkbProfile w{ThetaProfile(grid, eps), ThetaProfile(grid, eps), ThetaProfile(grid, eps), eps};
    const StateVector nvec = transparency_direction();
    const StateVector y11 = I * c.mu * c.W0 + c.X;
    for (int n = 0; n < grid.Ny; ++n) {
        detail::put_harmonic_one(w.V0, n, s.g[n] * c.W0);
        w.V1.at(0, n) = c.mean_coeff * s.mod2[n] * nvec;
        detail::put_harmonic_one(w.V1, n, s.dg[n] * y11);
        detail::put_harmonic_one(w.V2, n, s.d2g[n] * c.v21_disp + s.cubic[n] * c.v21_cubic);
    }
    return w;
}

// Layers from the lab-frame envelope g(y) sampled on the grid.
inline WkbProfile assemble(const std::vector<cplx>& g, const WkbCoefficients& c, const Grid& grid, double eps) {
    Fft1D fft(grid.Ny);
    const ScalarGrid sg{grid.Ny, grid.Ly};
    return build_layers(detail::envelope_spectra(g, sg, fft), c, grid, eps);
}

// Tau-derivative of the layers along the direction gdot = d_tau g.
inline WkbProfile assemble_tau_derivative(const std::vector<cplx>& g, const std::vector<cplx>& gdot,
                                          const WkbCoefficients& c, const Grid& grid, double eps) {
    Fft1D fft(grid.Ny);
    const ScalarGrid sg{grid.Ny, grid.Ly};
    detail::EnvelopeSpectra s = detail::envelope_spectra(gdot, sg, fft);
    std::vector<cplx> m2(g.size()), cu(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        m2[i] = 2.0 * std::real(std::conj(g[i]) * gdot[i]);
        cu[i] = 2.0 * std::norm(g[i]) * gdot[i] + g[i] * g[i] * std::conj(gdot[i]);
    }
    s.mod2 = fft.to_spectral(m2);
    s.cubic = fft.to_spectral(cu);
    detail::truncate(s.mod2, grid.Ny);
    detail::truncate(s.cubic, grid.Ny);
    return build_layers(s, c, grid, eps);
}

// Constant-coefficient operators on profiles.
inline ThetaProfile apply_transport(const ThetaProfile& v, double rho) {
    // (A - rho) d_y
    const Mat9 a = SystemMatrices::get().A1.cast<cplx>();
    ThetaProfile out(v.grid(), v.eps());
    for (int p = -v.P(); p <= v.P(); ++p)
        for (int n = 0; n < v.Ny(); ++n) {
            const double eta = wavenumber(n, v.grid());
            out.at(p, n) = (I * eta) * (a * v.at(p, n) - rho * v.at(p, n));
        }
    return out;
}

inline ThetaProfile apply_fast_operator(const ThetaProfile& v, const Phase& ph) {
    // L(beta d_theta): -i p omega + i p k A + L0 on harmonic p
    ThetaProfile out(v.grid(), v.eps());
    for (int p = -v.P(); p <= v.P(); ++p) {
        const Mat9 lp = harmonic_operator(p, ph.omega, ph.k);
        for (int n = 0; n < v.Ny(); ++n) out.at(p, n) = lp * v.at(p, n);
    }
    return out;
}

// Remainder pieces split by order; the residual of the profile equation is eps^2 (R0 + eps R1 + eps^2 R2).
struct RemainderParts {
    ThetaProfile R0;  // d_tau V1 + (d_t + A d_y) V2 - B(V1, V1) - 2 B(V0, V2)
    ThetaProfile R1;  // d_tau V2 - 2 B(V1, V2)
    ThetaProfile R2;  // -B(V2, V2)
    ThetaProfile products;  // -2 B(V0, V2) - B(V1, V1), the product-only part

    ThetaProfile total(double eps) const { return R0 + eps * R1 + (eps * eps) * R2; }
};

inline RemainderParts remainder(const WkbProfile& w, const WkbProfile& w_tau, const WkbCoefficients& c) {
    ProfileProducts prod(w.V0.grid());
    const ThetaProfile b11 = prod.bilinear(w.V1, w.V1);
    const ThetaProfile b02 = prod.bilinear(w.V0, w.V2);
    const ThetaProfile b12 = prod.bilinear(w.V1, w.V2);
    const ThetaProfile b22 = prod.bilinear(w.V2, w.V2);
    RemainderParts r;
    r.products = -1.0 * b11 - 2.0 * b02;
    r.R0 = w_tau.V1 + apply_transport(w.V2, c.rho) + r.products;
    r.R1 = w_tau.V2 - 2.0 * b12;
    r.R2 = -1.0 * b22;
    return r;
}

// d_t V^a + A d_y V^a + eps^-1 L(beta d_theta) V^a - B(V^a, V^a) computed directly.
inline ThetaProfile profile_residual(const WkbProfile& w, const WkbProfile& w_tau, const WkbCoefficients& c,
                                     const Phase& ph) {
    const double eps = w.eps;
    const ThetaProfile va = approximate_profile(w);
    const ThetaProfile va_tau = approximate_profile(w_tau);
    ProfileProducts prod(va.grid());
    ThetaProfile r = eps * va_tau;
    r += apply_transport(va, c.rho);
    r += (1.0 / eps) * apply_fast_operator(va, ph);
    r -= prod.bilinear(va, va);
    return r;
}

// prepared: a1 = V10(0), the minimal choice with Pi_s b = 0.
// prepared_full: a1 = V1(0), so that b = 0 entirely.
enum class Preparation { prepared, prepared_full, unprepared, custom };

struct InitialData {
    ThetaProfile exact;  // a e^{i theta} + c.c. + eps a1 + eps^2 a2
    WkbProfile wkb;      // layers at t = 0
    ThetaProfile b;      // V1(0) - a1
    ThetaProfile b1;     // V2(0) - a2
};

// a0: polarization amplitude on the y-grid (a = a0 W0); custom mode reads a1 (and optionally a2).
inline InitialData initial_data(const std::vector<cplx>& a0, Preparation mode, double eps, const WkbCoefficients& c,
                                const Grid& grid, const ThetaProfile* custom_a1 = nullptr,
                                const ThetaProfile* a2 = nullptr) {
    InitialData d{ThetaProfile(grid, eps), assemble(a0, c, grid, eps), ThetaProfile(grid, eps), ThetaProfile(grid, eps)};
    ThetaProfile a1(grid, eps);
    switch (mode) {
        case Preparation::prepared:
            for (int n = 0; n < grid.Ny; ++n) a1.at(0, n) = d.wkb.V1.at(0, n);
            break;
        case Preparation::prepared_full:
            a1 = d.wkb.V1;
            break;
        case Preparation::unprepared:
            break;
        case Preparation::custom:
            if (!custom_a1) throw ConfigError("custom preparation requires a1");
            require_same_grid(*custom_a1, a1);
            a1 = *custom_a1;
            break;
    }
    ThetaProfile a2p(grid, eps);
    if (a2) {
        require_same_grid(*a2, a2p);
        a2p = *a2;
    }
    d.exact = d.wkb.V0 + eps * a1 + (eps * eps) * a2p;
    d.b = d.wkb.V1 - a1;
    d.b1 = d.wkb.V2 - a2p;
    return d;
}

// Gaussian polarization amplitude A exp(-(y - y0)^2 / sigma^2).
inline std::vector<cplx> gaussian_envelope(const ScalarGrid& grid, double amplitude, double sigma, double y0) {
    std::vector<cplx> a(grid.Ny);
    for (int i = 0; i < grid.Ny; ++i) {
        const double y = grid.Ly * i / grid.Ny;
        a[i] = amplitude * std::exp(-(y - y0) * (y - y0) / (sigma * sigma));
    }
    return a;
}

// Embed a profile into a grid with a different theta truncation (same y-grid).
inline ThetaProfile with_truncation(const ThetaProfile& v, int P) {
    Grid g = v.grid();
    g.P = P;
    ThetaProfile out(g, v.eps());
    const int pm = std::min(P, v.P());
    for (int p = -pm; p <= pm; ++p)
        for (int n = 0; n < g.Ny; ++n) out.at(p, n) = v.at(p, n);
    return out;
}

}  // namespace mll
