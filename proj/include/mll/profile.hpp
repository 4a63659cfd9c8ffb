#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "spectral.hpp"
#include "state.hpp"

namespace mll {

// Truncation P in theta, Ny points on the periodic y-interval [0, Ly).
struct Grid {
    int P{8};
    int Ny{256};
    double Ly{64.0};

    int harmonics() const { return 2 * P + 1; }
    int modes() const { return harmonics() * Ny; }
    bool operator==(const Grid&) const = default;
};

// FFT index -> signed mode number; the Nyquist index maps to +Ny/2.
inline int signed_mode(int n, int ny) { return n <= ny / 2 ? n : n - ny; }
inline int fft_index(int s, int ny) { return ((s % ny) + ny) % ny; }
inline double wavenumber(int n, const Grid& g) { return 2.0 * std::numbers::pi * signed_mode(n, g.Ny) / g.Ly; }
inline int dealias_cutoff(int ny) { return (ny - 1) / 3; }
inline bool retained_mode(int n, int ny) { return std::abs(signed_mode(n, ny)) <= dealias_cutoff(ny); }
inline double grid_y(int i, const Grid& g) { return g.Ly * i / g.Ny; }

// Fourier coefficients c[p][n] of V(y, theta) = sum c[p][n] exp(i (eta_n y + p theta)).
class ThetaProfile {
public:
    ThetaProfile() = default;
    ThetaProfile(const Grid& g, double eps) : grid_(g), eps_(eps), c_(std::size_t(g.modes()), StateVector::Zero()) {}

    const Grid& grid() const { return grid_; }
    double eps() const { return eps_; }
    int P() const { return grid_.P; }
    int Ny() const { return grid_.Ny; }

    StateVector& at(int p, int n) { return c_[index(p, n)]; }
    const StateVector& at(int p, int n) const { return c_[index(p, n)]; }
    std::vector<StateVector>& data() { return c_; }
    const std::vector<StateVector>& data() const { return c_; }

    std::size_t index(int p, int n) const { return std::size_t(p + grid_.P) * grid_.Ny + n; }

    // Argument frequency eps eta + k p of mode (p, n).
    double frequency(int p, int n, double k) const { return eps_ * wavenumber(n, grid_) + k * p; }

    ThetaProfile& operator+=(const ThetaProfile& o) {
        require_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    ThetaProfile& operator-=(const ThetaProfile& o) {
        require_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    ThetaProfile& operator*=(cplx s) {
        for (auto& v : c_) v *= s;
        return *this;
    }
    friend ThetaProfile operator+(ThetaProfile a, const ThetaProfile& b) { return a += b; }
    friend ThetaProfile operator-(ThetaProfile a, const ThetaProfile& b) { return a -= b; }
    friend ThetaProfile operator*(cplx s, ThetaProfile a) { return a *= s; }
    friend ThetaProfile operator*(double s, ThetaProfile a) { return a *= cplx(s); }

    void require_same(const ThetaProfile& o) const {
        if (!(grid_ == o.grid_)) throw GridMismatch("profiles live on different grids");
    }

private:
    Grid grid_{};
    double eps_{};
    std::vector<StateVector> c_;
};

inline void require_same_grid(const ThetaProfile& a, const ThetaProfile& b) { a.require_same(b); }

// Copy of V with every coefficient multiplied by a fixed matrix.
inline ThetaProfile apply_matrix(const Mat9& m, const ThetaProfile& v) {
    ThetaProfile out = v;
    for (auto& c : out.data()) c = m * c;
    return out;
}

// Restriction to the listed components (the constant diagonal projectors).
template <std::size_t N>
inline ThetaProfile keep_components(const ThetaProfile& v, const std::array<int, N>& idx) {
    ThetaProfile out(v.grid(), v.eps());
    for (std::size_t i = 0; i < v.data().size(); ++i)
        for (int j : idx) out.data()[i](j) = v.data()[i](j);
    return out;
}

inline ThetaProfile project_pi0(const ThetaProfile& v) { return keep_components(v, pi0_indices); }
inline ThetaProfile project_pis(const ThetaProfile& v) { return keep_components(v, pis_indices); }

struct SplitProfile {
    ThetaProfile pi0;
    ThetaProfile pis;
};

inline SplitProfile split_components(const ThetaProfile& v) { return {project_pi0(v), project_pis(v)}; }

// L2 norm over y in [0, Ly) and the theta-average.
inline double l2_norm(const ThetaProfile& v) {
    double s = 0.0;
    for (const auto& c : v.data()) s += c.squaredNorm();
    return std::sqrt(v.grid().Ly * s);
}

// Zero the y-modes removed by the 2/3 rule.
inline void dealias(ThetaProfile& v) {
    const int ny = v.Ny();
    for (int p = -v.P(); p <= v.P(); ++p)
        for (int n = 0; n < ny; ++n)
            if (!retained_mode(n, ny)) v.at(p, n).setZero();
}

// Largest deviation from c[-p][-n] = conj(c[p][n]).
inline double reality_defect(const ThetaProfile& v) {
    double d = 0.0;
    const int ny = v.Ny();
    for (int p = -v.P(); p <= v.P(); ++p)
        for (int n = 0; n < ny; ++n)
            d = std::max(d, (v.at(p, n) - v.at(-p, fft_index(-signed_mode(n, ny), ny)).conjugate()).cwiseAbs().maxCoeff());
    return d;
}

inline void enforce_reality(ThetaProfile& v) {
    const int ny = v.Ny();
    for (int p = -v.P(); p <= v.P(); ++p)
        for (int n = 0; n < ny; ++n) {
            const int pm = -p, nm = fft_index(-signed_mode(n, ny), ny);
            if (v.index(p, n) > v.index(pm, nm)) continue;
            const StateVector avg = 0.5 * (v.at(p, n) + v.at(pm, nm).conjugate());
            v.at(p, n) = avg;
            v.at(pm, nm) = avg.conjugate();
        }
}

// Relative energy in the monitored tail: the |p| = P harmonics and the top third of the retained y-modes.
inline double spectral_tail(const ThetaProfile& v) {
    const int ny = v.Ny();
    const int cut = dealias_cutoff(ny);
    const int band = (2 * cut) / 3;
    double tail = 0.0, total = 0.0;
    for (int p = -v.P(); p <= v.P(); ++p)
        for (int n = 0; n < ny; ++n) {
            const double e = v.at(p, n).squaredNorm();
            total += e;
            if (std::abs(p) == v.P() || std::abs(signed_mode(n, ny)) > band) tail += e;
        }
    return total > 0.0 ? std::sqrt(tail / total) : 0.0;
}

// Number of theta samples that makes quadratic products alias-free for |p| <= P.
inline int dealiased_theta_points(int P) { return fft_friendly_size(3 * P + 1); }

// Physical samples V(y_i, theta_j) for theta_j = 2 pi j / ntheta; index j * Ny + i.
inline std::vector<StateVector> to_physical(const ThetaProfile& v, int ntheta) {
    const Grid& g = v.grid();
    if (ntheta < g.harmonics()) throw GridMismatch("theta sampling too coarse for the truncation");
    BatchedFft2D fft(ntheta, g.Ny, 9);
    for (int c = 0; c < 9; ++c) {
        cplx* s = fft.spec(c);
        for (int p = -g.P; p <= g.P; ++p) {
            const int row = fft_index(p, ntheta);
            for (int n = 0; n < g.Ny; ++n) s[std::size_t(row) * g.Ny + n] = v.at(p, n)(c);
        }
    }
    fft.backward();
    std::vector<StateVector> out(std::size_t(ntheta) * g.Ny);
    for (std::size_t i = 0; i < out.size(); ++i)
        for (int c = 0; c < 9; ++c) out[i](c) = fft.phys(c)[i];
    return out;
}

template <std::size_t N>
inline double sup_norm_components(const ThetaProfile& v, const std::array<int, N>& idx, int ntheta) {
    const auto phys = to_physical(v, ntheta);
    double m = 0.0;
    for (const auto& s : phys) {
        double q = 0.0;
        for (int j : idx) q += std::norm(s(j));
        m = std::max(m, q);
    }
    return std::sqrt(m);
}

inline double sup_norm(const ThetaProfile& v, int ntheta) {
    constexpr std::array<int, 9> all{0, 1, 2, 3, 4, 5, 6, 7, 8};
    return sup_norm_components(v, all, ntheta);
}

// Scalar theta-profile: one complex coefficient per (p, n), same layout as ThetaProfile.
struct ScalarProfile {
    Grid grid{};
    std::vector<cplx> c;

    explicit ScalarProfile(const Grid& g) : grid(g), c(std::size_t(g.modes()), cplx{}) {}
    cplx& at(int p, int n) { return c[std::size_t(p + grid.P) * grid.Ny + n]; }
    const cplx& at(int p, int n) const { return c[std::size_t(p + grid.P) * grid.Ny + n]; }
};

// Pointwise products of profiles, alias-free in theta and 2/3-dealiased in y.
class ProfileProducts {
public:
    explicit ProfileProducts(const Grid& g)
        : grid_(g), ntheta_(dealiased_theta_points(g.P)), bfft_(ntheta_, g.Ny, 12), bout_(ntheta_, g.Ny, 3),
          sfft_(ntheta_, g.Ny, 3) {}

    const Grid& grid() const { return grid_; }

    // B(U, V) with output truncated to |p| <= P.
    ThetaProfile bilinear(const ThetaProfile& u, const ThetaProfile& v) {
        check(u.grid());
        check(v.grid());
        for (int c = 0; c < 6; ++c) {
            load(bfft_.spec(c), u, 3 + c);
            load(bfft_.spec(6 + c), v, 3 + c);
        }
        bfft_.backward();
        const std::size_t npts = std::size_t(ntheta_) * grid_.Ny;
        for (std::size_t i = 0; i < npts; ++i) {
            Vec3 uh, um, vh, vm;
            for (int a = 0; a < 3; ++a) {
                uh(a) = bfft_.phys(a)[i];
                um(a) = bfft_.phys(3 + a)[i];
                vh(a) = bfft_.phys(6 + a)[i];
                vm(a) = bfft_.phys(9 + a)[i];
            }
            const Vec3 x = 0.5 * (cross(um, vh) + cross(vm, uh));
            for (int a = 0; a < 3; ++a) bout_.phys(a)[i] = x(a);
        }
        bout_.forward();
        ThetaProfile out(grid_, u.eps());
        for (int p = -grid_.P; p <= grid_.P; ++p) {
            const int row = fft_index(p, ntheta_);
            for (int n = 0; n < grid_.Ny; ++n) {
                if (!retained_mode(n, grid_.Ny)) continue;
                StateVector& o = out.at(p, n);
                for (int a = 0; a < 3; ++a) {
                    const cplx x = bout_.spec(a)[std::size_t(row) * grid_.Ny + n];
                    o(3 + a) = x;
                    o(6 + a) = -x;
                }
            }
        }
        return out;
    }

    // a * b + c * d for scalar profiles.
    ScalarProfile product_sum(const ScalarProfile& a, const ScalarProfile& b, const ScalarProfile& c,
                              const ScalarProfile& d) {
        ScalarProfile out(grid_);
        std::vector<cplx> acc(std::size_t(ntheta_) * grid_.Ny, cplx{});
        for (auto [x, y] : {std::pair{&a, &b}, std::pair{&c, &d}}) {
            load_scalar(sfft_.spec(0), *x);
            load_scalar(sfft_.spec(1), *y);
            sfft_.backward();
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sfft_.phys(0)[i] * sfft_.phys(1)[i];
        }
        std::copy(acc.begin(), acc.end(), sfft_.phys(2));
        sfft_.forward();
        for (int p = -grid_.P; p <= grid_.P; ++p) {
            const int row = fft_index(p, ntheta_);
            for (int n = 0; n < grid_.Ny; ++n)
                if (retained_mode(n, grid_.Ny)) out.at(p, n) = sfft_.spec(2)[std::size_t(row) * grid_.Ny + n];
        }
        return out;
    }

private:
    void check(const Grid& g) const {
        if (!(g == grid_)) throw GridMismatch("profile grid differs from the product workspace grid");
    }
    void load(cplx* s, const ThetaProfile& v, int comp) const {
        std::fill(s, s + std::size_t(ntheta_) * grid_.Ny, cplx{});
        for (int p = -grid_.P; p <= grid_.P; ++p) {
            const int row = fft_index(p, ntheta_);
            for (int n = 0; n < grid_.Ny; ++n) s[std::size_t(row) * grid_.Ny + n] = v.at(p, n)(comp);
        }
    }
    void load_scalar(cplx* s, const ScalarProfile& v) const {
        std::fill(s, s + std::size_t(ntheta_) * grid_.Ny, cplx{});
        for (int p = -grid_.P; p <= grid_.P; ++p) {
            const int row = fft_index(p, ntheta_);
            for (int n = 0; n < grid_.Ny; ++n) s[std::size_t(row) * grid_.Ny + n] = v.at(p, n);
        }
    }

    Grid grid_;
    int ntheta_;
    BatchedFft2D bfft_, bout_, sfft_;
};

}  // namespace mll
