#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fft.hpp"
#include "profile.hpp"
#include "spectral.hpp"
#include "transparency.hpp"

namespace mll {

// exp(-i dt / eps (H(eps eta + k p) - omega p)) for every retained (p, eta) mode, H the Hermitian symbol.
class PropagatorTable {
public:
    PropagatorTable(const Grid& g, double eps, const Phase& ph, double dt) : grid_(g), eps_(eps), dt_(dt) {
        blocks_.reserve(std::size_t(g.modes()));
        Eigen::SelfAdjointEigenSolver<Mat9> es;
        for (int p = -g.P; p <= g.P; ++p)
            for (int n = 0; n < g.Ny; ++n) {
                es.compute(symbol_matrix(eps * wavenumber(n, g) + ph.k * p));
                const Eigen::Matrix<cplx, 9, 1> phase =
                    (-I * (dt / eps) * (es.eigenvalues().array() - ph.omega * p)).exp().matrix();
                blocks_.push_back(es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint());
            }
    }

    const Grid& grid() const { return grid_; }
    double eps() const { return eps_; }
    double dt() const { return dt_; }
    const Mat9& block(int p, int n) const { return blocks_[std::size_t(p + grid_.P) * grid_.Ny + n]; }

    void apply(ThetaProfile& v) const {
        if (!(v.grid() == grid_)) throw GridMismatch("propagator table built for another grid");
        auto& d = v.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = blocks_[i] * d[i];
    }

private:
    Grid grid_;
    double eps_, dt_;
    std::vector<Mat9> blocks_;
};

inline ThetaProfile linear_step(ThetaProfile v, double dt, const Phase& ph) {
    PropagatorTable(v.grid(), v.eps(), ph, dt).apply(v);
    return v;
}

// One RK4 step of the pointwise ODE v' = B(v, v) in physical (y, theta) space; E slots are untouched.
class NonlinearStepper {
public:
    explicit NonlinearStepper(const Grid& g, double max_dt = 1.0)
        : grid_(g), ntheta_(dealiased_theta_points(g.P)), max_dt_(max_dt), fft_(ntheta_, g.Ny, 6) {}

    int theta_points() const { return ntheta_; }
    double last_sup() const { return last_sup_; }

    void apply(ThetaProfile& v, double dt) {
        if (!(v.grid() == grid_)) throw GridMismatch("nonlinear stepper built for another grid");
        if (!(dt > 0.0) || dt > max_dt_) throw StepTooLarge("nonlinear step exceeds the configured maximum");
        const int half = fft_.half();
        const std::size_t plane = std::size_t(ntheta_) * half;
        for (int c = 0; c < 6; ++c) {
            cplx* s = fft_.spec(c);
            std::fill(s, s + plane, cplx{});
            for (int p = -grid_.P; p <= grid_.P; ++p) {
                const std::size_t row = std::size_t(fft_index(p, ntheta_)) * half;
                for (int n = 0; n < half; ++n) s[row + n] = v.at(p, n)(3 + c);
            }
        }
        fft_.backward();
        const std::size_t npts = std::size_t(ntheta_) * grid_.Ny;
        double sup = 0.0;
        auto field = [](const Eigen::Matrix<double, 6, 1>& u) {
            const Eigen::Vector3d x = u.tail<3>().cross(u.head<3>());  // m x h
            Eigen::Matrix<double, 6, 1> f;
            f << x, -x;
            return f;
        };
        for (std::size_t i = 0; i < npts; ++i) {
            Eigen::Matrix<double, 6, 1> u;
            for (int c = 0; c < 6; ++c) u(c) = fft_.phys(c)[i];
            const auto k1 = field(u);
            const auto k2 = field(u + 0.5 * dt * k1);
            const auto k3 = field(u + 0.5 * dt * k2);
            const auto k4 = field(u + dt * k3);
            u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            for (int c = 0; c < 6; ++c) fft_.phys(c)[i] = u(c);
            sup = std::max(sup, u.cwiseAbs().maxCoeff());
        }
        last_sup_ = sup;
        fft_.forward();
        const int ny = grid_.Ny;
        for (int p = -grid_.P; p <= grid_.P; ++p)
            for (int n = 0; n < ny; ++n) {
                StateVector& o = v.at(p, n);
                if (!retained_mode(n, ny)) {
                    o.segment<6>(3).setZero();
                    continue;
                }
                const int s = signed_mode(n, ny);
                for (int c = 0; c < 6; ++c) {
                    o(3 + c) = s >= 0
                        ? fft_.spec(c)[std::size_t(fft_index(p, ntheta_)) * half + s]
                        : std::conj(fft_.spec(c)[std::size_t(fft_index(-p, ntheta_)) * half - s]);
                }
            }
        if (!std::isfinite(sup)) throw Blowup("non-finite values in the nonlinear step");
    }

private:
    Grid grid_;
    int ntheta_;
    double max_dt_;
    BatchedRealFft2D fft_;
    double last_sup_{0.0};
};

inline ThetaProfile nonlinear_step(ThetaProfile v, double dt, double max_dt = 1.0) {
    NonlinearStepper(v.grid(), max_dt).apply(v, dt);
    return v;
}

struct Diagnostics {
    double t{};
    double l2_total{}, linf_total{}, l2_pi0{}, l2_pis{}, linf_pi0{}, linf_pis{};
};

inline Diagnostics diagnose(const ThetaProfile& v, double t) {
    const int nt = 4 * std::max(v.P(), 1);
    const SplitProfile s = split_components(v);
    return {t,
            l2_norm(v),
            sup_norm(v, nt),
            l2_norm(s.pi0),
            l2_norm(s.pis),
            sup_norm_components(v, pi0_indices, nt),
            sup_norm_components(v, pis_indices, nt)};
}

struct Snapshot {
    double t{};
    ThetaProfile V;
    Diagnostics diag;
};

struct EvolveOptions {
    int snapshots{64};            // uniformly spaced, plus t = 0
    double tail_threshold{1e-8};  // relative spectral tail that flags under-resolution
    double blowup_bound{1e3};     // physical sup-norm bound
    double max_dt{1.0};
    bool nonlinear{true};
    bool store{true};             // keep snapshots in the returned trajectory
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    int steps{};
    double dt{};
};

using SnapshotObserver = std::function<void(const Snapshot&)>;

// Equal steps no larger than dt, with a step count divisible by the snapshot count.
inline int step_count(double t_end, double dt, int snapshots) {
    const int raw = std::max(1, int(std::ceil(t_end / dt - 1e-9)));
    const int s = std::max(1, snapshots);
    return ((raw + s - 1) / s) * s;
}

namespace detail {

inline void check_resolution(const ThetaProfile& v, const EvolveOptions& opt, double t) {
    if (opt.tail_threshold > 0.0 && spectral_tail(v) > opt.tail_threshold)
        throw UnderResolved("spectral tail above threshold at t = " + std::to_string(t));
}

inline void record(Trajectory& tr, const ThetaProfile& v, double t, const EvolveOptions& opt,
                   const SnapshotObserver& obs) {
    check_resolution(v, opt, t);
    Snapshot s{t, v, diagnose(v, t)};
    if (!std::isfinite(s.diag.linf_total) || s.diag.linf_total > opt.blowup_bound)
        throw Blowup("profile sup-norm exceeded the bound at t = " + std::to_string(t));
    if (obs) obs(s);
    if (opt.store) tr.snapshots.push_back(std::move(s));
}

}  // namespace detail

// Strang splitting L(dt/2) N(dt) L(dt/2), consecutive half steps merged between snapshots.
inline Trajectory evolve_profile(ThetaProfile v, double t_end, double dt, const Phase& ph,
                                 const EvolveOptions& opt = {}, const SnapshotObserver& obs = {}) {
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw StepTooLarge("time step must be positive");
    Trajectory tr;
    const int snaps = std::max(1, opt.snapshots);
    tr.steps = step_count(t_end, dt, snaps);
    tr.dt = t_end / tr.steps;
    detail::record(tr, v, 0.0, opt, obs);
    if (t_end == 0.0) return tr;
    const PropagatorTable half(v.grid(), v.eps(), ph, 0.5 * tr.dt);
    const PropagatorTable full(v.grid(), v.eps(), ph, tr.dt);
    NonlinearStepper nl(v.grid(), opt.max_dt);
    const int per = tr.steps / snaps;
    for (int s = 0; s < snaps; ++s) {
        half.apply(v);
        for (int i = 0; i < per; ++i) {
            if (opt.nonlinear) {
                nl.apply(v, tr.dt);
                if (nl.last_sup() > opt.blowup_bound) throw Blowup("pointwise sup-norm exceeded the bound");
            }
            (i + 1 < per ? full : half).apply(v);
        }
        detail::record(tr, v, t_end * (s + 1) / snaps, opt, obs);
    }
    return tr;
}

// Normal-form variables: V0part = Pi0 V, Npart = Pi_s V / eps - J(V0part, V0part), tau = eps t.
struct NormalFormState {
    ThetaProfile V0part;
    ThetaProfile Npart;
    double tau{};
};

struct NormalFormRates {
    ThetaProfile dV0;  // 2 Pi0 B(V0, W)
    ThetaProfile dN;   // -4 J(Pi0 B(V0, W), V0)
};

class NormalFormSystem {
public:
    NormalFormSystem(const Grid& g, double eps, const Phase& ph) : eps_(eps), kernel_(g, eps, ph), products_(g) {}

    double eps() const { return eps_; }

    ThetaProfile J(const ThetaProfile& u, const ThetaProfile& v) { return kernel_.apply(u, v); }

    NormalFormState from_profile(const ThetaProfile& v, double tau = 0.0) {
        SplitProfile s = split_components(v);
        s.pis *= 1.0 / eps_;
        s.pis -= J(s.pi0, s.pi0);
        return {std::move(s.pi0), std::move(s.pis), tau};
    }

    ThetaProfile to_profile(const NormalFormState& s) {
        ThetaProfile w = s.Npart + J(s.V0part, s.V0part);
        w *= eps_;
        w += s.V0part;
        return w;
    }

    NormalFormRates rates(const ThetaProfile& v0, const ThetaProfile& n) {
        const ThetaProfile w = n + J(v0, v0);
        const ThetaProfile b = project_pi0(products_.bilinear(v0, w));
        return {2.0 * b, -4.0 * J(b, v0)};
    }

    // Interaction-free rate of W_s = Pi_s V / eps: eps^-2 Pi_s B(V0, V0).
    ThetaProfile unshifted_rate(const ThetaProfile& v0) {
        return (1.0 / (eps_ * eps_)) * project_pis(products_.bilinear(v0, v0));
    }

private:
    double eps_;
    NormalFormKernel kernel_;
    ProfileProducts products_;
};

struct NormalFormSnapshot {
    double tau{};
    NormalFormState state;
    double norm{};       // l2 of (V0part, Npart)
    double rate_n{};     // l2 of dN/dtau
    double rate_ws{};    // l2 of the unshifted W_s rate
};

struct NormalFormTrajectory {
    std::vector<NormalFormSnapshot> snapshots;
    int steps{};
    double dtau{};
};

// The linear flow over dtau in slow time equals the profile propagator over dtau / eps.
inline NormalFormTrajectory evolve_normal_form(NormalFormState state, double tau_end, double dtau, const Phase& ph,
                                               const EvolveOptions& opt = {}) {
    if (!(dtau > 0.0) || !(tau_end >= 0.0)) throw StepTooLarge("time step must be positive");
    const Grid g = state.V0part.grid();
    const double eps = state.V0part.eps();
    NormalFormSystem sys(g, eps, ph);
    NormalFormTrajectory tr;
    const int snaps = std::max(1, opt.snapshots);
    tr.steps = step_count(tau_end, dtau, snaps);
    tr.dtau = tau_end / tr.steps;
    const double h = tr.dtau;
    if (h > opt.max_dt) throw StepTooLarge("normal-form step exceeds the configured maximum");

    auto record = [&](double tau) {
        NormalFormRates r = sys.rates(state.V0part, state.Npart);
        NormalFormSnapshot s;
        s.tau = tau;
        s.norm = std::hypot(l2_norm(state.V0part), l2_norm(state.Npart));
        s.rate_n = l2_norm(r.dN);
        s.rate_ws = l2_norm(sys.unshifted_rate(state.V0part));
        if (!std::isfinite(s.norm) || s.norm > opt.blowup_bound) throw Blowup("normal-form state exceeded the bound");
        if (opt.store) s.state = state;
        else s.state = {ThetaProfile(g, eps), ThetaProfile(g, eps), tau};
        tr.snapshots.push_back(std::move(s));
    };
    state.tau = 0.0;
    record(0.0);
    if (tau_end == 0.0) return tr;
    const PropagatorTable half(g, eps, ph, 0.5 * h / eps);
    auto nonlinear = [&]() {
        ThetaProfile& v = state.V0part;
        ThetaProfile& n = state.Npart;
        const NormalFormRates k1 = sys.rates(v, n);
        const NormalFormRates k2 = sys.rates(v + 0.5 * h * k1.dV0, n + 0.5 * h * k1.dN);
        const NormalFormRates k3 = sys.rates(v + 0.5 * h * k2.dV0, n + 0.5 * h * k2.dN);
        const NormalFormRates k4 = sys.rates(v + h * k3.dV0, n + h * k3.dN);
        v += (h / 6.0) * (k1.dV0 + 2.0 * k2.dV0 + 2.0 * k3.dV0 + k4.dV0);
        n += (h / 6.0) * (k1.dN + 2.0 * k2.dN + 2.0 * k3.dN + k4.dN);
    };
    const int per = tr.steps / snaps;
    for (int s = 0; s < snaps; ++s) {
        for (int i = 0; i < per; ++i) {
            half.apply(state.V0part);
            half.apply(state.Npart);
            if (opt.nonlinear) nonlinear();
            half.apply(state.V0part);
            half.apply(state.Npart);
        }
        state.tau = tau_end * (s + 1) / snaps;
        record(state.tau);
    }
    return tr;
}

}  // namespace mll
