#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SVD>

#include "core_algebra.hpp"
#include "phase.hpp"
#include "profile.hpp"
#include "spectral.hpp"

namespace mll {

inline constexpr double ratio_zero_threshold = 1e-13;

// Branch eigenpairs at one frequency plus the degeneracy grouping of decompose().
struct BranchData {
    BranchEigen be;
    std::array<std::vector<int>, 6> group;  // branch j-1 -> 0-based members of its group

    explicit BranchData(double xi) : be(branch_eigen(xi)) {
        int j = 0;
        while (j < 6) {
            int last = j;
            while (last + 1 < 6 && std::abs(be.lambda[last] - be.lambda[last + 1]) < degeneracy_gap) ++last;
            std::vector<int> members;
            for (int q = j; q <= last; ++q) members.push_back(q);
            for (int q = j; q <= last; ++q) group[q] = members;
            j = last + 1;
        }
    }

    double lambda(int j) const {
        double s = 0.0;
        for (int q : group[j - 1]) s += be.lambda[q];
        return s / double(group[j - 1].size());
    }
};

// Scalar x with Pi_s B(u, v) = (0, x e1, -x e1); the norm of Pi_s B(u, v) is sqrt(2) |x|.
inline cplx transparency_scalar(const StateVector& u, const StateVector& v) {
    return bilinear_B(u, v)(3);
}

inline double strong_transparency_ratio(const BranchData& a, int j, const BranchData& b, int j2) {
    const auto& ga = a.group[j - 1];
    const auto& gb = b.group[j2 - 1];
    Eigen::MatrixXcd beta(ga.size(), gb.size());
    for (std::size_t r = 0; r < ga.size(); ++r)
        for (std::size_t c = 0; c < gb.size(); ++c)
            beta(r, c) = transparency_scalar(a.be.vec[ga[r]], b.be.vec[gb[c]]);
    const double numerator = std::sqrt(2.0) * Eigen::JacobiSVD<Eigen::MatrixXcd>(beta).singularValues()(0);
    if (numerator < ratio_zero_threshold) return 0.0;
    return numerator / std::abs(a.lambda(j) + b.lambda(j2));
}

inline double strong_transparency_ratio(double xi, double eta, int j, int j2) {
    return strong_transparency_ratio(BranchData(xi), j, BranchData(eta), j2);
}

// (i/2)(gamma_j(xi) - gamma_j'(eta))(delta_j - delta_j') (0, -e1, e1)
inline StateVector closed_form_value(double xi, double lambda_j, int j, double eta, double lambda_j2, int j2) {
    const double gj = branch_gamma(xi, lambda_j, j);
    const double gj2 = branch_gamma(eta, lambda_j2, j2);
    const double dd = double(branch_sign(j) - branch_sign(j2));
    return (0.5 * I * (gj - gj2) * dd) * transparency_direction();
}

// Opposite-sign form in terms of the eigenvalues: -i (l + l') / ((l + d)(l' + d')) (0, -e1, e1).
inline StateVector resonance_form_value(double lambda_j, int j, double lambda_j2, int j2) {
    if (branch_sign(j) == branch_sign(j2)) return StateVector::Zero();
    const double num = lambda_j + lambda_j2;
    const double den = (lambda_j + branch_sign(j)) * (lambda_j2 + branch_sign(j2));
    return (-I * num / den) * transparency_direction();
}

inline double closed_form_check(double xi, double eta, int j, int j2) {
    const StateVector q1 = branch_vector(xi, j);
    const StateVector q2 = branch_vector(eta, j2);
    const double l1 = branch_eigen(xi).lambda[j - 1];
    const double l2 = branch_eigen(eta).lambda[j2 - 1];
    const StateVector direct = pis_total() * bilinear_B(q1, q2);
    return (direct - closed_form_value(xi, l1, j, eta, l2, j2)).norm();
}

struct TransparencyPoint {
    double xi{}, eta{};
    int j{}, j2{};
};

struct TransparencyReport {
    double xi_max{};
    int n{};
    double max_ratio{};
    TransparencyPoint worst_point{};
    double closed_form_max_err{};      // closed form vs direct B, all branch pairs
    double resonance_form_max_err{};   // eigenvalue form of the opposite-sign identity
    double ratio_formula_max_err{};    // numerical-projector ratio vs closed-form ratio
    double same_sign_max{};            // largest ratio over same-sign pairs outside merged groups
};

inline TransparencyReport transparency_scan(double xi_max, int n) {
    TransparencyReport rep;
    rep.xi_max = xi_max;
    rep.n = n;
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = n == 1 ? 0.0 : -xi_max + 2.0 * xi_max * i / (n - 1);
    std::vector<BranchData> data;
    data.reserve(n);
    for (double x : xs) data.emplace_back(x);
    std::vector<std::array<StateVector, 6>> q(n);
    for (int i = 0; i < n; ++i)
        for (int j = 1; j <= 6; ++j) q[i][j - 1] = branch_vector_from(xs[i], data[i].be.lambda[j - 1], j);

    const Mat9 pis = pis_total();
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int j = 1; j <= 6; ++j)
                for (int j2 = 1; j2 <= 6; ++j2) {
                    const double la = data[a].be.lambda[j - 1], lb = data[b].be.lambda[j2 - 1];
                    const StateVector direct = pis * bilinear_B(q[a][j - 1], q[b][j2 - 1]);
                    const StateVector cf = closed_form_value(xs[a], la, j, xs[b], lb, j2);
                    rep.closed_form_max_err = std::max(rep.closed_form_max_err, (direct - cf).norm());
                    rep.resonance_form_max_err =
                        std::max(rep.resonance_form_max_err, (direct - resonance_form_value(la, j, lb, j2)).norm());

                    const double r = strong_transparency_ratio(data[a], j, data[b], j2);
                    const bool single = data[a].group[j - 1].size() == 1 && data[b].group[j2 - 1].size() == 1;
                    // Branch signs are meaningless inside a merged group.
                    if (single && branch_sign(j) == branch_sign(j2))
                        rep.same_sign_max = std::max(rep.same_sign_max, r);
                    if (r > rep.max_ratio) {
                        rep.max_ratio = r;
                        rep.worst_point = {xs[a], xs[b], j, j2};
                    }
                    const double den = std::abs(la + lb);
                    if (single && den > 1e-6 && branch_sign(j) != branch_sign(j2)) {
                        const double formula = std::sqrt(2.0) /
                                               std::abs((la + branch_sign(j)) * (lb + branch_sign(j2))) /
                                               (q[a][j - 1].norm() * q[b][j2 - 1].norm());
                        rep.ratio_formula_max_err = std::max(rep.ratio_formula_max_err, std::abs(r - formula) / formula);
                    }
                }
    return rep;
}

// Per-mode covectors psi_-, psi_+ with F_s(a) = psi_s^H a:
// F_-(a) = sum_{j odd} (a|Q_j) / (|Q_j|^2 (lambda_j - 1)), F_+(a) = sum_{j even} (a|Q_j) / (|Q_j|^2 (lambda_j + 1)).
struct SplitCovectors {
    StateVector minus;
    StateVector plus;
};

inline SplitCovectors split_covectors(double xi) {
    const BranchEigen be = branch_eigen(xi);
    SplitCovectors s{StateVector::Zero(), StateVector::Zero()};
    for (int j = 1; j <= 6; ++j) {
        const double lambda = be.lambda[j - 1];
        const StateVector q = branch_vector_from(xi, lambda, j);
        // 1 / (lambda_j + delta_j) = -delta_j gamma_j, bounded where lambda_j -> -delta_j.
        const double w = -branch_sign(j) * branch_gamma(xi, lambda, j) / q.squaredNorm();
        (branch_sign(j) < 0 ? s.minus : s.plus) += w * q;
    }
    return s;
}

// J(a, b) at fixed argument frequencies, from the split covectors.
inline StateVector normal_form_kernel(const SplitCovectors& sa, const StateVector& a, const SplitCovectors& sb,
                                      const StateVector& b) {
    const cplx fm_a = sa.minus.dot(a), fp_a = sa.plus.dot(a);
    const cplx fm_b = sb.minus.dot(b), fp_b = sb.plus.dot(b);
    return (fm_a * fp_b + fp_a * fm_b) * transparency_direction();
}

// J from numerical eigenprojectors, i sum Pi_s B(Pi_j a, Pi_j' b) / (lambda_j + lambda_j').
// Resonant pairs (vanishing denominator) take the symmetric limit in the second frequency.
inline StateVector normal_form_kernel_direct(double xi, const StateVector& a, double eta, const StateVector& b) {
    const auto eval = [&](double e) {
        const EigenDecomposition da = decompose(xi), db = decompose(e);
        StateVector out = StateVector::Zero();
        bool resonant = false;
        for (std::size_t ga = 0; ga < da.groups.size(); ++ga) {
            if (da.groups[ga].branches.front() > 6) continue;
            const StateVector pa = da.groups[ga].projector * a;
            for (std::size_t gb = 0; gb < db.groups.size(); ++gb) {
                if (db.groups[gb].branches.front() > 6) continue;
                const StateVector pb = db.groups[gb].projector * b;
                const StateVector num = pis_total() * bilinear_B(pa, pb);
                const double den = da.groups[ga].lambda + db.groups[gb].lambda;
                if (std::abs(den) < 1e-9) {
                    resonant = true;
                    continue;
                }
                out += (I / den) * num;
            }
        }
        return std::pair{out, resonant};
    };
    auto [val, resonant] = eval(eta);
    if (!resonant) return val;
    const double h = 1e-5;
    return 0.5 * (eval(eta + h).first + eval(eta - h).first);
}

// Normal-form bilinear map J on theta-profiles; pure apart from its FFT workspace.
class NormalFormKernel {
public:
    NormalFormKernel(const Grid& g, double eps, const Phase& ph) : grid_(g), eps_(eps), phase_(ph), products_(g) {
        cov_.reserve(std::size_t(g.modes()));
        for (int p = -g.P; p <= g.P; ++p)
            for (int n = 0; n < g.Ny; ++n) cov_.push_back(split_covectors(eps * wavenumber(n, g) + ph.k * p));
    }

    const Grid& grid() const { return grid_; }
    double eps() const { return eps_; }
    const SplitCovectors& covectors(int p, int n) const { return cov_[std::size_t(p + grid_.P) * grid_.Ny + n]; }

    struct Split {
        ScalarProfile minus, plus;
    };

    Split split(const ThetaProfile& u) const {
        check(u);
        Split s{ScalarProfile(grid_), ScalarProfile(grid_)};
        for (std::size_t i = 0; i < cov_.size(); ++i) {
            s.minus.c[i] = cov_[i].minus.dot(u.data()[i]);
            s.plus.c[i] = cov_[i].plus.dot(u.data()[i]);
        }
        return s;
    }

    ThetaProfile apply(const Split& su, const Split& sv) {
        const ScalarProfile s = products_.product_sum(su.minus, sv.plus, su.plus, sv.minus);
        ThetaProfile out(grid_, eps_);
        for (std::size_t i = 0; i < s.c.size(); ++i) {
            out.data()[i](3) = -s.c[i];
            out.data()[i](6) = s.c[i];
        }
        return out;
    }

    ThetaProfile apply(const ThetaProfile& u, const ThetaProfile& v) { return apply(split(u), split(v)); }

private:
    void check(const ThetaProfile& u) const {
        if (!(u.grid() == grid_)) throw GridMismatch("apply_J: profile grid differs from the kernel grid");
    }

    Grid grid_;
    double eps_;
    Phase phase_;
    std::vector<SplitCovectors> cov_;
    ProfileProducts products_;
};

inline ThetaProfile apply_J(const ThetaProfile& u, const ThetaProfile& v, double eps, const Phase& ph) {
    require_same_grid(u, v);
    NormalFormKernel kernel(u.grid(), eps, ph);
    return kernel.apply(u, v);
}

// Double convolution over (p, eta) pairs with per-pair eigenprojectors; O(P^2 Ny^2), reference only.
inline ThetaProfile apply_J_direct(const ThetaProfile& u, const ThetaProfile& v, double eps, const Phase& ph) {
    require_same_grid(u, v);
    const Grid& g = u.grid();
    ThetaProfile out(g, eps);
    for (int p = -g.P; p <= g.P; ++p)
        for (int n1 = 0; n1 < g.Ny; ++n1) {
            const StateVector& a = u.at(p, n1);
            if (a.norm() == 0.0 || !retained_mode(n1, g.Ny)) continue;
            const double xi = eps * wavenumber(n1, g) + ph.k * p;
            for (int q = -g.P; q <= g.P; ++q) {
                if (std::abs(p + q) > g.P) continue;
                for (int n2 = 0; n2 < g.Ny; ++n2) {
                    const StateVector& b = v.at(q, n2);
                    if (b.norm() == 0.0 || !retained_mode(n2, g.Ny)) continue;
                    const int s = signed_mode(n1, g.Ny) + signed_mode(n2, g.Ny);
                    if (std::abs(s) > dealias_cutoff(g.Ny)) continue;
                    const double eta = eps * wavenumber(n2, g) + ph.k * q;
                    out.at(p + q, fft_index(s, g.Ny)) += normal_form_kernel_direct(xi, a, eta, b);
                }
            }
        }
    return out;
}

}  // namespace mll
