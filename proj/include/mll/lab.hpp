#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evolve.hpp"
#include "io.hpp"
#include "transparency.hpp"
#include "wkb.hpp"

namespace mll {

using nlohmann::json;

struct PhaseSpec {
    double omega{2.0};
    int delta{1};
    std::optional<double> k;  // explicit (omega, k) instead of (omega, delta)
};

struct EnvelopeSpec {
    std::string shape{"gaussian"};
    double amplitude{0.5};
    double sigma{4.0};
    std::optional<double> y0;  // defaults to the cell centre
};

struct ExperimentConfig {
    PhaseSpec phase;
    EnvelopeSpec envelope;
    std::vector<double> eps_list{0.08, 0.04, 0.02, 0.01};
    double T{0.5};
    std::optional<double> alpha;  // intermediate horizon eps^(alpha-1) |ln eps| instead of T / eps
    Preparation preparation{Preparation::prepared};
    Grid grid{8, 256, 64.0};
    double dt{5e-3};
    double dt_over_eps{0.125};  // effective step min(dt, dt_over_eps * eps)
    double nls_dtau{1e-3};
    double nls_horizon{5.0};    // largest admissible slow time
    int snapshots{64};
    double tail_threshold{1e-8};
    double residual_tolerance{1e-8};
    bool timing{true};          // record wall-clock seconds; off for byte-reproducible outputs
    std::uint64_t seed{0};
    std::string out{"out"};
};

inline std::string to_string(Preparation p) {
    switch (p) {
        case Preparation::prepared: return "prepared";
        case Preparation::prepared_full: return "prepared_full";
        case Preparation::unprepared: return "unprepared";
        case Preparation::custom: return "custom";
    }
    return "prepared";
}

inline Preparation preparation_from(const std::string& s) {
    if (s == "prepared") return Preparation::prepared;
    if (s == "prepared_full") return Preparation::prepared_full;
    if (s == "unprepared") return Preparation::unprepared;
    throw ConfigError("preparation must be 'prepared', 'prepared_full' or 'unprepared', got '" + s + "'");
}

inline json to_json(const ExperimentConfig& c) {
    json phase = {{"omega", c.phase.omega}, {"delta", c.phase.delta}};
    if (c.phase.k) phase["k"] = *c.phase.k;
    json env = {{"shape", c.envelope.shape}, {"amplitude", c.envelope.amplitude}, {"sigma", c.envelope.sigma}};
    if (c.envelope.y0) env["y0"] = *c.envelope.y0;
    json j = {{"phase", phase},
              {"envelope", env},
              {"eps_list", c.eps_list},
              {"T", c.T},
              {"preparation", to_string(c.preparation)},
              {"grid", {{"P", c.grid.P}, {"Ny", c.grid.Ny}, {"Ly", c.grid.Ly}}},
              {"dt", c.dt},
              {"dt_over_eps", c.dt_over_eps},
              {"nls_dtau", c.nls_dtau},
              {"nls_horizon", c.nls_horizon},
              {"snapshots", c.snapshots},
              {"tail_threshold", c.tail_threshold},
              {"residual_tolerance", c.residual_tolerance},
              {"timing", c.timing},
              {"seed", c.seed},
              {"out", c.out}};
    if (c.alpha) j["alpha"] = *c.alpha;
    return j;
}

namespace detail {

template <class T>
void read_field(const json& j, const char* key, T& target) {
    if (!j.contains(key)) return;
    try {
        target = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& target) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    T v{};
    read_field(j, key, v);
    target = v;
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("unknown config field '" + where + it.key() + "'");
    }
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
    if (c.eps_list.empty()) throw ConfigError("eps_list is empty");
    for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
        const double e = c.eps_list[i];
        if (!(e > 0.0 && e < 1.0)) throw ConfigError("eps_list entries must lie in (0, 1)");
        if (i > 0 && !(e < c.eps_list[i - 1])) throw ConfigError("eps_list must be strictly decreasing");
    }
    if (!(c.T > 0.0)) throw ConfigError("T must be positive");
    if (c.T > c.nls_horizon) throw ConfigError("T exceeds the NLS horizon guard");
    if (c.alpha && !(*c.alpha > 0.0 && *c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (c.grid.P < 2 || c.grid.Ny < 8 || !(c.grid.Ly > 0.0)) throw ConfigError("grid needs P >= 2, Ny >= 8, Ly > 0");
    if (!(c.dt > 0.0) || !(c.dt_over_eps > 0.0) || !(c.nls_dtau > 0.0)) throw ConfigError("time steps must be positive");
    if (c.snapshots < 1) throw ConfigError("snapshots must be positive");
    if (c.envelope.shape != "gaussian" && c.envelope.shape != "sech")
        throw ConfigError("envelope shape must be 'gaussian' or 'sech'");
    if (!(c.envelope.sigma > 0.0)) throw ConfigError("envelope sigma must be positive");
    if (c.phase.delta != 1 && c.phase.delta != -1) throw ConfigError("phase delta must be +1 or -1");
}

inline ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown(j, {"phase", "envelope", "eps_list", "T", "alpha", "preparation", "grid", "dt", "dt_over_eps",
                               "nls_dtau", "nls_horizon", "snapshots", "tail_threshold", "residual_tolerance",
                               "timing", "seed", "out"},
                           "");
    ExperimentConfig c;
    if (j.contains("phase")) {
        const json& p = j.at("phase");
        detail::reject_unknown(p, {"omega", "delta", "k"}, "phase.");
        detail::read_field(p, "omega", c.phase.omega);
        detail::read_field(p, "delta", c.phase.delta);
        detail::read_optional(p, "k", c.phase.k);
    }
    if (j.contains("envelope")) {
        const json& e = j.at("envelope");
        detail::reject_unknown(e, {"shape", "amplitude", "sigma", "y0"}, "envelope.");
        detail::read_field(e, "shape", c.envelope.shape);
        detail::read_field(e, "amplitude", c.envelope.amplitude);
        detail::read_field(e, "sigma", c.envelope.sigma);
        detail::read_optional(e, "y0", c.envelope.y0);
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        detail::reject_unknown(g, {"P", "Ny", "Ly"}, "grid.");
        detail::read_field(g, "P", c.grid.P);
        detail::read_field(g, "Ny", c.grid.Ny);
        detail::read_field(g, "Ly", c.grid.Ly);
    }
    detail::read_field(j, "eps_list", c.eps_list);
    detail::read_field(j, "T", c.T);
    detail::read_optional(j, "alpha", c.alpha);
    if (j.contains("preparation")) {
        std::string s;
        detail::read_field(j, "preparation", s);
        c.preparation = preparation_from(s);
    }
    detail::read_field(j, "dt", c.dt);
    detail::read_field(j, "dt_over_eps", c.dt_over_eps);
    detail::read_field(j, "nls_dtau", c.nls_dtau);
    detail::read_field(j, "nls_horizon", c.nls_horizon);
    detail::read_field(j, "snapshots", c.snapshots);
    detail::read_field(j, "tail_threshold", c.tail_threshold);
    detail::read_field(j, "residual_tolerance", c.residual_tolerance);
    detail::read_field(j, "timing", c.timing);
    detail::read_field(j, "seed", c.seed);
    detail::read_field(j, "out", c.out);
    validate(c);
    return c;
}

// key=value with a dotted key; the value is parsed as JSON when possible, else taken as a string.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    std::string pointer;
    std::stringstream ks(key);
    for (std::string part; std::getline(ks, part, '.');) {
        if (part.empty()) throw ConfigError("empty segment in override key: " + key);
        pointer += "/" + part;
    }
    j[json::json_pointer(pointer)] = value;
}

inline ExperimentConfig load_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
    json j = json::object();
    if (path) {
        std::ifstream is(*path);
        if (!is) throw ConfigError("cannot open config " + *path);
        j = json::parse(is, nullptr, false);
        if (j.is_discarded()) throw ConfigError("config " + *path + " is not valid JSON");
    }
    for (const auto& o : overrides) apply_override(j, o);
    return config_from_json(j);
}

// FNV-1a over the canonical (sorted-key) JSON dump.
inline std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline Phase phase_of(const ExperimentConfig& c) {
    if (!c.phase.k) return solve_phase(c.phase.omega, c.phase.delta);
    const double w = c.phase.omega, k = *c.phase.k;
    if (w == 0.0) throw ConfigError("omega must be nonzero");
    const double q = k * k / (w * w);
    if (std::abs(2.0 - q) < 1e-12) throw ConfigError("(omega, k) does not lie on the characteristic variety");
    const double d = w * (q - 1.0) / (2.0 - q);
    const int di = d > 0 ? 1 : -1;
    if (std::abs(d - di) > 1e-9) throw ConfigError("(omega, k) does not lie on the characteristic variety");
    Phase ph = solve_phase(w, di);
    if (std::abs(std::abs(ph.k) - std::abs(k)) > 1e-9) throw ConfigError("(omega, k) inconsistent with the dispersion relation");
    return ph;
}

inline std::vector<cplx> envelope_samples(const ExperimentConfig& c) {
    const ScalarGrid sg{c.grid.Ny, c.grid.Ly};
    const double y0 = c.envelope.y0.value_or(0.5 * c.grid.Ly);
    if (c.envelope.shape == "gaussian") return gaussian_envelope(sg, c.envelope.amplitude, c.envelope.sigma, y0);
    std::vector<cplx> a(sg.Ny);
    for (int i = 0; i < sg.Ny; ++i) a[i] = c.envelope.amplitude / std::cosh((sg.Ly * i / sg.Ny - y0) / c.envelope.sigma);
    return a;
}

inline double effective_dt(const ExperimentConfig& c, double eps) { return std::min(c.dt, c.dt_over_eps * eps); }

inline double final_time(const ExperimentConfig& c, double eps) {
    if (c.alpha) return std::pow(eps, *c.alpha - 1.0) * std::abs(std::log(eps));
    return c.T / eps;
}

struct ResidualCheck {
    double res_pi0{}, res_pis{};  // sup norms of the direct residual
    double identity_defect{};     // |residual - eps^2 R| relative to |residual|
    // valid when the defect is within tolerance * |residual| plus a round-off floor
    bool valid{};
};

// Residual of the WKB profile at lab time t for the moving-frame envelope state.
inline ResidualCheck check_residual(const EnvelopeState& env, double t, const WkbCoefficients& c, const Phase& ph,
                                    const Grid& grid, double eps, double tolerance) {
    NlsSolver nls(env.grid, c.nu1, c.nu2);
    const auto g = envelope_to_lab(env, t, c);
    const auto gdot = spectral_shift(nls.rhs(env.g1), env.grid, c.rho * t);
    const WkbProfile w = assemble(g, c, grid, eps);
    const WkbProfile wt = assemble_tau_derivative(g, gdot, c, grid, eps);
    const ThetaProfile res = profile_residual(w, wt, c, ph);
    const ThetaProfile rem = remainder(w, wt, c).total(eps);
    const int nt = 4 * grid.P;
    ResidualCheck r;
    r.res_pi0 = sup_norm_components(res, pi0_indices, nt);
    r.res_pis = sup_norm_components(res, pis_indices, nt);
    const double scale = std::max(sup_norm(res, nt), 1e-300);
    const double defect = sup_norm(res - (eps * eps) * rem, nt);
    // the eps^-1 L term amplifies round-off of the O(1) layers
    const double roundoff = 100.0 * std::numeric_limits<double>::epsilon() * sup_norm(approximate_profile(w), nt) / eps;
    r.identity_defect = defect / scale;
    r.valid = defect <= tolerance * scale + roundoff;
    return r;
}

struct SweepRow {
    double eps{};
    double err_pi0_inf{}, err_pis_inf{};
    double res_pi0{}, res_pis{};
    double wall_s{};
    bool valid{};
    std::string failure;  // empty on success
};

struct SlopeFit {
    double slope{}, intercept{}, half_width{};
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<SlopeFit> pi0, pis;
    Preparation mode{};
    std::string hash;
};

// Least squares on (ln eps, ln err); half_width = 2 standard errors of the slope.
inline SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw DegenerateFit("slope fit needs at least 3 points");
    const double n = double(points.size());
    double sx = 0, sy = 0;
    for (auto [e, err] : points) {
        if (!(e > 0.0) || !(err > 0.0)) throw DegenerateFit("slope fit needs positive eps and errors");
        sx += std::log(e);
        sy += std::log(err);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (auto [e, err] : points) {
        sxx += (std::log(e) - mx) * (std::log(e) - mx);
        sxy += (std::log(e) - mx) * (std::log(err) - my);
    }
    if (sxx <= 1e-300) throw DegenerateFit("all eps values are equal");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (auto [e, err] : points) {
        const double r = std::log(err) - (f.intercept + f.slope * std::log(e));
        ssr += r * r;
    }
    f.half_width = points.size() > 2 ? 2.0 * std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
    return f;
}

// One eps point: exact profile evolution against the WKB profile with the envelope advanced alongside.
inline SweepRow run_point(const ExperimentConfig& cfg, double eps) {
    const auto start = std::chrono::steady_clock::now();
    SweepRow row;
    row.eps = eps;
    const Phase ph = phase_of(cfg);
    const WkbCoefficients c = compute_coefficients(ph);
    const Grid& grid = cfg.grid;
    const auto a0 = envelope_samples(cfg);
    const InitialData data = initial_data(a0, cfg.preparation, eps, c, grid);

    EnvelopeState env{{grid.Ny, grid.Ly}, a0, 0.0};
    NlsSolver nls(env.grid, c.nu1, c.nu2, std::max(cfg.nls_dtau, 1e-2));
    const double t_end = final_time(cfg, eps);
    if (eps * t_end > cfg.nls_horizon) throw ConfigError("slow horizon exceeds the NLS guard");

    const ResidualCheck r0 = check_residual(env, 0.0, c, ph, grid, eps, cfg.residual_tolerance);
    const int nt = 4 * grid.P;
    EvolveOptions opt;
    opt.snapshots = cfg.snapshots;
    opt.tail_threshold = cfg.tail_threshold;
    opt.store = false;
    auto observe = [&](const Snapshot& s) {
        nls.advance(env, eps * s.t, cfg.nls_dtau);
        const ThetaProfile va = approximate_profile(assemble(envelope_to_lab(env, s.t, c), c, grid, eps));
        const ThetaProfile diff = s.V - va;
        row.err_pi0_inf = std::max(row.err_pi0_inf, sup_norm_components(diff, pi0_indices, nt));
        row.err_pis_inf = std::max(row.err_pis_inf, sup_norm_components(diff, pis_indices, nt));
    };
    evolve_profile(data.exact, t_end, effective_dt(cfg, eps), ph, opt, observe);
    const ResidualCheck r1 = check_residual(env, t_end, c, ph, grid, eps, cfg.residual_tolerance);
    row.res_pi0 = std::max(r0.res_pi0, r1.res_pi0);
    row.res_pis = std::max(r0.res_pis, r1.res_pis);
    row.valid = r0.valid && r1.valid;
    if (!row.valid) row.failure = "residual identity check failed";
    if (cfg.timing) row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    validate(cfg);
    std::vector<std::future<SweepRow>> jobs;
    for (double eps : cfg.eps_list)
        jobs.push_back(std::async(std::launch::async, [&cfg, eps] {
            try {
                return run_point(cfg, eps);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                SweepRow r;
                r.eps = eps;
                r.failure = e.what();
                return r;
            }
        }));
    SweepResult res;
    res.mode = cfg.preparation;
    res.hash = config_hash(cfg);
    for (auto& j : jobs) res.rows.push_back(j.get());
    std::vector<std::pair<double, double>> p0, ps;
    for (const auto& r : res.rows)
        if (r.valid) {
            p0.emplace_back(r.eps, r.err_pi0_inf);
            ps.emplace_back(r.eps, r.err_pis_inf);
        }
    if (p0.size() < 3) throw SweepFailed("fewer than 3 eps points succeeded");
    res.pi0 = fit_slope(p0);
    res.pis = fit_slope(ps);
    return res;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& r) {
    os << "eps,err_pi0_inf,err_pis_inf,res_pi0,res_pis,wall_s,valid\n" << std::setprecision(17);
    for (const auto& row : r.rows)
        os << row.eps << ',' << row.err_pi0_inf << ',' << row.err_pis_inf << ',' << row.res_pi0 << ',' << row.res_pis
           << ',' << row.wall_s << ',' << (row.valid ? 1 : 0) << '\n';
}

inline json slopes_json(const SweepResult& r) {
    auto fit = [](const std::optional<SlopeFit>& f) {
        return f ? json{{"slope", f->slope}, {"half_width", f->half_width}} : json(nullptr);
    };
    return {{"pi0", fit(r.pi0)}, {"pis", fit(r.pis)}, {"mode", to_string(r.mode)}, {"config_hash", r.hash}};
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty CSV");
    std::stringstream hs(line);
    for (std::string f; std::getline(hs, f, ',');) t.header.push_back(f);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> r;
        std::stringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) {
            try {
                r.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw ConfigError("non-numeric CSV field '" + f + "'");
            }
        }
        if (r.size() != t.header.size()) throw ConfigError("CSV row width differs from header");
        t.rows.push_back(std::move(r));
    }
    return t;
}

// Summary table of a sweep CSV with slopes fitted over the valid rows.
inline std::string render_report(const CsvTable& t) {
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (t.header[i] == name) return i;
        throw ConfigError("sweep CSV lacks column " + name);
    };
    const std::size_t ce = col("eps"), c0 = col("err_pi0_inf"), cs = col("err_pis_inf"), r0 = col("res_pi0"),
                      rs = col("res_pis"), cw = col("wall_s");
    std::optional<std::size_t> cv;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == "valid") cv = i;
    std::ostringstream os;
    os << "| eps | err Pi0 | err Pis | res Pi0 | res Pis | wall s | valid |\n|---|---|---|---|---|---|---|\n";
    std::vector<std::pair<double, double>> p0, ps;
    os << std::setprecision(4);
    for (const auto& r : t.rows) {
        const bool valid = !cv || r[*cv] != 0.0;
        os << "| " << r[ce] << " | " << r[c0] << " | " << r[cs] << " | " << r[r0] << " | " << r[rs] << " | " << r[cw]
           << " | " << (valid ? "yes" : "no") << " |\n";
        if (valid) {
            p0.emplace_back(r[ce], r[c0]);
            ps.emplace_back(r[ce], r[cs]);
        }
    }
    if (p0.size() >= 3) {
        const SlopeFit f0 = fit_slope(p0), fs = fit_slope(ps);
        os << "\nslope Pi0: " << f0.slope << " +- " << f0.half_width << "\nslope Pis: " << fs.slope << " +- "
           << fs.half_width << '\n';
    } else {
        os << "\nfewer than 3 valid rows; no slopes\n";
    }
    return os.str();
}

}  // namespace mll
