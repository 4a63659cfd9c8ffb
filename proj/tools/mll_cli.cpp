#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mll/lab.hpp"

namespace fs = std::filesystem;
using namespace mll;

namespace {

struct CommonOptions {
    std::optional<std::string> config;
    std::vector<std::string> overrides;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "JSON experiment config");
    cmd->add_option("--set", o.overrides, "override a config field, key=value (dotted keys allowed)");
    cmd->add_option("--out", o.out, "output directory (overrides the config)");
}

ExperimentConfig resolve(const CommonOptions& o) {
    ExperimentConfig c = load_config(o.config, o.overrides);
    if (!o.out.empty()) c.out = o.out;
    return c;
}

fs::path output_dir(const std::string& dir) {
    fs::path p(dir.empty() ? "." : dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create output directory " + p.string());
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
    if (n < 2) throw ConfigError("--n must be at least 2");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    return g;
}

void cmd_dispersion(double xi_max, int n, const std::string& out) {
    auto os = open_out(output_dir(out) / "dispersion.csv");
    os << "xi,lambda1,lambda2,lambda3,lambda4,lambda5,lambda6\n" << std::setprecision(17);
    for (const auto& row : char_variety_sample(uniform_grid(-xi_max, xi_max, n))) {
        os << row.xi;
        for (double l : row.lambda) os << ',' << l;
        os << '\n';
    }
}

void cmd_transparency(double xi_max, int n, const std::string& out) {
    const TransparencyReport r = transparency_scan(xi_max, n);
    const json j = {{"xi_max", r.xi_max},
                    {"n", r.n},
                    {"max_ratio", r.max_ratio},
                    {"worst_point", {{"xi", r.worst_point.xi}, {"eta", r.worst_point.eta}, {"j", r.worst_point.j},
                                     {"j2", r.worst_point.j2}}},
                    {"closed_form_max_err", r.closed_form_max_err},
                    {"resonance_form_max_err", r.resonance_form_max_err},
                    {"ratio_formula_max_err", r.ratio_formula_max_err},
                    {"same_sign_max", r.same_sign_max}};
    open_out(output_dir(out) / "transparency.json") << j.dump(2) << '\n';
}

void cmd_nls(const ExperimentConfig& cfg) {
    const fs::path dir = output_dir(cfg.out);
    const WkbCoefficients c = compute_coefficients(phase_of(cfg));
    EnvelopeState s{{cfg.grid.Ny, cfg.grid.Ly}, envelope_samples(cfg), 0.0};
    const double m0 = discrete_mass(s);
    NlsSolver(s.grid, c.nu1, c.nu2, std::max(cfg.nls_dtau, 1e-2)).advance(s, cfg.T, cfg.nls_dtau);
    auto os = open_out(dir / "envelope.csv");
    write_envelope_csv(os, s.g1, cfg.grid.Ly);
    const json j = {{"tau", s.tau}, {"nu1", c.nu1}, {"nu2", c.nu2}, {"mass_initial", m0},
                    {"mass_final", discrete_mass(s)}, {"config_hash", config_hash(cfg)}};
    open_out(dir / "nls.json") << j.dump(2) << '\n';
}

void cmd_evolve(const ExperimentConfig& cfg, std::optional<double> eps_opt) {
    const fs::path dir = output_dir(cfg.out);
    const double eps = eps_opt.value_or(cfg.eps_list.front());
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("--eps must lie in (0, 1)");
    const Phase ph = phase_of(cfg);
    const WkbCoefficients c = compute_coefficients(ph);
    const InitialData d = initial_data(envelope_samples(cfg), cfg.preparation, eps, c, cfg.grid);
    auto diag = open_out(dir / "diagnostics.csv");
    write_diagnostics_header(diag);
    EvolveOptions opt;
    opt.snapshots = cfg.snapshots;
    opt.tail_threshold = cfg.tail_threshold;
    opt.store = false;
    std::optional<Snapshot> last;
    evolve_profile(d.exact, final_time(cfg, eps), effective_dt(cfg, eps), ph, opt, [&](const Snapshot& s) {
        write_diagnostics_row(diag, s.diag);
        last = s;
    });
    save_snapshot((dir / "final.snap").string(), last->V, last->t);
}

void cmd_wkb(const ExperimentConfig& cfg, std::optional<double> eps_opt) {
    const fs::path dir = output_dir(cfg.out);
    const double eps = eps_opt.value_or(cfg.eps_list.front());
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("--eps must lie in (0, 1)");
    const Phase ph = phase_of(cfg);
    const WkbCoefficients c = compute_coefficients(ph);
    EnvelopeState env{{cfg.grid.Ny, cfg.grid.Ly}, envelope_samples(cfg), 0.0};
    const ResidualCheck r = check_residual(env, 0.0, c, ph, cfg.grid, eps, cfg.residual_tolerance);
    const WkbProfile w = assemble(env.g1, c, cfg.grid, eps);
    {
        auto os = open_out(dir / "layer_V0_p1.csv");
        write_layer_csv(os, w.V0, 1, {0, 1, 2, 3, 4, 5, 6, 7, 8});
    }
    {
        auto os = open_out(dir / "layer_V1_p0.csv");
        write_layer_csv(os, w.V1, 0, {3, 6});
    }
    {
        auto os = open_out(dir / "layer_V2_p1.csv");
        write_layer_csv(os, w.V2, 1, {0, 1, 2, 3, 4, 5, 6, 7, 8});
    }
    const json j = {{"eps", eps},
                    {"rho", c.rho},
                    {"nu", c.nu},
                    {"nu1", c.nu1},
                    {"nu2", c.nu2},
                    {"mean_coeff", c.mean_coeff},
                    {"mu", c.mu},
                    {"nu3", c.nu3},
                    {"nu4", c.nu4},
                    {"closed_form", {{"nu2", c.closed_form.nu2}, {"mean_coeff", c.closed_form.mean_coeff}}},
                    {"res_pi0", r.res_pi0},
                    {"res_pis", r.res_pis},
                    {"identity_defect", r.identity_defect},
                    {"valid", r.valid}};
    open_out(dir / "wkb.json") << j.dump(2) << '\n';
    if (!r.valid) throw ResidualMismatch("WKB residual identity check failed");
}

void cmd_sweep(const ExperimentConfig& cfg) {
    const fs::path dir = output_dir(cfg.out);
    const SweepResult r = run_sweep(cfg);
    auto os = open_out(dir / "sweep.csv");
    write_sweep_csv(os, r);
    open_out(dir / "slopes.json") << slopes_json(r).dump(2) << '\n';
    for (const auto& row : r.rows)
        if (!row.failure.empty()) std::cerr << "eps " << row.eps << ": " << row.failure << '\n';
}

void cmd_report(const std::string& in, const std::string& out) {
    std::ifstream is(in);
    if (!is) throw ConfigError("cannot open " + in);
    const std::string table = render_report(read_csv(is));
    std::cout << table;
    if (!out.empty()) open_out(output_dir(out) / "report.md") << table;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffractive-optics WKB experiments"};
    app.require_subcommand(1);

    double xi_max = 20.0;
    int n = 201;
    std::string plain_out = ".";
    auto* disp = app.add_subcommand("dispersion", "characteristic variety samples (CSV)");
    disp->add_option("--xi-max", xi_max);
    disp->add_option("--n", n);
    disp->add_option("--out", plain_out);
    auto* transp = app.add_subcommand("transparency", "strong-transparency audit (JSON)");
    transp->add_option("--xi-max", xi_max);
    transp->add_option("--n", n);
    transp->add_option("--out", plain_out);

    CommonOptions common;
    std::optional<double> eps;
    auto* nls = app.add_subcommand("nls", "envelope-only run");
    auto* evo = app.add_subcommand("evolve", "single exact run with diagnostics");
    auto* wkb = app.add_subcommand("wkb", "build the WKB profile and check its residual");
    auto* sweep = app.add_subcommand("sweep", "eps sweep with slope fits");
    for (auto* c : {nls, evo, wkb, sweep}) add_common(c, common);
    evo->add_option("--eps", eps);
    wkb->add_option("--eps", eps);

    std::string report_in, report_out;
    auto* report = app.add_subcommand("report", "summary table of a sweep CSV");
    report->add_option("--in", report_in)->required();
    report->add_option("--out", report_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*disp) cmd_dispersion(xi_max, n, plain_out);
        else if (*transp) cmd_transparency(xi_max, n, plain_out);
        else if (*nls) cmd_nls(resolve(common));
        else if (*evo) cmd_evolve(resolve(common), eps);
        else if (*wkb) cmd_wkb(resolve(common), eps);
        else if (*sweep) cmd_sweep(resolve(common));
        else if (*report) cmd_report(report_in, report_out);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
