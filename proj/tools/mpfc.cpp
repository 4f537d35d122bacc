// Command-line driver: run | pfc | steady | decompose | rates | check.
// Each subcommand prints a JSON summary on stdout and writes its artifacts
// (ledger.csv, snapshots/, report.json) under the output directory.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include <fftw3.h>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpfc/config.hpp"
#include "mpfc/diagnostics.hpp"
#include "mpfc/equilibrium.hpp"
#include "mpfc/snapshot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mpfc;

namespace {

struct DirLock {
    fs::path path;
    bool held = false;
    explicit DirLock(const fs::path& dir) : path(dir / "lock") {
        std::FILE* f = std::fopen(path.string().c_str(), "wx");
        if (!f)
            throw Error("run directory is locked by another process: " + path.string());
        std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
        std::fclose(f);
        held = true;
    }
    ~DirLock() {
        if (held) {
            std::error_code ec;
            fs::remove(path, ec);
        }
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json config_to_json(const RunConfig& cfg) {
    return json{{"dim", cfg.dim},
                {"n", cfg.resolved_n()},
                {"padding", cfg.padding},
                {"beta", cfg.params.beta},
                {"epsilon", cfg.params.epsilon},
                {"split_k", cfg.params.effective_split_k()},
                {"cubic", cfg.params.cubic_enabled},
                {"scheme", cfg.scheme.scheme == Scheme::imex2     ? "imex2"
                           : cfg.scheme.scheme == Scheme::split1 ? "split1"
                                                                 : "pfc_split1"},
                {"dt", cfg.scheme.dt},
                {"t_end", cfg.t_end},
                {"sample_every", cfg.sample_every},
                {"seed", cfg.seed}};
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    double t_end = -1.0;
    double dt = -1.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

RunConfig load_config(const CommonFlags& flags) {
    RunConfig cfg = parse_config(read_file(flags.config_path));
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.t_end >= 0.0) cfg.t_end = flags.t_end;
    if (flags.dt > 0.0) cfg.scheme.dt = flags.dt;
    if (flags.seed_set) cfg.seed = flags.seed;
    return cfg;
}

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path, "run configuration file")->required();
    sub->add_option("--out", flags.out_dir, "output directory (overrides config)");
    sub->add_option("--t-end", flags.t_end, "final time (overrides config)");
    sub->add_option("--dt", flags.dt, "time step (overrides config)");
    sub->add_option("--seed", flags.seed, "rng seed (overrides config)")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
}

void write_report(const fs::path& dir, const json& report) {
    std::ofstream out(dir / "report.json");
    out << report.dump(2) << "\n";
}

void maybe_snapshot(const fs::path& dir, const Grid& g, const std::vector<cplx>& phi, double t,
                    long step) {
    fs::create_directories(dir / "snapshots");
    char name[64];
    std::snprintf(name, sizeof(name), "snapshot_%08ld.bin", step);
    write_snapshot((dir / "snapshots" / name).string(), inverse_transform(g, phi), t);
}

int cmd_run(const CommonFlags& flags) {
    RunConfig cfg = load_config(flags);
    if (cfg.scheme.scheme == Scheme::pfc_split1)
        throw Error("scheme pfc_split1 belongs to the pfc subcommand");
    fs::create_directories(cfg.out_dir);
    DirLock lock(cfg.out_dir);

    Grid g(cfg.dim, cfg.resolved_n(), cfg.padding);
    State st(g);
    st.phi = make_initial(g, cfg.phi0, cfg.seed);
    st.phit = make_initial(g, cfg.phi1, cfg.seed + 1);

    const fs::path dir(cfg.out_dir);
    Ledger ledger = run_with_ledger(st, cfg.params, cfg.scheme, cfg.t_end, cfg.sample_every,
                                    [&](const State& s, long n) {
                                        if (cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0)
                                            maybe_snapshot(dir, g, s.phi, s.t, n);
                                    });
    maybe_snapshot(dir, g, st.phi, st.t, -1);
    write_ledger_csv(ledger, (dir / "ledger.csv").string());

    json report{{"subcommand", "run"},
                {"config", config_to_json(cfg)},
                {"M", cfg.params.beta * ledger.front().mean_phit + ledger.front().mean_phi},
                {"beta", cfg.params.beta},
                {"rows", ledger.size()},
                {"final_t", ledger.back().t},
                {"final_E", ledger.back().E},
                {"final_pseudoE", ledger.back().pseudoE},
                {"ledger_fnv1a", hex64(fnv1a_file((dir / "ledger.csv").string()))}};
    write_report(dir, report);
    std::cout << report.dump(2) << std::endl;
    return 0;
}

int cmd_pfc(const CommonFlags& flags) {
    RunConfig cfg = load_config(flags);
    cfg.scheme.scheme = Scheme::pfc_split1;
    fs::create_directories(cfg.out_dir);
    DirLock lock(cfg.out_dir);

    Grid g(cfg.dim, cfg.resolved_n(), cfg.padding);
    auto phi = make_initial(g, cfg.phi0, cfg.seed);
    Params p = cfg.params;
    p.mean_M = phi[0].real();

    const fs::path dir(cfg.out_dir);
    Ledger ledger;
    run_pfc(g, phi, p, cfg.scheme, cfg.t_end, cfg.sample_every,
            [&](const std::vector<cplx>& ph, const std::vector<cplx>& dphidt, double t, long n) {
                State s(g, ph, dphidt, t);
                const LedgerRow* prev = ledger.empty() ? nullptr : &ledger.back();
                MeanLaw law{p.mean_M, 0.0, p.beta};
                ledger.push_back(make_ledger_row(g, s, p.mean_M, p, prev, &law));
                if (cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0)
                    maybe_snapshot(dir, g, ph, t, n);
            });
    maybe_snapshot(dir, g, phi, cfg.t_end, -1);
    write_ledger_csv(ledger, (dir / "ledger.csv").string());

    json report{{"subcommand", "pfc"},
                {"config", config_to_json(cfg)},
                {"M", p.mean_M},
                {"beta", p.beta},
                {"rows", ledger.size()},
                {"final_E", ledger.back().E},
                {"ledger_fnv1a", hex64(fnv1a_file((dir / "ledger.csv").string()))}};
    write_report(dir, report);
    std::cout << report.dump(2) << std::endl;
    return 0;
}

int cmd_steady(const CommonFlags& flags, bool relax, double tol, int max_iter) {
    RunConfig cfg = load_config(flags);
    fs::create_directories(cfg.out_dir);
    DirLock lock(cfg.out_dir);

    Grid g(cfg.dim, cfg.resolved_n(), cfg.padding);
    auto guess = make_initial(g, cfg.phi0, cfg.seed);
    const double M = guess[0].real();

    SteadyState ss = relax ? relax_to_steady(g, guess, M, cfg.params)
                           : solve_steady(g, guess, M, cfg.params, tol, max_iter);

    const fs::path dir(cfg.out_dir);
    std::vector<cplx> full = ss.phi_inf;
    write_snapshot((dir / "steady.bin").string(), inverse_transform(g, full), 0.0);
    json sidecar{{"M", ss.M},
                 {"lagrange_const", ss.lagrange_const},
                 {"residual", ss.residual},
                 {"energy", ss.energy},
                 {"converged", ss.converged},
                 {"newton_iters", ss.newton_iters},
                 {"flag", ss.flag}};
    std::ofstream side(dir / "steady.json");
    side << sidecar.dump(2) << "\n";

    json report{{"subcommand", "steady"}, {"config", config_to_json(cfg)},
                {"route", relax ? "relax" : "newton"}, {"result", sidecar}};
    write_report(dir, report);
    std::cout << report.dump(2) << std::endl;
    return ss.converged ? 0 : 1;
}

int cmd_decompose(const CommonFlags& flags) {
    RunConfig cfg = load_config(flags);
    fs::create_directories(cfg.out_dir);
    DirLock lock(cfg.out_dir);

    Grid g(cfg.dim, cfg.resolved_n(), cfg.padding);
    State st(g);
    st.phi = make_initial(g, cfg.phi0, cfg.seed);
    st.phit = make_initial(g, cfg.phi1, cfg.seed + 1);

    auto dec = run_decomposition(st, cfg.params, cfg.scheme, cfg.t_end, cfg.sample_every);

    const fs::path dir(cfg.out_dir);
    {
        std::ofstream out(dir / "decomposition.csv");
        out << "t,x0_d,x1_c,consistency\n";
        out.precision(17);
        for (std::size_t i = 0; i < dec.ts.size(); ++i)
            out << dec.ts[i] << ',' << dec.x0_d[i] << ',' << dec.x1_c[i] << ','
                << dec.consistency[i] << "\n";
    }
    json report{{"subcommand", "decompose"},
                {"config", config_to_json(cfg)},
                {"split_k", dec.split_k},
                {"fitted_kappa", dec.fitted_kappa},
                {"kappa_fit_residual", dec.kappa_fit_residual},
                {"sup_x1_c", dec.sup_x1_c},
                {"max_consistency", dec.max_consistency},
                {"max_mean_d", dec.max_mean_d}};
    write_report(dir, report);
    std::cout << report.dump(2) << std::endl;
    return 0;
}

int cmd_rates(const std::string& ledger_path, const std::string& column,
              const std::string& model, double t_a, double t_b) {
    Ledger ledger = read_ledger_csv(ledger_path);
    if (ledger.size() < 2) throw Error("ledger too short for a rate fit");
    std::vector<double> ts, ys;
    for (const auto& r : ledger) {
        ts.push_back(r.t);
        double v;
        if (column == "mean_phi") v = r.mean_phi;
        else if (column == "mean_phit") v = r.mean_phit;
        else if (column == "E") v = r.E;
        else if (column == "pseudoE") v = r.pseudoE;
        else if (column == "h2_phi") v = r.h2_phi;
        else if (column == "hm1_phit_bar") v = r.hm1_phit_bar;
        else if (column == "stat_residual") v = r.stat_residual;
        else if (column == "z") v = r.z;
        else throw Error("unknown ledger column: " + column);
        ys.push_back(std::abs(v));
    }
    if (t_a < 0.0) t_a = ts.front();
    if (t_b < 0.0) t_b = ts.back();
    RateModel m;
    if (model == "exponential") m = RateModel::exponential;
    else if (model == "algebraic") m = RateModel::algebraic;
    else throw Error("unknown rate model: " + model);
    auto fit = fit_rate(ts, ys, m, t_a, t_b);
    json report{{"subcommand", "rates"},
                {"column", column},
                {"model", model},
                {"amplitude", fit.amplitude},
                {"rate", fit.rate},
                {"window", {fit.t_a, fit.t_b}},
                {"fit_residual", fit.fit_residual}};
    std::cout << report.dump(2) << std::endl;
    return 0;
}

int cmd_check(const std::string& dir_str) {
    const fs::path dir(dir_str);
    std::ifstream rep(dir / "report.json");
    if (!rep) throw Error("no report.json in " + dir_str);
    json report = json::parse(rep);
    const double beta = report.at("beta").get<double>();
    const std::string want_hash = report.at("ledger_fnv1a").get<std::string>();

    const std::string ledger_path = (dir / "ledger.csv").string();
    std::vector<std::string> failures;
    if (hex64(fnv1a_file(ledger_path)) != want_hash)
        failures.push_back("ledger.csv checksum mismatch");

    Ledger ledger = read_ledger_csv(ledger_path);
    if (ledger.empty()) failures.push_back("empty ledger");
    double max_meanlaw = 0.0, max_pe = 0.0, max_z = 0.0, max_phit_law = 0.0;
    if (!ledger.empty()) {
        const double M = beta * ledger.front().mean_phit + ledger.front().mean_phi;
        const double a0 = ledger.front().mean_phit;
        const double t0 = ledger.front().t;
        double prev_t = ledger.front().t - 1.0;
        for (const auto& r : ledger) {
            if (!r.finite()) {
                failures.push_back("non-finite ledger entry at t=" + std::to_string(r.t));
                break;
            }
            if (r.t <= prev_t) {
                failures.push_back("t not strictly increasing at t=" + std::to_string(r.t));
                break;
            }
            prev_t = r.t;
            max_meanlaw = std::max(max_meanlaw,
                                   std::abs(beta * r.mean_phit + r.mean_phi - M));
            max_phit_law = std::max(
                max_phit_law, std::abs(r.mean_phit - a0 * std::exp(-(r.t - t0) / beta)));
            const double pe = r.E + 0.5 * beta * r.hm1_phit_bar * r.hm1_phit_bar;
            max_pe = std::max(max_pe, std::abs(pe - r.pseudoE) / std::max(1.0, std::abs(pe)));
            const double z = std::sqrt(r.hm1_phit_bar * r.hm1_phit_bar +
                                       r.stat_residual * r.stat_residual / beta) +
                             std::exp(-r.t / beta);
            max_z = std::max(max_z, std::abs(z - r.z) / std::max(1.0, std::abs(z)));
        }
    }
    if (max_meanlaw > 1e-13) failures.push_back("mean conservation law violated");
    if (max_phit_law > 1e-12) failures.push_back("mean_phit decay law violated");
    if (max_pe > 1e-11) failures.push_back("pseudoE inconsistent with E and hm1_phit_bar");
    if (max_z > 1e-11) failures.push_back("z column inconsistent");

    json out{{"subcommand", "check"},
             {"dir", dir_str},
             {"max_mean_law_deviation", max_meanlaw},
             {"max_mean_phit_law_deviation", max_phit_law},
             {"ok", failures.empty()},
             {"failures", failures}};
    std::cout << out.dump(2) << std::endl;
    return failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("MPFC_THREADS")) {
        const int nthreads = std::max(1, std::atoi(env));
        fftw_init_threads();
        fftw_plan_with_nthreads(nthreads);
    }

    CLI::App app{"pseudo-spectral MPFC/PFC simulation and verification suite"};
    app.require_subcommand(1);

    CommonFlags run_flags, pfc_flags, steady_flags, dec_flags;
    bool steady_relax = false;
    double steady_tol = 1e-11;
    int steady_max_iter = 30;
    std::string rates_ledger, rates_column = "mean_phit", rates_model = "exponential";
    double rates_ta = -1.0, rates_tb = -1.0;
    std::string check_dir;

    auto* run_cmd = app.add_subcommand("run", "integrate the MPFC equation");
    add_common(run_cmd, run_flags);
    auto* pfc_cmd = app.add_subcommand("pfc", "integrate the PFC gradient flow");
    add_common(pfc_cmd, pfc_flags);
    auto* steady_cmd = app.add_subcommand("steady", "solve the stationary problem");
    add_common(steady_cmd, steady_flags);
    steady_cmd->add_flag("--relax", steady_relax, "use PFC gradient-flow relaxation");
    steady_cmd->add_option("--tol", steady_tol, "Newton residual tolerance");
    steady_cmd->add_option("--max-iter", steady_max_iter, "Newton iteration cap");
    auto* dec_cmd = app.add_subcommand("decompose", "run the decaying/compact decomposition");
    add_common(dec_cmd, dec_flags);
    auto* rates_cmd = app.add_subcommand("rates", "fit decay rates on a ledger column");
    rates_cmd->add_option("--ledger", rates_ledger, "ledger.csv path")->required();
    rates_cmd->add_option("--column", rates_column, "ledger column name");
    rates_cmd->add_option("--model", rates_model, "exponential|algebraic");
    rates_cmd->add_option("--t-a", rates_ta, "fit window start");
    rates_cmd->add_option("--t-b", rates_tb, "fit window end");
    auto* check_cmd = app.add_subcommand("check", "verify invariants of a finished run");
    check_cmd->add_option("--dir", check_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(run_flags);
        if (pfc_cmd->parsed()) return cmd_pfc(pfc_flags);
        if (steady_cmd->parsed())
            return cmd_steady(steady_flags, steady_relax, steady_tol, steady_max_iter);
        if (dec_cmd->parsed()) return cmd_decompose(dec_flags);
        if (rates_cmd->parsed())
            return cmd_rates(rates_ledger, rates_column, rates_model, rates_ta, rates_tb);
        if (check_cmd->parsed()) return cmd_check(check_dir);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        std::ofstream detail("mpfc_error.txt");
        detail << e.what() << "\n";
        return 1;
    }
    return 0;
}
