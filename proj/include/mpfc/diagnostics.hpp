#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mpfc/integrators.hpp"

namespace mpfc {

/// One time-sample of all monitored quantities. `int_f` (the source term
/// of the energy identity) is carried internally but not exported to CSV.
struct LedgerRow {
    double t = 0.0;
    double mean_phi = 0.0;
    double mean_phit = 0.0;
    double E = 0.0;
    double pseudoE = 0.0;
    double h2_phi = 0.0;
    double hm1_phit_bar = 0.0;
    double stat_residual = 0.0;
    double z = 0.0;
    double cum_identity_residual = 0.0;
    double int_f = 0.0;

    bool finite() const {
        for (double v : {t, mean_phi, mean_phit, E, pseudoE, h2_phi, hm1_phit_bar,
                         stat_residual, z, cum_identity_residual})
            if (!std::isfinite(v)) return false;
        return true;
    }
};

using Ledger = std::vector<LedgerRow>;

inline const char* ledger_csv_header() {
    return "t,mean_phi,mean_phit,E,pseudoE,h2_phi,hm1_phit_bar,stat_residual,z,"
           "cum_identity_residual";
}

inline std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline void write_ledger_csv(const Ledger& ledger, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open ledger file: " + path);
    out << ledger_csv_header() << "\n";
    for (const auto& r : ledger) {
        out << format_number(r.t) << ',' << format_number(r.mean_phi) << ','
            << format_number(r.mean_phit) << ',' << format_number(r.E) << ','
            << format_number(r.pseudoE) << ',' << format_number(r.h2_phi) << ','
            << format_number(r.hm1_phit_bar) << ',' << format_number(r.stat_residual) << ','
            << format_number(r.z) << ',' << format_number(r.cum_identity_residual) << "\n";
    }
}

inline Ledger read_ledger_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open ledger file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty ledger file: " + path);
    if (line != ledger_csv_header()) throw Error("unexpected ledger header in " + path);
    Ledger ledger;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        LedgerRow r;
        char comma;
        ss >> r.t >> comma >> r.mean_phi >> comma >> r.mean_phit >> comma >> r.E >> comma >>
            r.pseudoE >> comma >> r.h2_phi >> comma >> r.hm1_phit_bar >> comma >>
            r.stat_residual >> comma >> r.z >> comma >> r.cum_identity_residual;
        if (ss.fail()) throw Error("malformed ledger row in " + path);
        ledger.push_back(r);
    }
    return ledger;
}

/// || Lap^2 u + 2 Lap u + f_M(u) - <f_M(u)> ||_{-2} with u = phi - <phi>.
inline double stationary_residual(const Grid& g, const std::vector<cplx>& phi_hat, double M,
                                  const Params& p) {
    auto nl = nonlinearity(p);
    std::vector<cplx> ybar = phi_hat;
    ybar[0] = cplx();
    auto fM = padded_pointwise(g, ybar, [&nl, M](double s) { return nl.f_shifted(s, M); });
    std::vector<cplx> r(g.ncoeff(), cplx());
    for (std::size_t i = 1; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        r[i] = (lam * lam - 2.0 * lam) * ybar[i] + fM[i];
    }
    return sobolev_norm(g, r, -2.0);
}

/// Spectral coefficients of the stationary residual field (mean-free).
inline std::vector<cplx> stationary_residual_field(const Grid& g,
                                                   const std::vector<cplx>& phi_hat, double M,
                                                   const Params& p) {
    auto nl = nonlinearity(p);
    std::vector<cplx> ybar = phi_hat;
    ybar[0] = cplx();
    auto fM = padded_pointwise(g, ybar, [&nl, M](double s) { return nl.f_shifted(s, M); });
    std::vector<cplx> r(g.ncoeff(), cplx());
    for (std::size_t i = 1; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        r[i] = (lam * lam - 2.0 * lam) * ybar[i] + fM[i];
    }
    return r;
}

/// Z(t) = ( ||phi_t_bar||_{-1}^2 + (1/beta) stat_residual^2 )^{1/2} + e^{-t/beta}.
inline double z_functional(const Grid& g, const State& st, double M, const Params& p) {
    const double a = hm1_bar(g, st.phit);
    const double r = stationary_residual(g, st.phi, M, p);
    return std::sqrt(a * a + r * r / p.beta) + std::exp(-st.t / p.beta);
}

/// G(t) = ( A0^{-1} phi_t_bar , A0^{-1} r )_{-1}  with r the stationary residual field.
inline double g_functional(const Grid& g, const State& st, double M, const Params& p) {
    auto r = stationary_residual_field(g, st.phi, M, p);
    double acc = 0.0;
    for (std::size_t i = 1; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        if (lam == 0.0) continue;
        // (A0^{-1} u, A0^{-1} v)_{-1} = sum w lambda^{-3} Re(u v*)
        acc += g.weight(i) * (st.phit[i].real() * r[i].real() + st.phit[i].imag() * r[i].imag()) /
               (lam * lam * lam);
    }
    return acc;
}

/// W(t) = beta ||phi_t_bar||_{-1}^2 + ||D phi_bar||^2 - 2 ||grad phi_bar||^2
///        + 2 int F_M(phi_bar) + nu G(t).
inline double w_functional(const Grid& g, const State& st, double M, double nu,
                           const Params& p) {
    if (nu < 0.0) throw Error("w_functional: nu must be >= 0");
    std::vector<cplx> ybar = st.phi;
    ybar[0] = cplx();
    const double kin = hm1_bar(g, st.phit);
    double w = p.beta * kin * kin + weighted_sq(g, ybar, 2.0) - 2.0 * weighted_sq(g, ybar, 1.0) +
               2.0 * potential_integral_shifted(g, ybar, M, p);
    if (nu > 0.0) w += nu * g_functional(g, st, M, p);
    return w;
}

/// Assemble a ledger row from a state; `prev` carries the running quadratures
/// of the energy identity (trapezoidal between consecutive samples).
inline LedgerRow make_ledger_row(const Grid& g, const State& st, double M, const Params& p,
                                 const LedgerRow* prev = nullptr,
                                 const MeanLaw* law = nullptr) {
    auto nl = nonlinearity(p);
    LedgerRow r;
    r.t = st.t;
    r.mean_phi = st.phi[0].real();
    r.mean_phit = st.phit[0].real();
    r.E = free_energy(g, st.phi, p);
    r.hm1_phit_bar = hm1_bar(g, st.phit);
    r.pseudoE = 0.5 * p.beta * r.hm1_phit_bar * r.hm1_phit_bar + r.E;
    r.h2_phi = sobolev_norm(g, st.phi, 2.0);
    r.stat_residual = stationary_residual(g, st.phi, M, p);
    r.z = std::sqrt(r.hm1_phit_bar * r.hm1_phit_bar +
                    r.stat_residual * r.stat_residual / p.beta) +
          std::exp(-st.t / p.beta);
    r.int_f = padded_average(g, st.phi, [&nl](double s) { return nl.f(s); });
    if (prev) {
        const double h = r.t - prev->t;
        const double diss = 0.5 * h * (prev->hm1_phit_bar * prev->hm1_phit_bar +
                                       r.hm1_phit_bar * r.hm1_phit_bar);
        double src = 0.0;
        if (law) {
            src = 0.5 * h * (law->mean_phit(prev->t) * prev->int_f +
                             law->mean_phit(r.t) * r.int_f);
        }
        // R(0,t) = E(t) - E(0) + int ||phi_t_bar||_{-1}^2 - int A(tau) int_Q f
        r.cum_identity_residual =
            prev->cum_identity_residual + (r.pseudoE - prev->pseudoE) + diss - src;
    }
    return r;
}

/// Energy identity residual over ledger rows [s_idx, t_idx]:
///   R = E(t) - E(s) + int_s^t ||phi_t_bar||_{-1}^2 - int_s^t A(tau) int_Q f(phi).
inline double energy_identity_residual(const Ledger& ledger, std::size_t s_idx,
                                       std::size_t t_idx, const MeanLaw& law) {
    if (t_idx >= ledger.size() || s_idx > t_idx || t_idx - s_idx < 2)
        throw Error("energy_identity_residual: segment too short (need >= 3 samples)");
    double diss = 0.0, src = 0.0;
    for (std::size_t i = s_idx; i < t_idx; ++i) {
        const auto& a = ledger[i];
        const auto& b = ledger[i + 1];
        const double h = b.t - a.t;
        diss += 0.5 * h * (a.hm1_phit_bar * a.hm1_phit_bar + b.hm1_phit_bar * b.hm1_phit_bar);
        src += 0.5 * h * (law.mean_phit(a.t) * a.int_f + law.mean_phit(b.t) * b.int_f);
    }
    return ledger[t_idx].pseudoE - ledger[s_idx].pseudoE + diss - src;
}

enum class RateModel { exponential, algebraic };

/// Least-squares fit in log coordinates; the first 20% of the window is
/// discarded as transient. exponential: y = A e^{-kappa t};
/// algebraic: y = C (1+t)^{-p}.
struct RateFit {
    RateModel model = RateModel::exponential;
    double amplitude = 0.0;  // A or C
    double rate = 0.0;       // kappa or p
    double t_a = 0.0, t_b = 0.0;
    double fit_residual = 0.0;  // rms residual in log space, relative to data spread
};

inline RateFit fit_rate(const std::vector<double>& ts, const std::vector<double>& ys,
                        RateModel model, double t_a, double t_b) {
    if (ts.size() != ys.size()) throw Error("fit_rate: size mismatch");
    const double cut = t_a + 0.2 * (t_b - t_a);
    std::vector<double> xs, ls;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] < cut || ts[i] > t_b) continue;
        if (!(ys[i] > 0.0)) throw Error("fit_rate: non-positive data in window");
        xs.push_back(model == RateModel::exponential ? ts[i] : std::log1p(ts[i]));
        ls.push_back(std::log(ys[i]));
    }
    if (xs.size() < 10) throw Error("fit_rate: fewer than 10 samples in window");
    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ls[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ls[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw Error("fit_rate: degenerate window");
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    double ss = 0.0, spread = 0.0;
    const double mean_l = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ls[i] - (intercept + slope * xs[i]);
        ss += r * r;
        spread += (ls[i] - mean_l) * (ls[i] - mean_l);
    }
    RateFit fit;
    fit.model = model;
    fit.amplitude = std::exp(intercept);
    fit.rate = -slope;
    fit.t_a = t_a;
    fit.t_b = t_b;
    fit.fit_residual = spread > 0.0 ? std::sqrt(ss / spread) : std::sqrt(ss / n);
    return fit;
}

/// Continuous-dependence probe: the X0 norm of the difference of two sampled
/// trajectories, plus the least-squares envelope log(d(t)/d(0)) ~ L1 + L2 t.
struct DependenceProbe {
    std::vector<double> ts;
    std::vector<double> x0_diff;
    double envelope_intercept = 0.0;  // L1
    double envelope_slope = 0.0;      // L2
};

inline DependenceProbe continuous_dependence_probe(const Grid& g,
                                                   const std::vector<State>& a,
                                                   const std::vector<State>& b) {
    if (a.size() != b.size()) throw Error("continuous_dependence_probe: sample count mismatch");
    DependenceProbe probe;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].grid != b[i].grid || a[i].grid != &g)
            throw Error("continuous_dependence_probe: grid mismatch");
        std::vector<cplx> du(g.ncoeff()), dv(g.ncoeff());
        for (std::size_t j = 0; j < g.ncoeff(); ++j) {
            du[j] = a[i].phi[j] - b[i].phi[j];
            dv[j] = a[i].phit[j] - b[i].phit[j];
        }
        probe.ts.push_back(a[i].t);
        probe.x0_diff.push_back(x_norm(g, du, dv, ProductSpace::X0));
    }
    const double d0 = probe.x0_diff.empty() ? 0.0 : probe.x0_diff.front();
    if (d0 > 0.0 && probe.ts.size() >= 2) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        double n = 0.0;
        for (std::size_t i = 0; i < probe.ts.size(); ++i) {
            if (!(probe.x0_diff[i] > 0.0)) continue;
            const double x = probe.ts[i];
            const double y = std::log(probe.x0_diff[i] / d0);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            n += 1.0;
        }
        const double denom = n * sxx - sx * sx;
        if (denom > 0.0) {
            probe.envelope_slope = (n * sxy - sx * sy) / denom;
            probe.envelope_intercept = (sy - probe.envelope_slope * sx) / n;
        }
    }
    return probe;
}

/// run() with ledger assembly at the sampling cadence.
inline Ledger run_with_ledger(State& state, const Params& params, const SchemeConfig& cfg,
                              double t_end, long sample_every,
                              const std::function<void(const State&, long)>& extra = nullptr) {
    Ledger ledger;
    const MeanLaw law = MeanLaw::from_initial(state.phi[0].real(), state.phit[0].real(),
                                              params.beta);
    Params p = params;
    p.mean_M = law.M;
    run(state, params, cfg, t_end, sample_every,
        [&](const State& st, long n) {
            const LedgerRow* prev = ledger.empty() ? nullptr : &ledger.back();
            ledger.push_back(make_ledger_row(*st.grid, st, law.M, p, prev, &law));
            if (extra) extra(st, n);
        });
    return ledger;
}

}  // namespace mpfc
