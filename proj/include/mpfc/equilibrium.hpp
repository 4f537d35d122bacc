#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mpfc/diagnostics.hpp"

namespace mpfc {

/// An equilibrium phi_inf of  Lap^2 phi + 2 Lap phi + f(phi) = const  with
/// <phi_inf> = M. Stored spectrally with the mean pinned into slot 0.
struct SteadyState {
    const Grid* grid = nullptr;
    std::vector<cplx> phi_inf;
    double M = 0.0;
    double lagrange_const = 0.0;
    double residual = 0.0;
    double energy = 0.0;
    bool converged = false;
    int newton_iters = 0;
    std::string flag;  // empty when clean
};

namespace detail {

// Weighted real inner product on mean-free spectra (the discrete L2 pairing).
inline double dot(const Grid& g, const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double s = 0.0;
    for (std::size_t i = 1; i < g.ncoeff(); ++i)
        s += g.weight(i) * (a[i].real() * b[i].real() + a[i].imag() * b[i].imag());
    return s;
}

}  // namespace detail

/// Newton iteration on the mean-free projection of the stationary operator;
/// the Jacobian is applied matrix-free in spectral space and inner solves use
/// CG preconditioned by (biharmonic + sigma I)^{-1}. The mean never enters
/// the unknowns; the Lagrange constant is recovered as <f(phi_inf)> afterward.
inline SteadyState solve_steady(const Grid& g, const std::vector<cplx>& guess, double M,
                                const Params& params, double tol = 1e-11,
                                int max_iter = 30, double sigma = -1.0) {
    if (tol <= 0.0) throw Error("solve_steady: tol must be positive");
    if (sigma < 0.0) sigma = std::pow(2.0 * M_PI, 4.0);
    auto nl = nonlinearity(params);
    const std::size_t nc = g.ncoeff();

    std::vector<cplx> y = guess;  // mean-free unknown
    y[0] = cplx();
    dealias(g, y);

    auto residual_field = [&](const std::vector<cplx>& yb) {
        auto fM = padded_pointwise(g, yb, [&](double s) { return nl.f_shifted(s, M); });
        std::vector<cplx> r(nc, cplx());
        for (std::size_t i = 1; i < nc; ++i) {
            const double lam = g.lambda(i);
            r[i] = (lam * lam - 2.0 * lam) * yb[i] + fM[i];
        }
        return r;
    };
    auto hm2 = [&](const std::vector<cplx>& r) { return sobolev_norm(g, r, -2.0); };

    SteadyState out;
    out.grid = &g;
    out.M = M;

    auto r = residual_field(y);
    double rnorm = hm2(r);
    bool stagnated = false;

    for (int it = 0; it < max_iter && rnorm > tol; ++it) {
        // J v = (lam^2 - 2 lam) v + P0[ f_M'(y) v ]   (SPD for eps < 1)
        auto fprime = [&](const std::vector<cplx>& v) {
            return padded_pointwise2(g, y, v, [&](double yy, double vv) {
                return nl.fprime_shifted(yy, M) * vv;
            });
        };
        auto apply_J = [&](const std::vector<cplx>& v) {
            auto jp = fprime(v);
            std::vector<cplx> o(nc, cplx());
            for (std::size_t i = 1; i < nc; ++i) {
                const double lam = g.lambda(i);
                o[i] = (lam * lam - 2.0 * lam) * v[i] + jp[i];
            }
            return o;
        };
        auto precond = [&](const std::vector<cplx>& v) {
            std::vector<cplx> o(nc, cplx());
            for (std::size_t i = 1; i < nc; ++i) {
                const double lam = g.lambda(i);
                o[i] = v[i] / (lam * lam + sigma);
            }
            return o;
        };

        // CG for J d = -r
        std::vector<cplx> d(nc, cplx());
        std::vector<cplx> res(nc);
        for (std::size_t i = 0; i < nc; ++i) res[i] = -r[i];
        auto z = precond(res);
        auto p = z;
        double rz = detail::dot(g, res, z);
        const double res0 = std::sqrt(std::max(detail::dot(g, res, res), 1e-300));
        bool cg_ok = false;
        const int cg_max = 500;
        for (int cg = 0; cg < cg_max; ++cg) {
            auto Jp = apply_J(p);
            const double pJp = detail::dot(g, p, Jp);
            if (!(pJp > 0.0)) { stagnated = true; break; }
            const double alpha = rz / pJp;
            for (std::size_t i = 1; i < nc; ++i) {
                d[i] += alpha * p[i];
                res[i] -= alpha * Jp[i];
            }
            const double rn = std::sqrt(detail::dot(g, res, res));
            if (rn < 1e-12 * res0 || rn < 1e-16) { cg_ok = true; break; }
            auto z2 = precond(res);
            const double rz2 = detail::dot(g, res, z2);
            const double bet = rz2 / rz;
            rz = rz2;
            for (std::size_t i = 1; i < nc; ++i) p[i] = z2[i] + bet * p[i];
        }
        if (!cg_ok && !stagnated) {
            const double rn = std::sqrt(detail::dot(g, res, res));
            if (rn > 0.5 * res0) stagnated = true;
        }
        if (stagnated) {
            out.flag = "jacobian near-singular: Krylov stagnation";
            break;
        }

        // backtracking on the H^-2 residual
        double step = 1.0;
        std::vector<cplx> y_new(nc);
        double rnorm_new = rnorm;
        std::vector<cplx> r_new;
        for (int bt = 0; bt < 12; ++bt) {
            for (std::size_t i = 0; i < nc; ++i) y_new[i] = y[i] + step * d[i];
            y_new[0] = cplx();
            r_new = residual_field(y_new);
            rnorm_new = hm2(r_new);
            if (rnorm_new < rnorm * (1.0 - 1e-4 * step) || rnorm_new < tol) break;
            step *= 0.5;
        }
        if (rnorm_new >= rnorm && rnorm > tol) {
            out.flag = "line search failed to reduce residual";
            break;
        }
        y = std::move(y_new);
        r = std::move(r_new);
        rnorm = rnorm_new;
        out.newton_iters = it + 1;
    }

    out.phi_inf = y;
    out.phi_inf[0] = cplx(M, 0.0);
    out.residual = rnorm;
    out.converged = rnorm <= tol;
    if (!out.converged && out.flag.empty()) out.flag = "max_iter exceeded";
    out.lagrange_const = padded_average(g, y, [&](double s) { return nl.f(s + M); });
    out.energy = free_energy(g, out.phi_inf, params);
    return out;
}

/// Gradient-flow route to equilibrium: evolve the PFC scheme until
/// ||phi_t||_{-1} drops below the threshold, then package the result.
inline SteadyState relax_to_steady(const Grid& g, const std::vector<cplx>& initial, double M,
                                   const Params& params, double dt = 1.0,
                                   long max_steps = 200000, double phit_threshold = 1e-9) {
    std::vector<cplx> phi = initial;
    phi[0] = cplx(M, 0.0);
    dealias(g, phi);
    phi[0] = cplx(M, 0.0);

    SchemeConfig cfg;
    cfg.scheme = Scheme::pfc_split1;
    cfg.dt = dt;
    cfg.newton_tol = 1e-13;
    cfg.newton_max_iter = 200;
    PfcStepper stepper(g, params, cfg);

    SteadyState out;
    out.grid = &g;
    out.M = M;
    bool reached = false;
    for (long n = 0; n < max_steps; ++n) {
        auto dphidt = stepper.step(phi);
        if (hm1_bar(g, dphidt) < phit_threshold) { reached = true; break; }
    }
    out.phi_inf = phi;
    out.residual = stationary_residual(g, phi, M, params);
    out.converged = reached;
    if (!reached) out.flag = "step budget exhausted before ||phi_t||_{-1} threshold";
    auto nl = nonlinearity(params);
    std::vector<cplx> ybar = phi;
    ybar[0] = cplx();
    out.lagrange_const = padded_average(g, ybar, [&](double s) { return nl.f(s + M); });
    out.energy = free_energy(g, phi, params);
    return out;
}

/// Result of the decaying/compact splitting run: the d-part solves the
/// monotone problem with f_k and mean-zero data, the c-part carries the means
/// and the k phi_bar source; their sum tracks the full solution.
struct DecompositionRun {
    std::vector<double> ts;
    std::vector<double> x0_d;           // ||(phi_d, phi_d_t)||_{X0}
    std::vector<double> x1_c;           // ||(phi_c, phi_c_t)||_{X1}
    std::vector<double> consistency;    // ||phi_d + phi_c - phi|| in L2
    double max_mean_d = 0.0;            // max |<phi_d>|, |<phi_d_t>|
    double sup_x1_c = 0.0;
    double max_consistency = 0.0;
    double fitted_kappa = 0.0;
    double kappa_fit_residual = 0.0;
    double split_k = 0.0;
    State full, d_state, c_state;
};

inline DecompositionRun run_decomposition(const State& initial, const Params& params,
                                          const SchemeConfig& cfg, double t_end,
                                          long sample_every = 1,
                                          double consistency_tol = 1.0) {
    const Grid& g = *initial.grid;
    params.validate();
    cfg.validate();
    const double k = params.effective_split_k();
    const double eps_d = params.epsilon - k;  // 1 - eps + k implicit linear coefficient

    State full = initial;
    State d(g), c(g);
    for (std::size_t i = 1; i < g.ncoeff(); ++i) {
        d.phi[i] = initial.phi[i];
        d.phit[i] = initial.phit[i];
    }
    c.phi[0] = initial.phi[0];
    c.phit[0] = initial.phit[0];

    Imex2Stepper full_stepper(g, params, cfg, params.epsilon);

    Params pd = params;
    Imex2Stepper d_stepper(g, pd, cfg, eps_d);
    d_stepper.set_mean_law(MeanLaw{0.0, 0.0, params.beta});

    // c-equation nonlinearity: phi^3 - (phi - phi_c)^3 - k phi_bar,
    // with the full solution frozen at the current step level.
    std::vector<cplx> phi_full_now = full.phi;
    const bool cubic = params.cubic_enabled;
    auto c_nonlinear = [&g, &phi_full_now, k, cubic](const State& st) {
        std::vector<cplx> N(g.ncoeff(), cplx());
        if (cubic)
            N = padded_pointwise2(g, phi_full_now, st.phi, [](double p, double c) {
                const double q = p - c;
                return p * p * p - q * q * q;
            });
        for (std::size_t i = 1; i < g.ncoeff(); ++i) N[i] -= k * phi_full_now[i];
        return N;
    };
    Imex2Stepper c_stepper(g, params, cfg, eps_d, c_nonlinear);
    c_stepper.set_mean_law(
        MeanLaw::from_initial(initial.phi[0].real(), initial.phit[0].real(), params.beta));

    DecompositionRun out;
    out.split_k = k;
    const long nsteps = (t_end <= 0.0) ? 0 : static_cast<long>(std::llround(t_end / cfg.dt));
    if (sample_every < 1) sample_every = 1;

    auto record = [&](double t) {
        out.ts.push_back(t);
        out.x0_d.push_back(x_norm(g, d.phi, d.phit, ProductSpace::X0));
        out.x1_c.push_back(x_norm(g, c.phi, c.phit, ProductSpace::X1));
        std::vector<cplx> diff(g.ncoeff());
        for (std::size_t i = 0; i < g.ncoeff(); ++i)
            diff[i] = d.phi[i] + c.phi[i] - full.phi[i];
        out.consistency.push_back(sobolev_norm(g, diff, 0.0));
        out.max_mean_d = std::max({out.max_mean_d, std::abs(d.phi[0].real()),
                                   std::abs(d.phit[0].real())});
    };
    record(0.0);
    for (long n = 1; n <= nsteps; ++n) {
        phi_full_now = full.phi;
        full_stepper.step(full);
        d_stepper.step(d);
        c_stepper.step(c);
        const double t = static_cast<double>(n) * cfg.dt;
        full.t = d.t = c.t = t;
        if (n % sample_every == 0 || n == nsteps) record(t);
    }

    out.sup_x1_c = *std::max_element(out.x1_c.begin(), out.x1_c.end());
    out.max_consistency = *std::max_element(out.consistency.begin(), out.consistency.end());
    if (out.max_consistency > consistency_tol) {
        throw SolverError("run_decomposition: |phi_d + phi_c - phi| breached tolerance (" +
                          std::to_string(out.max_consistency) + ")");
    }
    if (out.ts.size() >= 12 && out.ts.back() > 0.0) {
        // exponential fit over the latter half of the run
        const double ta = 0.5 * out.ts.back(), tb = out.ts.back();
        try {
            auto fit = fit_rate(out.ts, out.x0_d, RateModel::exponential, ta, tb);
            out.fitted_kappa = fit.rate;
            out.kappa_fit_residual = fit.fit_residual;
        } catch (const Error&) {
            out.fitted_kappa = 0.0;
        }
    }
    out.full = std::move(full);
    out.d_state = std::move(d);
    out.c_state = std::move(c);
    return out;
}

}  // namespace mpfc
