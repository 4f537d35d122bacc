#pragma once

#include <algorithm>
#include <cmath>

#include "mpfc/field.hpp"
#include "mpfc/norms.hpp"

namespace mpfc {

/// Physical constants of the run. split_k must keep f_k monotone, i.e.
/// f_k'(s) = 3 s^2 + 1 - epsilon + k >= 0.
struct Params {
    double beta = 1.0;
    double epsilon = 0.25;
    double split_k = 0.0;  // 0 means "use default_split_k()"
    double mean_M = 0.0;
    bool cubic_enabled = true;

    static double default_split_k(double epsilon) {
        return std::max(0.0, epsilon - 1.0) + 1.0;
    }
    double effective_split_k() const {
        return split_k > 0.0 ? split_k : default_split_k(epsilon);
    }
    void validate() const {
        if (beta <= 0.0) throw Error("Params: beta must be positive");
        if (split_k > 0.0 && split_k < std::max(0.0, epsilon - 1.0))
            throw Error("Params: split_k must be >= max(0, epsilon-1)");
    }
};

/// Cubic nonlinearity f(s) = s^3 + (1-eps) s with potential
/// F(s) = (1-eps)/2 s^2 + 1/4 s^4. The cubic term can be switched off,
/// leaving the linear part (used by the closed-form oracles).
struct Nonlinearity {
    double eps = 0.25;
    bool cubic = true;

    double f(double s) const { return (cubic ? s * s * s : 0.0) + (1.0 - eps) * s; }
    double F(double s) const {
        return 0.5 * (1.0 - eps) * s * s + (cubic ? 0.25 * s * s * s * s : 0.0);
    }
    double fprime(double s) const { return (cubic ? 3.0 * s * s : 0.0) + (1.0 - eps); }

    double f_shifted(double y, double M) const { return f(y + M); }
    double F_shifted(double y, double M) const { return F(y + M); }
    double fprime_shifted(double y, double M) const { return fprime(y + M); }
    double f_split(double y, double k) const { return f(y) + k * y; }
};

inline Nonlinearity nonlinearity(const Params& p) { return Nonlinearity{p.epsilon, p.cubic_enabled}; }

inline Field f_eval(const Field& phi, const Params& p) {
    auto nl = nonlinearity(p);
    Field out(*phi.grid);
    for (std::size_t i = 0; i < phi.values.size(); ++i) out.values[i] = nl.f(phi.values[i]);
    return out;
}

inline Field F_eval(const Field& phi, const Params& p) {
    auto nl = nonlinearity(p);
    Field out(*phi.grid);
    for (std::size_t i = 0; i < phi.values.size(); ++i) out.values[i] = nl.F(phi.values[i]);
    return out;
}

inline Field f_prime(const Field& phi, const Params& p) {
    auto nl = nonlinearity(p);
    Field out(*phi.grid);
    for (std::size_t i = 0; i < phi.values.size(); ++i) out.values[i] = nl.fprime(phi.values[i]);
    return out;
}

inline Field f_shifted(const Field& y, double M, const Params& p) {
    auto nl = nonlinearity(p);
    Field out(*y.grid);
    for (std::size_t i = 0; i < y.values.size(); ++i) out.values[i] = nl.f_shifted(y.values[i], M);
    return out;
}

inline Field f_split(const Field& y, const Params& p) {
    auto nl = nonlinearity(p);
    const double k = p.effective_split_k();
    Field out(*y.grid);
    for (std::size_t i = 0; i < y.values.size(); ++i) out.values[i] = nl.f_split(y.values[i], k);
    return out;
}

/// E(phi) = int ( 1/2 |D phi|^2 - |grad phi|^2 + F(phi) ) dx. Quadratic
/// terms are summed spectrally, int F(phi) on the padded grid.
inline double free_energy(const Grid& g, const std::vector<cplx>& phi_hat, const Params& p) {
    auto nl = nonlinearity(p);
    const double quad = 0.5 * weighted_sq(g, phi_hat, 2.0) - weighted_sq(g, phi_hat, 1.0);
    const double potential =
        padded_average(g, phi_hat, [&nl](double s) { return nl.F(s); });
    return quad + potential;
}

inline double free_energy(const Field& phi, const Params& p) {
    return free_energy(*phi.grid, transform(phi), p);
}

/// int F(phi + M shift applied) dx for the W functional (F_M on mean-free input).
inline double potential_integral_shifted(const Grid& g, const std::vector<cplx>& ybar_hat,
                                         double M, const Params& p) {
    auto nl = nonlinearity(p);
    return padded_average(g, ybar_hat, [&nl, M](double s) { return nl.F_shifted(s, M); });
}

/// Pseudo energy  E(t) = beta/2 ||phi_t_bar||_{-1}^2 + E(phi).
inline double pseudo_energy(const Grid& g, const std::vector<cplx>& phi_hat,
                            const std::vector<cplx>& phit_hat, const Params& p) {
    const double kin = hm1_bar(g, phit_hat);
    return 0.5 * p.beta * kin * kin + free_energy(g, phi_hat, p);
}

/// Unbarred variant: beta/2 ||phi_t||_{-1}^2 + E(phi), mean term included.
inline double pseudo_energy_unbarred(const Grid& g, const std::vector<cplx>& phi_hat,
                                     const std::vector<cplx>& phit_hat, const Params& p) {
    const double kin = sobolev_norm(g, phit_hat, -1.0);
    return 0.5 * p.beta * kin * kin + free_energy(g, phi_hat, p);
}

/// Quadratic energy of the linearized problem,
///   E0 = beta/2 ||psi_t_bar||_{-1}^2 + 1/2 ||D psi||^2 - ||grad psi||^2
///        + Lambda/2 ||psi_bar||_{-1}^2.
inline double quadratic_energy(const Grid& g, const std::vector<cplx>& psi_hat,
                               const std::vector<cplx>& psit_hat, double lambda_cap,
                               const Params& p) {
    const double kin = hm1_bar(g, psit_hat);
    return 0.5 * p.beta * kin * kin + 0.5 * weighted_sq(g, psi_hat, 2.0) -
           weighted_sq(g, psi_hat, 1.0) +
           0.5 * lambda_cap * weighted_sq(g, psi_hat, -1.0);
}

/// Smallest Lambda making the per-mode quadratic form
///   1/2 lambda^2 - lambda + Lambda/(2 lambda)  nonnegative on every mode,
/// i.e. max_k lambda_k^2 (2 - lambda_k), clamped at zero.
inline double minimal_quadratic_lambda(const Grid& g) {
    double worst = 0.0;
    for (std::size_t i = 1; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        if (lam == 0.0) continue;
        worst = std::max(worst, lam * lam * (2.0 - lam));
    }
    return worst;
}

/// c1 = sup_s (s^2 - F(s)) for the lower bound E >= 1/4 ||D phi||^2 + ||phi||^2 - c1.
inline double energy_lower_bound_constant(const Params& p) {
    auto nl = nonlinearity(p);
    if (!p.cubic_enabled) {
        // s^2 - (1-eps)/2 s^2 unbounded when eps > -1; only meaningful with the quartic.
        throw Error("energy_lower_bound_constant: requires the cubic nonlinearity");
    }
    // g(s) = s^2 - F(s) is even, concave at infinity; golden-section on [0, s_max].
    auto gfun = [&nl](double s) { return s * s - nl.F(s); };
    double lo = 0.0, hi = 4.0 + std::sqrt(std::abs(1.0 + p.epsilon));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    for (int it = 0; it < 200; ++it) {
        if (gfun(c) > gfun(d)) b = d; else a = c;
        c = b - gr * (b - a);
        d = a + gr * (b - a);
    }
    return std::max(gfun(0.5 * (a + b)), 0.0);
}

}  // namespace mpfc
