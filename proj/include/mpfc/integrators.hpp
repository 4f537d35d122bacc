#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "mpfc/model.hpp"

namespace mpfc {

/// The pair (phi, phi_t) in spectral representation at time t.
struct State {
    const Grid* grid = nullptr;
    std::vector<cplx> phi;
    std::vector<cplx> phit;
    double t = 0.0;

    State() = default;
    State(const Grid& g) : grid(&g), phi(g.ncoeff(), cplx()), phit(g.ncoeff(), cplx()) {}
    State(const Grid& g, std::vector<cplx> p, std::vector<cplx> pt, double time = 0.0)
        : grid(&g), phi(std::move(p)), phit(std::move(pt)), t(time) {}
};

enum class Scheme { imex2, split1, pfc_split1 };

struct SchemeConfig {
    Scheme scheme = Scheme::imex2;
    double dt = 1e-3;
    double stabilizer_s = -1.0;  // < 0 means "use default max(0, eps-1)"
    double newton_tol = 1e-10;
    int newton_max_iter = 50;

    double effective_stabilizer(double epsilon) const {
        return stabilizer_s >= 0.0 ? stabilizer_s : std::max(0.0, epsilon - 1.0);
    }
    void validate() const {
        if (dt <= 0.0) throw Error("SchemeConfig: dt must be positive");
        if (newton_tol <= 0.0 || newton_max_iter < 1)
            throw Error("SchemeConfig: tolerances must be positive");
    }
};

struct SolverError : Error {
    SolverError(const std::string& msg, std::vector<double> trace = {})
        : Error(msg), residual_trace(std::move(trace)) {}
    std::vector<double> residual_trace;
};

/// Closed-form dynamics of the spatial mean: the zero mode obeys
/// beta a'' + a' = 0, hence <phi_t>(t) = a0 e^{-t/beta} and
/// <phi>(t) = M - beta a0 e^{-t/beta} with M = beta <phi_1> + <phi_0>.
struct MeanLaw {
    double M = 0.0;
    double a0 = 0.0;
    double beta = 1.0;

    static MeanLaw from_initial(double mean_phi0, double mean_phi1, double beta) {
        return MeanLaw{beta * mean_phi1 + mean_phi0, mean_phi1, beta};
    }
    double mean_phi(double t) const { return M - beta * a0 * std::exp(-t / beta); }
    double mean_phit(double t) const { return a0 * std::exp(-t / beta); }
};

namespace detail {

inline cplx phi1_fn(cplx z) {
    if (std::abs(z) < 0.1) {
        cplx acc(1.0, 0.0), term(1.0, 0.0);
        double fact = 1.0;
        for (int n = 1; n <= 10; ++n) {
            term *= z;
            fact *= static_cast<double>(n + 1);
            acc += term / fact;
        }
        return acc;
    }
    return (std::exp(z) - 1.0) / z;
}

inline cplx phi2_fn(cplx z) {
    if (std::abs(z) < 0.1) {
        cplx acc(0.5, 0.0), term(1.0, 0.0);
        double fact = 2.0;
        for (int n = 1; n <= 10; ++n) {
            term *= z;
            fact *= static_cast<double>(n + 2);
            acc += term / fact;
        }
        return acc;
    }
    return (phi1_fn(z) - 1.0) / z;
}

inline cplx dphi1_fn(cplx z) {
    if (std::abs(z) < 0.1) {
        // sum n z^{n-1} / (n+1)!
        cplx acc(0.5, 0.0), zp(1.0, 0.0);
        double fact = 2.0;
        for (int n = 2; n <= 10; ++n) {
            zp *= z;
            fact *= static_cast<double>(n + 1);
            acc += static_cast<double>(n) * zp / fact;
        }
        return acc;
    }
    return ((z - 1.0) * std::exp(z) + 1.0) / (z * z);
}

inline cplx dphi2_fn(cplx z) {
    if (std::abs(z) < 0.1) {
        cplx acc(1.0 / 6.0, 0.0), zp(1.0, 0.0);
        double fact = 6.0;
        for (int n = 2; n <= 10; ++n) {
            zp *= z;
            fact *= static_cast<double>(n + 2);
            acc += static_cast<double>(n) * zp / fact;
        }
        return acc;
    }
    return (dphi1_fn(z) - phi2_fn(z)) / z;
}

/// exp / phi1 / phi2 of the 2x2 companion matrix dt * [[0,1],[-a,-b]],
/// evaluated through its eigenvalues. Only the second columns of the
/// phi-function matrices are needed (the forcing has zero first component);
/// phi1/phi2 entries already carry the dt factor of the update formula.
struct ModePropagator {
    double e11, e12, e21, e22;   // exp(dt A)
    double p1_1, p1_2;           // dt * phi1(dt A), second column
    double p2_1, p2_2;           // dt * phi2(dt A), second column
};

inline ModePropagator mode_propagator(double a, double b, double dt) {
    const cplx disc = std::sqrt(cplx(b * b - 4.0 * a, 0.0));
    const cplx mu1 = 0.5 * (-b + disc);
    const cplx mu2 = 0.5 * (-b - disc);
    const double scale = std::max({1.0, std::abs(mu1) * dt, std::abs(mu2) * dt});

    // h(A) = h(mu1)(A - mu2 I)/(mu1 - mu2) + h(mu2)(A - mu1 I)/(mu2 - mu1),
    // or the confluent limit h(mu) I + h'(mu)(A - mu I).
    auto apply = [&](const std::function<cplx(cplx)>& h,
                     const std::function<cplx(cplx)>& dh, double mats[4]) {
        const double A11 = 0.0, A12 = 1.0, A21 = -a, A22 = -b;
        cplx m11, m12, m21, m22;
        if (std::abs(mu1 - mu2) * dt > 1e-7 * scale) {
            const cplx h1 = h(mu1 * dt), h2 = h(mu2 * dt);
            const cplx c1 = h1 / (mu1 - mu2), c2 = h2 / (mu2 - mu1);
            m11 = c1 * (A11 - mu2) + c2 * (A11 - mu1);
            m12 = (c1 + c2) * A12;
            m21 = (c1 + c2) * A21;
            m22 = c1 * (A22 - mu2) + c2 * (A22 - mu1);
        } else {
            const cplx mu = 0.5 * (mu1 + mu2);
            const cplx hv = h(mu * dt), dhv = dh(mu * dt) * dt;
            m11 = hv + dhv * (A11 - mu);
            m12 = dhv * A12;
            m21 = dhv * A21;
            m22 = hv + dhv * (A22 - mu);
        }
        mats[0] = m11.real();
        mats[1] = m12.real();
        mats[2] = m21.real();
        mats[3] = m22.real();
    };

    double E[4], P1[4], P2[4];
    apply([](cplx z) { return std::exp(z); }, [](cplx z) { return std::exp(z); }, E);
    apply(phi1_fn, dphi1_fn, P1);
    apply(phi2_fn, dphi2_fn, P2);
    return ModePropagator{E[0], E[1], E[2], E[3],
                          dt * P1[1], dt * P1[3], dt * P2[1], dt * P2[3]};
}

inline void check_finite(const std::vector<cplx>& c, long step, const char* who) {
    for (const cplx& z : c)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            std::ostringstream os;
            os << who << ": non-finite value first detected at step " << step;
            throw SolverError(os.str());
        }
}

}  // namespace detail

/// Second-order exponential integrator for the MPFC equation
///   beta phi_tt + phi_t = Lap[ Lap^2 phi + 2 Lap phi + f(phi) ].
/// Per nonzero mode the linear symbol
///   L_s = lambda (lambda^2 - 2 lambda + 1 - eps + s)
/// is propagated exactly; the dealiased remainder N = phi^3 - s phi enters
/// through a two-step exponential Adams-Bashforth rule (exponential RK on the
/// first step). The zero mode follows the closed-form mean law exactly.
class Imex2Stepper {
  public:
    using NonlinearFn = std::function<std::vector<cplx>(const State&)>;

    Imex2Stepper(const Grid& g, const Params& p, const SchemeConfig& cfg,
                 double eps_effective, NonlinearFn nonlinear = nullptr)
        : grid_(&g), params_(p), dt_(cfg.dt),
          s_(cfg.effective_stabilizer(eps_effective)), eps_(eps_effective),
          nonlinear_(std::move(nonlinear)) {
        if (p.beta < 1e-8)
            throw Error("Imex2Stepper: beta below 1e-8; use the pfc scheme instead");
        props_.resize(g.ncoeff());
        for (std::size_t i = 1; i < g.ncoeff(); ++i) {
            const double lam = g.lambda(i);
            const double L = lam * (lam * lam - 2.0 * lam + 1.0 - eps_ + s_);
            props_[i] = detail::mode_propagator(L / p.beta, 1.0 / p.beta, dt_);
        }
        if (!nonlinear_) {
            nonlinear_ = [this](const State& st) { return default_nonlinear(st); };
        }
    }

    void set_mean_law(const MeanLaw& law) { law_ = law; law_set_ = true; }
    const MeanLaw& mean_law() const { return law_; }

    /// Advance by one step of size dt.
    void step(State& st) {
        if (st.grid != grid_) throw Error("Imex2Stepper: grid mismatch");
        if (!law_set_) {
            law_ = MeanLaw::from_initial(st.phi[0].real(), st.phit[0].real(), params_.beta);
            law_set_ = true;
        }
        auto g_now = nonlinear_(st);
        const double tnew = st.t + dt_;
        if (!have_prev_) {
            // exponential RK2 bootstrap: predictor with phi1, corrector with phi2
            State pred(*grid_);
            pred.t = tnew;
            advance_linear(st, g_now, nullptr, pred);
            set_mean(pred, tnew);
            auto g_pred = nonlinear_(pred);
            State next(*grid_);
            next.t = tnew;
            advance_linear(st, g_now, nullptr, next);
            for (std::size_t i = 1; i < grid_->ncoeff(); ++i) {
                const auto& P = props_[i];
                const cplx dg = g_pred[i] - g_now[i];
                next.phi[i] += P.p2_1 * dg;
                next.phit[i] += P.p2_2 * dg;
            }
            set_mean(next, tnew);
            st = std::move(next);
        } else {
            State next(*grid_);
            next.t = tnew;
            advance_linear(st, g_now, &g_prev_, next);
            set_mean(next, tnew);
            st = std::move(next);
        }
        g_prev_ = std::move(g_now);
        have_prev_ = true;
        ++nstep_;
        detail::check_finite(st.phi, nstep_, "imex2");
    }

    void reset_history() { have_prev_ = false; law_set_ = false; nstep_ = 0; }

  private:
    std::vector<cplx> default_nonlinear(const State& st) const {
        std::vector<cplx> N(grid_->ncoeff(), cplx());
        if (params_.cubic_enabled)
            N = padded_pointwise(*grid_, st.phi, [](double v) { return v * v * v; });
        if (s_ != 0.0)
            for (std::size_t i = 0; i < grid_->ncoeff(); ++i) N[i] -= s_ * st.phi[i];
        return N;
    }

    void advance_linear(const State& st, const std::vector<cplx>& g_now,
                        const std::vector<cplx>* g_old, State& out) const {
        const double invb = 1.0 / params_.beta;
        for (std::size_t i = 1; i < grid_->ncoeff(); ++i) {
            const auto& P = props_[i];
            const double lam = grid_->lambda(i);
            const cplx gn = -lam * g_now[i] * invb;
            cplx p = P.e11 * st.phi[i] + P.e12 * st.phit[i] + P.p1_1 * gn;
            cplx v = P.e21 * st.phi[i] + P.e22 * st.phit[i] + P.p1_2 * gn;
            if (g_old) {
                const cplx dg = gn - (-lam * (*g_old)[i] * invb);
                p += P.p2_1 * dg;
                v += P.p2_2 * dg;
            }
            out.phi[i] = p;
            out.phit[i] = v;
        }
    }

    void set_mean(State& st, double t) const {
        st.phi[0] = cplx(law_.mean_phi(t), 0.0);
        st.phit[0] = cplx(law_.mean_phit(t), 0.0);
    }

    const Grid* grid_;
    Params params_;
    double dt_;
    double s_;
    double eps_;
    NonlinearFn nonlinear_;
    std::vector<detail::ModePropagator> props_;
    std::vector<cplx> g_prev_;
    bool have_prev_ = false;
    bool law_set_ = false;
    MeanLaw law_{};
    long nstep_ = 0;
};

/// First-order convex-splitting scheme for MPFC. The convex energy part
///   1/2 ||D phi||^2 + int( 1/4 phi^4 + (1-eps+Cs)/2 phi^2 )
/// is implicit, the concave remainder explicit; the implicit cubic is solved
/// by a damped fixed-point iteration in spectral space. With <phi_1> = 0 the
/// discrete pseudo energy is nonincreasing for every dt.
class Split1Stepper {
  public:
    Split1Stepper(const Grid& g, const Params& p, const SchemeConfig& cfg,
                  double eps_effective)
        : grid_(&g), params_(p), cfg_(cfg), eps_(eps_effective),
          cs_(std::max(0.0, eps_effective - 1.0) + 1.0) {
        if (p.beta < 1e-8)
            throw Error("Split1Stepper: beta below 1e-8; use the pfc scheme instead");
        const double a = p.beta / (cfg.dt * cfg.dt) + 1.0 / cfg.dt;
        diag_.resize(g.ncoeff());
        for (std::size_t i = 1; i < g.ncoeff(); ++i) {
            const double lam = g.lambda(i);
            diag_[i] = a + lam * lam * lam + lam * (1.0 - eps_ + cs_);
        }
    }

    void set_mean_law(const MeanLaw& law) { law_ = law; law_set_ = true; }

    void step(State& st) {
        if (st.grid != grid_) throw Error("Split1Stepper: grid mismatch");
        if (!law_set_) {
            law_ = MeanLaw::from_initial(st.phi[0].real(), st.phit[0].real(), params_.beta);
            law_set_ = true;
        }
        const double dt = cfg_.dt;
        const double a = params_.beta / (dt * dt) + 1.0 / dt;
        const std::size_t nc = grid_->ncoeff();

        std::vector<cplx> rhs(nc, cplx());
        for (std::size_t i = 1; i < nc; ++i) {
            const double lam = grid_->lambda(i);
            rhs[i] = a * st.phi[i] + params_.beta / dt * st.phit[i] +
                     (2.0 * lam * lam + cs_ * lam) * st.phi[i];
        }

        std::vector<cplx> phin = solve_implicit(st.phi, rhs, a);

        State next(*grid_);
        next.t = st.t + dt;
        for (std::size_t i = 1; i < nc; ++i) {
            next.phi[i] = phin[i];
            next.phit[i] = (phin[i] - st.phi[i]) / dt;
        }
        next.phi[0] = cplx(law_.mean_phi(next.t), 0.0);
        next.phit[0] = cplx(law_.mean_phit(next.t), 0.0);
        st = std::move(next);
        ++nstep_;
        detail::check_finite(st.phi, nstep_, "split1");
    }

  private:
    std::vector<cplx> cubic_hat(const std::vector<cplx>& phi) const {
        if (!params_.cubic_enabled) return std::vector<cplx>(grid_->ncoeff(), cplx());
        return padded_pointwise(*grid_, phi, [](double v) { return v * v * v; });
    }

    std::vector<cplx> solve_implicit(const std::vector<cplx>& guess,
                                     const std::vector<cplx>& rhs, double /*a*/) const {
        const std::size_t nc = grid_->ncoeff();
        std::vector<cplx> phi = guess;
        phi[0] = cplx();
        double rhs_norm = 0.0;
        for (std::size_t i = 1; i < nc; ++i)
            rhs_norm += grid_->weight(i) * std::norm(rhs[i]);
        rhs_norm = std::sqrt(rhs_norm);
        const double floor_norm = std::max(rhs_norm, 1e-30);

        std::vector<double> trace;
        double prev_res = std::numeric_limits<double>::infinity();
        double damping = 1.0;
        for (int it = 0; it < cfg_.newton_max_iter; ++it) {
            auto cub = cubic_hat(phi);
            double res = 0.0;
            std::vector<cplx> update(nc, cplx());
            for (std::size_t i = 1; i < nc; ++i) {
                const double lam = grid_->lambda(i);
                const cplx r = diag_[i] * phi[i] + lam * cub[i] - rhs[i];
                res += grid_->weight(i) * std::norm(r);
                update[i] = (rhs[i] - lam * cub[i]) / diag_[i];
            }
            res = std::sqrt(res) / floor_norm;
            trace.push_back(res);
            if (res < cfg_.newton_tol) return phi;
            damping = (res > prev_res) ? std::max(0.25, 0.5 * damping) : std::min(1.0, 1.5 * damping);
            prev_res = res;
            for (std::size_t i = 1; i < nc; ++i)
                phi[i] += damping * (update[i] - phi[i]);
        }
        throw SolverError("split1: implicit solve did not converge", trace);
    }

    const Grid* grid_;
    Params params_;
    SchemeConfig cfg_;
    double eps_;
    double cs_;
    std::vector<double> diag_;
    MeanLaw law_{};
    bool law_set_ = false;
    long nstep_ = 0;
};

/// First-order convex-splitting scheme for the PFC gradient flow
///   phi_t = Lap[ Lap^2 phi + 2 Lap phi + f(phi) ].
/// The zero mode is untouched (exact mass conservation); the discrete free
/// energy is nonincreasing for every dt.
class PfcStepper {
  public:
    PfcStepper(const Grid& g, const Params& p, const SchemeConfig& cfg)
        : grid_(&g), params_(p), cfg_(cfg),
          cs_(std::max(0.0, p.epsilon - 1.0) + 1.0) {
        diag_.resize(g.ncoeff());
        for (std::size_t i = 1; i < g.ncoeff(); ++i) {
            const double lam = g.lambda(i);
            diag_[i] = 1.0 / cfg.dt + lam * lam * lam + lam * (1.0 - p.epsilon + cs_);
        }
    }

    /// Advance phi by one step; returns the discrete time derivative
    /// (phi^{n+1} - phi^n)/dt in spectral form.
    std::vector<cplx> step(std::vector<cplx>& phi) {
        const std::size_t nc = grid_->ncoeff();
        std::vector<cplx> rhs(nc, cplx());
        for (std::size_t i = 1; i < nc; ++i) {
            const double lam = grid_->lambda(i);
            rhs[i] = phi[i] / cfg_.dt + (2.0 * lam * lam + cs_ * lam) * phi[i];
        }
        std::vector<cplx> next = phi;
        next[0] = cplx();
        std::vector<double> trace;
        double prev_res = std::numeric_limits<double>::infinity();
        double damping = 1.0;
        double rhs_norm = 0.0;
        for (std::size_t i = 1; i < nc; ++i) rhs_norm += grid_->weight(i) * std::norm(rhs[i]);
        rhs_norm = std::max(std::sqrt(rhs_norm), 1e-30);
        bool done = false;
        for (int it = 0; it < cfg_.newton_max_iter && !done; ++it) {
            std::vector<cplx> cub(nc, cplx());
            if (params_.cubic_enabled)
                cub = padded_pointwise(*grid_, next, [](double v) { return v * v * v; });
            double res = 0.0;
            std::vector<cplx> target(nc, cplx());
            for (std::size_t i = 1; i < nc; ++i) {
                const double lam = grid_->lambda(i);
                const cplx r = diag_[i] * next[i] + lam * cub[i] - rhs[i];
                res += grid_->weight(i) * std::norm(r);
                target[i] = (rhs[i] - lam * cub[i]) / diag_[i];
            }
            res = std::sqrt(res) / rhs_norm;
            trace.push_back(res);
            if (res < cfg_.newton_tol) { done = true; break; }
            damping = (res > prev_res) ? std::max(0.25, 0.5 * damping) : std::min(1.0, 1.5 * damping);
            prev_res = res;
            for (std::size_t i = 1; i < nc; ++i)
                next[i] += damping * (target[i] - next[i]);
        }
        if (!done) throw SolverError("pfc_split1: implicit solve did not converge", trace);
        std::vector<cplx> dphidt(nc, cplx());
        for (std::size_t i = 1; i < nc; ++i) dphidt[i] = (next[i] - phi[i]) / cfg_.dt;
        const cplx mean0 = phi[0];
        phi = std::move(next);
        phi[0] = mean0;  // mass conservation, bit exact
        ++nstep_;
        detail::check_finite(phi, nstep_, "pfc_split1");
        return dphidt;
    }

  private:
    const Grid* grid_;
    Params params_;
    SchemeConfig cfg_;
    double cs_;
    std::vector<double> diag_;
    long nstep_ = 0;
};

/// Advance `state` to t_end, invoking `on_sample(state, step_index)` at the
/// initial state, every `sample_every` steps and at the final step.
inline void run(State& state, const Params& params, const SchemeConfig& cfg, double t_end,
                long sample_every,
                const std::function<void(const State&, long)>& on_sample) {
    cfg.validate();
    params.validate();
    const double t0 = state.t;
    const long nsteps =
        (t_end <= t0) ? 0 : static_cast<long>(std::llround((t_end - t0) / cfg.dt));
    if (sample_every < 1) sample_every = 1;

    std::optional<Imex2Stepper> imex;
    std::optional<Split1Stepper> split;
    if (cfg.scheme == Scheme::imex2)
        imex.emplace(*state.grid, params, cfg, params.epsilon);
    else if (cfg.scheme == Scheme::split1)
        split.emplace(*state.grid, params, cfg, params.epsilon);
    else
        throw Error("run: pfc_split1 drives a phi-only trajectory; use the pfc driver");

    if (on_sample) on_sample(state, 0);
    for (long n = 1; n <= nsteps; ++n) {
        if (imex) imex->step(state); else split->step(state);
        state.t = t0 + static_cast<double>(n) * cfg.dt;
        if (on_sample && (n % sample_every == 0 || n == nsteps)) on_sample(state, n);
    }
}

/// PFC driver: advances phi only; reports (phi, dphi/dt, t) at the cadence.
inline void run_pfc(const Grid& g, std::vector<cplx>& phi, const Params& params,
                    const SchemeConfig& cfg, double t_end, long sample_every,
                    const std::function<void(const std::vector<cplx>&, const std::vector<cplx>&,
                                             double, long)>& on_sample) {
    cfg.validate();
    const long nsteps = (t_end <= 0.0) ? 0 : static_cast<long>(std::llround(t_end / cfg.dt));
    if (sample_every < 1) sample_every = 1;
    PfcStepper stepper(g, params, cfg);
    if (on_sample) on_sample(phi, std::vector<cplx>(g.ncoeff(), cplx()), 0.0, 0);
    for (long n = 1; n <= nsteps; ++n) {
        auto dphidt = stepper.step(phi);
        const double t = static_cast<double>(n) * cfg.dt;
        if (on_sample && (n % sample_every == 0 || n == nsteps)) on_sample(phi, dphidt, t, n);
    }
}

}  // namespace mpfc
