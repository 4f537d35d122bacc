#include <catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "mpfc/integrators.hpp"
#include "mpfc/model.hpp"
#include "mpfc/norms.hpp"
#include "helpers.hpp"

using namespace mpfc;
using mpfc::testing::sample_hat;
using mpfc::testing::random_field;
using Catch::Approx;

namespace {
constexpr double pi = std::numbers::pi;
constexpr double l1 = 4.0 * pi * pi;

double max_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}
}  // namespace

TEST_CASE("mean law: conserved combination and exponential slope decay") {
    const double beta = 0.7, phi0 = 0.07, phi1 = 0.2;
    auto law = MeanLaw::from_initial(phi0, phi1, beta);
    REQUIRE(law.M == Approx(beta * phi1 + phi0).margin(1e-15));
    for (double t : {0.0, 0.3, 1.0, 5.0}) {
        REQUIRE(beta * law.mean_phit(t) + law.mean_phi(t) == Approx(law.M).margin(1e-14));
        REQUIRE(law.mean_phit(t) == Approx(phi1 * std::exp(-t / beta)).margin(1e-15));
    }
}

TEST_CASE("imex2 tracks the mean law to machine precision") {
    Grid g(2, 16);
    Params p;
    p.beta = 0.5;
    State st(g);
    st.phi = random_field(g, 0.07, 0.1, 7);
    st.phit = random_field(g, 0.2, 0.05, 8);
    auto law = MeanLaw::from_initial(st.phi[0].real(), st.phit[0].real(), p.beta);
    SchemeConfig cfg;
    cfg.dt = 1e-2;
    run(st, p, cfg, 2.0, 1000, [&](const State& s, long) {
        REQUIRE(s.phi[0].real() == Approx(law.mean_phi(s.t)).margin(1e-14));
        REQUIRE(s.phit[0].real() == Approx(law.mean_phit(s.t)).margin(1e-14));
    });
}

TEST_CASE("constant state is a fixed point of every scheme") {
    Grid g(2, 16);
    Params p;
    p.epsilon = 0.25;
    for (Scheme s : {Scheme::imex2, Scheme::split1}) {
        State st(g);
        st.phi[0] = cplx(0.07, 0.0);
        SchemeConfig cfg;
        cfg.scheme = s;
        cfg.dt = 1e-2;
        run(st, p, cfg, 0.1, 1, nullptr);
        for (std::size_t i = 1; i < g.ncoeff(); ++i) {
            REQUIRE(std::abs(st.phi[i]) < 1e-13);
            REQUIRE(std::abs(st.phit[i]) < 1e-13);
        }
        REQUIRE(st.phi[0].real() == Approx(0.07).margin(1e-13));
    }
    // PFC flavour
    std::vector<cplx> phi(g.ncoeff(), cplx(0.0, 0.0));
    phi[0] = cplx(0.07, 0.0);
    SchemeConfig cfg;
    cfg.scheme = Scheme::pfc_split1;
    cfg.dt = 1e-2;
    run_pfc(g, phi, p, cfg, 0.1, 1, nullptr);
    for (std::size_t i = 1; i < g.ncoeff(); ++i) REQUIRE(std::abs(phi[i]) < 1e-13);
    REQUIRE(phi[0].real() == Approx(0.07).margin(1e-15));
}

TEST_CASE("imex2 reproduces the damped single-mode oscillator exactly") {
    // With the cubic disabled the k=1 mode obeys beta y'' + y' = -lam(lam^2-2lam+1-eps) y.
    Grid g(1, 32);
    Params p;
    p.beta = 0.5;
    p.epsilon = 0.25;
    p.cubic_enabled = false;
    State st(g);
    const double A = 0.1;
    st.phi = sample_hat(g, [A](double x, double, double) { return A * std::sin(2 * pi * x); });
    SchemeConfig cfg;
    cfg.dt = 1e-3;
    cfg.stabilizer_s = 0.0;
    run(st, p, cfg, 1.0, 1000000, nullptr);
    // frozen matrix-exponential oracle (expm of the 2x2 system at t=1, scipy)
    const std::size_t k1 = g.index_of({1, 0, 0});
    // spectral coefficient of A sin is -iA/2 at k=+1; compare mode amplitudes
    const double amp = 2.0 * std::abs(st.phi[k1]);
    const double ampt = 2.0 * std::abs(st.phit[k1]);
    REQUIRE(amp == Approx(std::abs(-0.031234313980725705)).epsilon(1e-9));
    REQUIRE(ampt == Approx(std::abs(-6.6137536364393759)).epsilon(1e-9));
}

TEST_CASE("imex2 is second order on the full nonlinear problem") {
    Grid g(1, 32);
    Params p;
    p.beta = 1.0;
    p.epsilon = 0.25;
    State base(g);
    base.phi = random_field(g, 0.07, 0.1, 17, 8.0);

    auto solve = [&](double dt) {
        State st = base;
        SchemeConfig cfg;
        cfg.dt = dt;
        run(st, p, cfg, 0.5, 1 << 30, nullptr);
        return st.phi;
    };
    auto ref = solve(1.25e-4);
    const double e1 = max_diff(solve(4e-3), ref);
    const double e2 = max_diff(solve(1e-3), ref);
    // underdamped fast modes pollute the asymptotic constant a little, so the
    // measured slope sits slightly below the clean dt^2 rate
    const double order = 0.5 * std::log2(e1 / e2);
    REQUIRE(order > 1.4);
    REQUIRE(order < 2.5);
    REQUIRE(e2 < 5e-6);
}

TEST_CASE("split1 is first order on a resolved mode") {
    // trajectory accuracy is only meaningful where omega dt << 1; the k=1
    // mode oscillates at omega ~ 242, so dt <= 4e-4 resolves it
    Grid g(1, 32);
    Params p;
    p.beta = 1.0;
    p.epsilon = 0.25;
    p.cubic_enabled = false;
    const double A = 0.1;
    State base(g);
    base.phi = sample_hat(g, [A](double x, double, double) { return A * std::sin(2 * pi * x); });
    const double lam = l1;
    const double L = lam * (lam * lam - 2.0 * lam + 1.0 - p.epsilon);
    const double w = 0.5 * std::sqrt(4.0 * L - 1.0);
    const double T = 0.05;
    const double exact = A * std::exp(-0.5 * T) * (std::cos(w * T) + std::sin(w * T) / (2 * w));
    auto err = [&](double dt) {
        State st = base;
        SchemeConfig cfg;
        cfg.scheme = Scheme::split1;
        cfg.dt = dt;
        cfg.newton_tol = 1e-14;
        run(st, p, cfg, T, 1 << 30, nullptr);
        const std::size_t k1 = g.index_of({1, 0, 0});
        return std::abs(-2.0 * st.phi[k1].imag() - exact);
    };
    const double order = std::log2(err(2e-4) / err(1e-4));
    REQUIRE(order > 0.7);
    REQUIRE(order < 1.4);
}

TEST_CASE("split1 dissipates the pseudo energy") {
    Grid g(2, 16);
    Params p;
    p.beta = 1.0;
    p.epsilon = 0.25;
    State base(g);
    base.phi = random_field(g, 0.07, 0.1, 27);
    // zero mean slope: the discrete pseudo energy law applies
    State st = base;
    SchemeConfig cfg;
    cfg.scheme = Scheme::split1;
    cfg.dt = 1e-2;
    cfg.newton_tol = 1e-14;
    double prev = pseudo_energy(g, st.phi, st.phit, p);
    run(st, p, cfg, 1.0, 1, [&](const State& s, long n) {
        if (n == 0) return;
        const double e = pseudo_energy(*s.grid, s.phi, s.phit, p);
        REQUIRE(e <= prev + 1e-11);
        prev = e;
    });
}

TEST_CASE("pfc_split1 conserves mass exactly and dissipates E") {
    Grid g(2, 16);
    Params p;
    p.epsilon = 0.25;
    auto phi = random_field(g, 0.07, 0.1, 41);
    const cplx mass0 = phi[0];
    SchemeConfig cfg;
    cfg.scheme = Scheme::pfc_split1;
    cfg.dt = 1e-2;
    cfg.newton_tol = 1e-14;
    double prev = std::numeric_limits<double>::infinity();
    run_pfc(g, phi, p, cfg, 2.0, 1,
            [&](const std::vector<cplx>& c, const std::vector<cplx>&, double, long) {
                REQUIRE(c[0] == mass0);  // bit-exact
                const double e = free_energy(g, c, p);
                REQUIRE(e <= prev + 1e-11);
                prev = e;
            });
}

TEST_CASE("small-beta MPFC approaches the PFC trajectory") {
    Grid g(1, 32);
    Params p;
    p.epsilon = 0.25;
    auto phi0 = random_field(g, 0.07, 0.05, 51);

    auto pfc = phi0;
    SchemeConfig pcfg;
    pcfg.scheme = Scheme::pfc_split1;
    pcfg.dt = 1e-4;
    pcfg.newton_tol = 1e-14;
    run_pfc(g, pfc, p, pcfg, 0.1, 1 << 30, nullptr);

    double prev_gap = std::numeric_limits<double>::infinity();
    for (double beta : {1e-2, 1e-3, 1e-4}) {
        Params pb = p;
        pb.beta = beta;
        State st(g);
        st.phi = phi0;
        // slaved slope: phi_t(0) = rhs of the PFC flow keeps the limit first order in beta
        SchemeConfig cfg;
        cfg.dt = 1e-4;
        run(st, pb, cfg, 0.1, 1 << 30, nullptr);
        const double gap = max_diff(st.phi, pfc);
        REQUIRE(gap < prev_gap);
        prev_gap = gap;
    }
    REQUIRE(prev_gap < 5e-4);
}

TEST_CASE("runs are deterministic: identical inputs give identical trajectories") {
    Grid g(2, 16);
    Params p;
    auto once = [&] {
        State st(g);
        st.phi = random_field(g, 0.07, 0.1, 99);
        st.phit = random_field(g, 0.0, 0.05, 100);
        SchemeConfig cfg;
        cfg.dt = 1e-2;
        run(st, p, cfg, 0.5, 1 << 30, nullptr);
        return st.phi;
    };
    auto a = once();
    auto b = once();
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("beta below the MPFC floor is rejected") {
    Grid g(1, 16);
    Params p;
    p.beta = 1e-9;
    SchemeConfig cfg;
    REQUIRE_THROWS_AS(Imex2Stepper(g, p, cfg, p.epsilon), Error);
}

TEST_CASE("solver failure carries a residual trace") {
    Grid g(1, 32);
    Params p;
    p.beta = 1.0;
    State st(g);
    st.phi = random_field(g, 0.07, 2.0, 61);
    SchemeConfig cfg;
    cfg.scheme = Scheme::split1;
    cfg.dt = 50.0;  // absurd step: fixed point iteration cannot contract
    cfg.newton_tol = 1e-15;
    cfg.newton_max_iter = 4;
    try {
        run(st, p, cfg, 100.0, 1, nullptr);
        FAIL("expected SolverError");
    } catch (const SolverError& e) {
        REQUIRE_FALSE(e.residual_trace.empty());
        REQUIRE(std::string(e.what()).find("did not converge") != std::string::npos);
    }
}
