#include <catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "mpfc/diagnostics.hpp"
#include "mpfc/equilibrium.hpp"
#include "helpers.hpp"

using namespace mpfc;
using mpfc::testing::sample_hat;
using mpfc::testing::random_field;
using Catch::Approx;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("constant guess at the trivial equilibrium converges immediately") {
    Grid g(2, 32);
    Params p;
    p.epsilon = 0.1;  // constant state is the minimiser for small eps / small M
    std::vector<cplx> guess(g.ncoeff(), cplx(0.0, 0.0));
    guess[0] = cplx(0.02, 0.0);
    auto out = solve_steady(g, guess, 0.02, p);
    REQUIRE(out.converged);
    REQUIRE(out.residual < 1e-11);
    REQUIRE(out.newton_iters <= 1);
    for (std::size_t i = 1; i < g.ncoeff(); ++i) REQUIRE(std::abs(out.phi_inf[i]) < 1e-12);
    REQUIRE(out.lagrange_const == Approx(nonlinearity(p).f(0.02)).margin(1e-12));
}

TEST_CASE("quadratic problem is solved in one Newton step") {
    Grid g(2, 32);
    Params p;
    p.cubic_enabled = false;  // stationary problem becomes linear
    p.epsilon = 0.25;
    auto guess = random_field(g, 0.07, 0.05, 7);
    auto out = solve_steady(g, guess, 0.07, p);
    REQUIRE(out.converged);
    // linear + SPD: only the constant solves it, and one step must land there
    REQUIRE(out.newton_iters <= 2);
    for (std::size_t i = 1; i < g.ncoeff(); ++i) REQUIRE(std::abs(out.phi_inf[i]) < 1e-9);
}

TEST_CASE("Newton and gradient-flow relaxation agree from a stripe seed") {
    // On the unit cell every mode has lambda >= (2 pi)^2, far above the
    // instability band, so the unique steady state is the constant; both
    // routes must land there with identical energy.
    Grid g(2, 32);
    Params p;
    p.epsilon = 0.5;
    const double M = 0.07;
    auto seed = sample_hat(g, [M](double x, double, double) {
        return M + 0.1 * std::sin(2 * pi * x);
    });

    auto relaxed = relax_to_steady(g, seed, M, p, 0.5, 400000, 1e-10);
    REQUIRE(relaxed.converged);
    auto newton = solve_steady(g, seed, M, p);
    REQUIRE(newton.converged);
    REQUIRE(std::abs(newton.energy - relaxed.energy) < 1e-6);
    REQUIRE(newton.residual < 1e-11);
    REQUIRE(newton.phi_inf[0].real() == Approx(M).margin(1e-13));
    std::vector<cplx> diff(g.ncoeff());
    for (std::size_t i = 0; i < g.ncoeff(); ++i)
        diff[i] = newton.phi_inf[i] - relaxed.phi_inf[i];
    REQUIRE(sobolev_norm(g, diff, 0.0) < 1e-7);
}

TEST_CASE("steady states are fixed points of the MPFC flow") {
    Grid g(2, 32);
    Params p;
    p.epsilon = 0.5;
    p.beta = 1.0;
    const double M = 0.07;
    auto seed = sample_hat(g, [M](double x, double, double) {
        return M + 0.1 * std::sin(2 * pi * x);
    });
    auto eq = relax_to_steady(g, seed, M, p);
    REQUIRE(eq.converged);
    auto refined = solve_steady(g, eq.phi_inf, M, p, 1e-13, 30);

    State st(g);
    st.phi = refined.phi_inf;
    SchemeConfig cfg;
    cfg.dt = 1e-2;
    const double before = sobolev_norm(g, st.phi, 2.0);
    run(st, p, cfg, 1.0, 1 << 30, nullptr);
    std::vector<cplx> drift(g.ncoeff());
    for (std::size_t i = 0; i < g.ncoeff(); ++i) drift[i] = st.phi[i] - refined.phi_inf[i];
    REQUIRE(sobolev_norm(g, drift, 0.0) < 1e-8 * std::max(1.0, before));
}

TEST_CASE("stationary residual at a solved state matches the solver's report") {
    Grid g(2, 32);
    Params p;
    p.epsilon = 0.5;
    const double M = 0.07;
    auto seed = sample_hat(g, [M](double x, double, double) {
        return M + 0.1 * std::sin(2 * pi * x);
    });
    auto eq = relax_to_steady(g, seed, M, p);
    auto refined = solve_steady(g, eq.phi_inf, M, p);
    REQUIRE(stationary_residual(g, refined.phi_inf, M, p) ==
            Approx(refined.residual).margin(1e-13));
}

TEST_CASE("decomposition parts sum to the full solution") {
    Grid g(2, 16);
    Params p;
    p.beta = 0.5;
    p.epsilon = 0.25;
    State init(g);
    init.phi = random_field(g, 0.07, 0.05, 11);
    init.phit = random_field(g, 0.1, 0.02, 12);
    SchemeConfig cfg;
    cfg.dt = 5e-4;
    auto dec = run_decomposition(init, p, cfg, 1.0, 25);
    // the sum identity holds up to the explicit treatment of the k-shift
    REQUIRE(dec.max_consistency < 1e-3);
    REQUIRE(dec.max_mean_d < 1e-13);          // decaying part stays mean-free
    REQUIRE(dec.split_k == Approx(p.effective_split_k()));
    REQUIRE(std::isfinite(dec.sup_x1_c));
    REQUIRE(dec.sup_x1_c > 0.0);
}

TEST_CASE("decaying part decays at roughly the inertial rate") {
    Grid g(1, 32);
    Params p;
    p.beta = 0.5;
    p.epsilon = 0.25;
    State init(g);
    init.phi = random_field(g, 0.07, 0.05, 21);
    init.phit = random_field(g, 0.05, 0.02, 22);
    SchemeConfig cfg;
    cfg.dt = 1e-3;
    auto dec = run_decomposition(init, p, cfg, 6.0, 20);
    REQUIRE(dec.fitted_kappa > 0.0);
    REQUIRE(std::isfinite(dec.kappa_fit_residual));
    // x0_d must actually shrink over the run
    REQUIRE(dec.x0_d.back() < 0.1 * dec.x0_d.front());
}
