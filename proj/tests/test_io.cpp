#include <catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "mpfc/config.hpp"
#include "mpfc/norms.hpp"
#include "mpfc/snapshot.hpp"
#include "helpers.hpp"

using namespace mpfc;
using mpfc::testing::sample;
using Catch::Approx;

namespace {
constexpr double pi = std::numbers::pi;

const char* valid_config = R"(
[grid]
dim = 2
n = 32

[params]
beta = 0.5
epsilon = 0.25

[scheme]
name = imex2
dt = 1e-3

[initial.phi0]
kind = random_smooth
mean = 0.07
amplitude = 0.1

[initial.phi1]
kind = constant
mean = 0.0

[run]
t_end = 1.0
sample_every = 10
seed = 7
)";
}  // namespace

TEST_CASE("snapshot round trip preserves data, shape and time") {
    Grid g(2, 16);
    auto f = sample(g, [](double x, double y, double) {
        return 0.07 + std::sin(2 * pi * x) * std::cos(4 * pi * y);
    });
    const std::string path = "/tmp/mpfc_snapshot_test.bin";
    write_snapshot(path, f, 1.25);
    SnapshotHeader header;
    Field back = read_snapshot(path, g, &header);
    REQUIRE(header.dim == 2);
    REQUIRE(header.n == std::vector<int>{16, 16});
    REQUIRE(header.t == 1.25);
    REQUIRE(back.values.size() == f.values.size());
    for (std::size_t j = 0; j < back.values.size(); ++j)
        REQUIRE(back.values[j] == f.values[j]);
    std::filesystem::remove(path);
}

TEST_CASE("snapshot rejects a corrupted magic string") {
    const std::string path = "/tmp/mpfc_snapshot_bad.bin";
    {
        Grid g(1, 16);
        write_snapshot(path, sample(g, [](double x, double, double) { return x; }), 0.0);
    }
    {
        std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
        fs.seekp(0);
        fs.put('X');
    }
    Grid g(1, 16);
    REQUIRE_THROWS_AS(read_snapshot(path, g), Error);
    std::filesystem::remove(path);
}

TEST_CASE("a valid config parses with expected fields and defaults") {
    auto cfg = parse_config(valid_config);
    REQUIRE(cfg.dim == 2);
    REQUIRE(cfg.resolved_n() == 32);
    REQUIRE(cfg.padding == Approx(2.0));
    REQUIRE(cfg.params.beta == Approx(0.5));
    REQUIRE(cfg.scheme.scheme == Scheme::imex2);
    REQUIRE(cfg.scheme.dt == Approx(1e-3));
    REQUIRE(cfg.phi0.kind == InitialKind::random_smooth);
    REQUIRE(cfg.phi0.mean == Approx(0.07));
    REQUIRE(cfg.phi1.kind == InitialKind::constant);
    REQUIRE(cfg.seed == 7);
}

TEST_CASE("default resolution depends on dimension") {
    RunConfig cfg;
    cfg.dim = 2;
    REQUIRE(cfg.resolved_n() == 64);
    cfg.dim = 3;
    REQUIRE(cfg.resolved_n() == 32);
}

TEST_CASE("config errors are collected with line numbers") {
    std::string bad = valid_config;
    bad += "\n[grid]\n";  // duplicate section is fine, but bad keys are not
    bad += "wavelength = 12\n";
    try {
        parse_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("wavelength") != std::string::npos);
        REQUIRE(msg.find("line") != std::string::npos);
    }
}

TEST_CASE("tiny beta is rejected with a pointer at the pfc subcommand") {
    std::string bad = valid_config;
    const auto pos = bad.find("beta = 0.5");
    bad.replace(pos, 10, "beta = 1e-9");
    try {
        parse_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("pfc") != std::string::npos);
    }
}

TEST_CASE("multiple violations are reported together") {
    const char* text = R"(
[grid]
dim = 7
n = 13

[scheme]
dt = -1
)";
    try {
        parse_config(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("dim") != std::string::npos);
        REQUIRE(msg.find("n must be even") != std::string::npos);
        REQUIRE(msg.find("dt") != std::string::npos);
    }
}

TEST_CASE("random_smooth initial data is deterministic in the seed") {
    Grid g(2, 32);
    InitialConditionSpec spec;
    spec.kind = InitialKind::random_smooth;
    spec.mean = 0.07;
    spec.amplitude = 0.25;
    auto a = make_initial(g, spec, 42);
    auto b = make_initial(g, spec, 42);
    auto c = make_initial(g, spec, 43);
    for (std::size_t i = 0; i < g.ncoeff(); ++i) REQUIRE(a[i] == b[i]);
    double diff = 0.0;
    for (std::size_t i = 0; i < g.ncoeff(); ++i) diff = std::max(diff, std::abs(a[i] - c[i]));
    REQUIRE(diff > 1e-6);
}

TEST_CASE("random_smooth respects mean and amplitude exactly") {
    Grid g(2, 32);
    InitialConditionSpec spec;
    spec.kind = InitialKind::random_smooth;
    spec.mean = 0.07;
    spec.amplitude = 0.25;
    auto c = make_initial(g, spec, 5);
    REQUIRE(c[0].real() == Approx(0.07).margin(1e-15));
    auto cbar = c;
    cbar[0] = cplx(0.0, 0.0);
    REQUIRE(sobolev_norm(g, cbar, 0.0) == Approx(0.25).epsilon(1e-12));
}

TEST_CASE("single_mode and constant initial kinds") {
    Grid g(2, 32);
    InitialConditionSpec spec;
    spec.kind = InitialKind::single_mode;
    spec.mean = 0.07;
    spec.amplitude = 0.1;
    spec.mode = {1, 2, 0};
    auto c = make_initial(g, spec, 0);
    REQUIRE(c[0].real() == Approx(0.07).margin(1e-15));
    auto cbar = c;
    cbar[0] = cplx(0.0, 0.0);
    REQUIRE(sobolev_norm(g, cbar, 0.0) == Approx(0.1 / std::sqrt(2.0)).epsilon(1e-12));

    spec.kind = InitialKind::constant;
    auto k = make_initial(g, spec, 0);
    REQUIRE(k[0].real() == Approx(0.07).margin(1e-15));
    for (std::size_t i = 1; i < g.ncoeff(); ++i) REQUIRE(k[i] == cplx(0.0, 0.0));
}

TEST_CASE("field csv export writes one row per grid point") {
    Grid g(1, 16);
    auto f = sample(g, [](double x, double, double) { return x; });
    const std::string path = "/tmp/mpfc_field_test.csv";
    write_field_csv(path, f);
    std::ifstream in(path);
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 17);  // header + 16 samples
    std::filesystem::remove(path);
}
