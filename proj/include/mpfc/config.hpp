#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mpfc/integrators.hpp"
#include "mpfc/snapshot.hpp"

namespace mpfc {

struct ConfigError : Error {
    ConfigError(const std::vector<std::string>& violations)
        : Error(join(violations)), items(violations) {}
    std::vector<std::string> items;

  private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "configuration invalid:";
        for (const auto& x : v) s += "\n  " + x;
        return s;
    }
};

enum class InitialKind { constant, single_mode, random_smooth, from_snapshot };

struct InitialConditionSpec {
    InitialKind kind = InitialKind::constant;
    double mean = 0.0;
    double amplitude = 0.0;
    std::array<int, 3> mode{1, 0, 0};
    double decay_q = 2.0;  // spectral damping exponent for random_smooth
    std::string path;      // from_snapshot
};

struct RunConfig {
    int dim = 2;
    int n = 0;  // 0 = dimension default (64 in 1D/2D, 32 in 3D)
    double padding = 2.0;

    Params params;
    SchemeConfig scheme;

    InitialConditionSpec phi0;
    InitialConditionSpec phi1;

    double t_end = 1.0;
    long sample_every = 1;
    long snapshot_every = 0;  // 0 = final snapshot only
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    int resolved_n() const { return n > 0 ? n : (dim == 3 ? 32 : 64); }
};

namespace detail {

struct KeyEntry {
    std::string value;
    int line = 0;
};

using SectionMap = std::map<std::string, std::map<std::string, KeyEntry>>;

inline SectionMap parse_sections(const std::string& text, std::vector<std::string>& errs) {
    SectionMap out;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const auto a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(ws);
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                errs.push_back("line " + std::to_string(lineno) + ": malformed section header");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errs.push_back("line " + std::to_string(lineno) + ": expected key=value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            errs.push_back("line " + std::to_string(lineno) + ": key outside any section");
            continue;
        }
        auto& sec = out[section];
        if (sec.count(key)) {
            errs.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key +
                           "' in [" + section + "] (first at line " +
                           std::to_string(sec[key].line) + ")");
            continue;
        }
        sec[key] = KeyEntry{value, lineno};
    }
    return out;
}

struct SectionReader {
    const std::string name;
    const std::map<std::string, KeyEntry>* sec;
    std::vector<std::string>* errs;
    std::set<std::string> consumed;

    bool has(const std::string& key) const { return sec && sec->count(key); }

    std::optional<std::string> raw(const std::string& key) {
        consumed.insert(key);
        if (!sec || !sec->count(key)) return std::nullopt;
        return sec->at(key).value;
    }

    template <typename T>
    void get(const std::string& key, T& target) {
        auto v = raw(key);
        if (!v) return;
        std::istringstream ss(*v);
        T tmp;
        ss >> tmp;
        if (ss.fail()) {
            errs->push_back("line " + std::to_string(sec->at(key).line) + ": bad value for [" +
                            name + "] " + key);
            return;
        }
        target = tmp;
    }

    void get_bool(const std::string& key, bool& target) {
        auto v = raw(key);
        if (!v) return;
        if (*v == "true" || *v == "1") target = true;
        else if (*v == "false" || *v == "0") target = false;
        else
            errs->push_back("line " + std::to_string(sec->at(key).line) + ": bad boolean for [" +
                            name + "] " + key);
    }

    void finish() {
        if (!sec) return;
        for (const auto& [key, entry] : *sec)
            if (!consumed.count(key))
                errs->push_back("line " + std::to_string(entry.line) + ": unknown key '" + key +
                                "' in [" + name + "]");
    }
};

inline InitialConditionSpec parse_initial(SectionReader& r, std::vector<std::string>& errs) {
    InitialConditionSpec spec;
    if (auto kind = r.raw("kind")) {
        if (*kind == "constant") spec.kind = InitialKind::constant;
        else if (*kind == "single_mode") spec.kind = InitialKind::single_mode;
        else if (*kind == "random_smooth") spec.kind = InitialKind::random_smooth;
        else if (*kind == "from_snapshot") spec.kind = InitialKind::from_snapshot;
        else errs.push_back("[" + r.name + "]: unknown kind '" + *kind + "'");
    }
    r.get("mean", spec.mean);
    r.get("amplitude", spec.amplitude);
    r.get("decay_q", spec.decay_q);
    if (auto m = r.raw("mode")) {
        std::istringstream ss(*m);
        std::string tok;
        int idx = 0;
        spec.mode = {0, 0, 0};
        while (std::getline(ss, tok, ',') && idx < 3) {
            std::istringstream ts(tok);
            ts >> spec.mode[static_cast<std::size_t>(idx++)];
            if (ts.fail()) errs.push_back("[" + r.name + "]: bad mode vector '" + *m + "'");
        }
    }
    if (auto p = r.raw("path")) spec.path = *p;
    if (spec.kind == InitialKind::from_snapshot && spec.path.empty())
        errs.push_back("[" + r.name + "]: from_snapshot requires path");
    if (spec.kind == InitialKind::random_smooth && spec.decay_q < 2.0)
        errs.push_back("[" + r.name + "]: random_smooth requires decay_q >= 2");
    r.finish();
    return spec;
}

}  // namespace detail

/// Parse and validate a run configuration. All violations are collected and
/// reported together, each anchored to its config line.
inline RunConfig parse_config(const std::string& text) {
    std::vector<std::string> errs;
    auto sections = detail::parse_sections(text, errs);

    static const std::set<std::string> known = {"grid",        "params",      "scheme",
                                               "initial.phi0", "initial.phi1", "run"};
    for (const auto& [name, _] : sections)
        if (!known.count(name)) errs.push_back("unknown section [" + name + "]");

    RunConfig cfg;
    auto reader = [&](const std::string& name) {
        return detail::SectionReader{
            name, sections.count(name) ? &sections.at(name) : nullptr, &errs, {}};
    };

    {
        auto r = reader("grid");
        r.get("dim", cfg.dim);
        r.get("n", cfg.n);
        r.get("padding", cfg.padding);
        r.finish();
    }
    {
        auto r = reader("params");
        r.get("beta", cfg.params.beta);
        r.get("epsilon", cfg.params.epsilon);
        r.get("split_k", cfg.params.split_k);
        r.get_bool("cubic", cfg.params.cubic_enabled);
        r.finish();
    }
    {
        auto r = reader("scheme");
        auto name = r.raw("name");
        if (!name) name = r.raw("scheme");
        if (name) {
            if (*name == "imex2") cfg.scheme.scheme = Scheme::imex2;
            else if (*name == "split1") cfg.scheme.scheme = Scheme::split1;
            else if (*name == "pfc_split1") cfg.scheme.scheme = Scheme::pfc_split1;
            else errs.push_back("[scheme]: unknown scheme '" + *name + "'");
        }
        r.get("dt", cfg.scheme.dt);
        r.get("stabilizer", cfg.scheme.stabilizer_s);
        r.get("newton_tol", cfg.scheme.newton_tol);
        r.get("newton_max_iter", cfg.scheme.newton_max_iter);
        r.finish();
    }
    if (sections.count("initial.phi0")) {
        auto r = reader("initial.phi0");
        cfg.phi0 = detail::parse_initial(r, errs);
    }
    if (sections.count("initial.phi1")) {
        auto r = reader("initial.phi1");
        cfg.phi1 = detail::parse_initial(r, errs);
    }
    {
        auto r = reader("run");
        r.get("t_end", cfg.t_end);
        r.get("sample_every", cfg.sample_every);
        r.get("snapshot_every", cfg.snapshot_every);
        if (auto o = r.raw("out")) cfg.out_dir = *o;
        if (auto o = r.raw("out_dir")) cfg.out_dir = *o;
        r.get("seed", cfg.seed);
        r.finish();
    }

    // cross-field invariants
    if (cfg.dim < 1 || cfg.dim > 3) errs.push_back("[grid]: dim must be 1, 2 or 3");
    const int n = cfg.resolved_n();
    if (n < 4 || n % 2 != 0) errs.push_back("[grid]: n must be even and >= 4");
    if (cfg.padding < 1.0) errs.push_back("[grid]: padding must be >= 1");
    if (cfg.params.beta <= 0.0 || cfg.params.beta < 1e-8) {
        if (cfg.scheme.scheme != Scheme::pfc_split1)
            errs.push_back("[params]: beta below 1e-8 is not valid for MPFC schemes; "
                           "use the pfc subcommand (scheme pfc_split1) instead");
    }
    if (cfg.params.split_k > 0.0 &&
        cfg.params.split_k < std::max(0.0, cfg.params.epsilon - 1.0))
        errs.push_back("[params]: split_k must be >= max(0, epsilon - 1)");
    if (cfg.scheme.dt <= 0.0) errs.push_back("[scheme]: dt must be positive");
    if (cfg.scheme.newton_tol <= 0.0) errs.push_back("[scheme]: newton_tol must be positive");
    if (cfg.t_end < 0.0) errs.push_back("[run]: t_end must be >= 0");
    if (cfg.sample_every < 1) errs.push_back("[run]: sample_every must be >= 1");

    if (!errs.empty()) throw ConfigError(errs);
    return cfg;
}

namespace detail {

/// Deterministic standard normals (Box-Muller over a splitmix-seeded LCG
/// stream) so ledgers are byte-identical across standard libraries.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {
        next_u64();
    }
    double operator()() {
        if (have_) {
            have_ = false;
            return cached_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        cached_ = r * std::sin(2.0 * M_PI * u2);
        have_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

  private:
    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }
    std::uint64_t state_;
    bool have_ = false;
    double cached_ = 0.0;
};

}  // namespace detail

/// Synthesize an initial field. random_smooth damps white noise by
/// (1 + |k|^2)^{-q/2}, scales the mean-free part to the requested amplitude
/// in L2 and pins the mean; (phi0, phi1) in X0 is honored discretely.
inline std::vector<cplx> make_initial(const Grid& g, const InitialConditionSpec& spec,
                                      std::uint64_t seed) {
    switch (spec.kind) {
        case InitialKind::constant: {
            std::vector<cplx> c(g.ncoeff(), cplx());
            c[0] = cplx(spec.mean, 0.0);
            return c;
        }
        case InitialKind::single_mode: {
            Field f(g);
            for (std::size_t j = 0; j < g.npoints(); ++j) {
                auto x = g.coords(j);
                double phase = 0.0;
                for (int d = 0; d < g.dim(); ++d)
                    phase += spec.mode[static_cast<std::size_t>(d)] * x[static_cast<std::size_t>(d)];
                f.values[j] = spec.mean + spec.amplitude * std::sin(2.0 * M_PI * phase);
            }
            return transform(f);
        }
        case InitialKind::random_smooth: {
            detail::NormalStream rng(seed);
            Field noise(g);
            for (double& v : noise.values) v = rng();
            auto c = g.to_spectral(noise.values);
            double norm_sq = 0.0;
            for (std::size_t i = 1; i < g.ncoeff(); ++i) {
                const double damp =
                    std::pow(1.0 + static_cast<double>(g.ksq(i)), -0.5 * spec.decay_q);
                c[i] *= damp;
                norm_sq += g.weight(i) * std::norm(c[i]);
            }
            const double scale =
                (norm_sq > 0.0 && spec.amplitude != 0.0) ? spec.amplitude / std::sqrt(norm_sq)
                                                         : 0.0;
            for (std::size_t i = 1; i < g.ncoeff(); ++i) c[i] *= scale;
            c[0] = cplx(spec.mean, 0.0);
            return c;
        }
        case InitialKind::from_snapshot: {
            Field f = read_snapshot(spec.path, g);
            auto c = transform(f);
            return c;
        }
    }
    throw Error("make_initial: unreachable");
}

}  // namespace mpfc
