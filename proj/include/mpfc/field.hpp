#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mpfc/grid.hpp"

namespace mpfc {

/// Real scalar field with its grid. Spectra are plain coefficient vectors;
/// `Field` is the real-space view used at module boundaries.
struct Field {
    const Grid* grid = nullptr;
    std::vector<double> values;

    Field() = default;
    Field(const Grid& g, double fill = 0.0) : grid(&g), values(g.npoints(), fill) {}
    Field(const Grid& g, std::vector<double> v) : grid(&g), values(std::move(v)) {
        if (values.size() != g.npoints()) throw Error("Field: size mismatch");
    }

    bool finite() const {
        return std::all_of(values.begin(), values.end(),
                           [](double x) { return std::isfinite(x); });
    }
};

inline std::vector<cplx> transform(const Field& f) { return f.grid->to_spectral(f.values); }

inline Field inverse_transform(const Grid& g, const std::vector<cplx>& coeffs) {
    return Field(g, g.to_real(coeffs));
}

inline double mean(const std::vector<cplx>& coeffs) { return coeffs[0].real(); }
inline double mean(const Field& f) {
    double s = 0.0;
    for (double v : f.values) s += v;
    return s / static_cast<double>(f.values.size());
}

enum class Symbol { laplacian, biharmonic, triharmonic, inv_neg_laplacian };

inline Symbol symbol_from_name(const std::string& name) {
    if (name == "laplacian") return Symbol::laplacian;
    if (name == "biharmonic") return Symbol::biharmonic;
    if (name == "triharmonic") return Symbol::triharmonic;
    if (name == "inv_neg_laplacian") return Symbol::inv_neg_laplacian;
    throw Error("unknown multiplier symbol: " + name);
}

/// Apply a Fourier multiplier in place. inv_neg_laplacian acts on the
/// mean-free part only; its output has zero mean.
inline void apply_multiplier(const Grid& g, std::vector<cplx>& coeffs, Symbol s) {
    if (coeffs.size() != g.ncoeff()) throw Error("apply_multiplier: size mismatch");
    for (std::size_t i = 0; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        switch (s) {
            case Symbol::laplacian: coeffs[i] *= -lam; break;
            case Symbol::biharmonic: coeffs[i] *= lam * lam; break;
            case Symbol::triharmonic: coeffs[i] *= -lam * lam * lam; break;
            case Symbol::inv_neg_laplacian:
                coeffs[i] = (i == 0) ? cplx(0.0, 0.0) : coeffs[i] / lam;
                break;
        }
    }
}

inline Field apply_multiplier(const Field& f, Symbol s) {
    auto c = transform(f);
    apply_multiplier(*f.grid, c, s);
    return inverse_transform(*f.grid, c);
}

/// Zero all modes outside the cubic-alias-free ball set by the padding factor.
/// Idempotent; Nyquist planes are always dropped.
inline void dealias(const Grid& g, std::vector<cplx>& coeffs) {
    const int keep = g.dealias_limit();
    for (std::size_t i = 0; i < g.ncoeff(); ++i) {
        if (g.nyquist(i)) {
            coeffs[i] = cplx(0.0, 0.0);
            continue;
        }
        auto k = g.kvec(i);
        for (int d = 0; d < g.dim(); ++d)
            if (std::abs(k[d]) > keep) {
                coeffs[i] = cplx(0.0, 0.0);
                break;
            }
    }
}

/// Pointwise map evaluated on the padded grid, transformed back and dealiased.
/// Exact for cubic maps at padding_factor >= 2.
inline std::vector<cplx> padded_pointwise(const Grid& g, const std::vector<cplx>& coeffs,
                                          const std::function<double(double)>& fn) {
    if (g.padded()) {
        auto big = g.pad_spectrum(coeffs);
        auto vals = g.padded()->to_real(big);
        for (double& v : vals) v = fn(v);
        auto prod = g.padded()->to_spectral(vals);
        auto out = g.truncate_spectrum(prod);
        dealias(g, out);
        return out;
    }
    auto vals = g.to_real(coeffs);
    for (double& v : vals) v = fn(v);
    auto out = g.to_spectral(vals);
    dealias(g, out);
    return out;
}

/// Two-field pointwise map on the padded grid (same contract as above).
inline std::vector<cplx> padded_pointwise2(const Grid& g, const std::vector<cplx>& a,
                                           const std::vector<cplx>& b,
                                           const std::function<double(double, double)>& fn) {
    if (g.padded()) {
        auto va = g.padded()->to_real(g.pad_spectrum(a));
        auto vb = g.padded()->to_real(g.pad_spectrum(b));
        for (std::size_t i = 0; i < va.size(); ++i) va[i] = fn(va[i], vb[i]);
        auto out = g.truncate_spectrum(g.padded()->to_spectral(va));
        dealias(g, out);
        return out;
    }
    auto va = g.to_real(a);
    auto vb = g.to_real(b);
    for (std::size_t i = 0; i < va.size(); ++i) va[i] = fn(va[i], vb[i]);
    auto out = g.to_spectral(va);
    dealias(g, out);
    return out;
}

/// Mean of fn(u) over Q computed on the padded grid (|Q| = 1).
inline double padded_average(const Grid& g, const std::vector<cplx>& coeffs,
                             const std::function<double(double)>& fn) {
    const Grid* eval = g.padded() ? g.padded() : &g;
    std::vector<double> vals =
        g.padded() ? eval->to_real(g.pad_spectrum(coeffs)) : g.to_real(coeffs);
    double s = 0.0;
    for (double v : vals) s += fn(v);
    return s / static_cast<double>(vals.size());
}

}  // namespace mpfc
