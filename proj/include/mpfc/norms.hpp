#pragma once

#include <cmath>

#include "mpfc/field.hpp"

namespace mpfc {

/// Fourier-weight Sobolev norm of real order m:
///   ( <u>^2 + sum_{k!=0} (2 pi |k|)^{2m} |u_k|^2 )^{1/2}.
/// Coincides with the L2 norm at m = 0 (Parseval).
inline double sobolev_norm(const Grid& g, const std::vector<cplx>& coeffs, double m) {
    if (coeffs.size() != g.ncoeff()) throw Error("sobolev_norm: size mismatch");
    double acc = coeffs[0].real() * coeffs[0].real();
    for (std::size_t i = 1; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        if (lam == 0.0) continue;
        acc += g.weight(i) * std::pow(lam, m) * std::norm(coeffs[i]);
    }
    return std::sqrt(acc);
}

inline double sobolev_norm(const Field& f, double m) {
    return sobolev_norm(*f.grid, transform(f), m);
}

/// H^-1 seminorm of the mean-free part, ||A0^{-1/2} u_bar||.
inline double hm1_bar(const Grid& g, const std::vector<cplx>& coeffs) {
    double acc = 0.0;
    for (std::size_t i = 1; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        if (lam == 0.0) continue;
        acc += g.weight(i) * std::norm(coeffs[i]) / lam;
    }
    return std::sqrt(acc);
}

/// L2 norm of the mean-free part weighted by lambda^m (helper for energies).
inline double weighted_sq(const Grid& g, const std::vector<cplx>& coeffs, double m) {
    double acc = 0.0;
    for (std::size_t i = 1; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        if (lam == 0.0) continue;
        acc += g.weight(i) * std::pow(lam, m) * std::norm(coeffs[i]);
    }
    return acc;
}

/// Graph-norm weight for integer order m >= 0: sum_{j<=m} lambda^j.
inline double graph_norm(const Grid& g, const std::vector<cplx>& coeffs, int m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.ncoeff(); ++i) {
        const double lam = g.lambda(i);
        double w = 0.0, p = 1.0;
        for (int j = 0; j <= m; ++j) {
            w += p;
            p *= lam;
        }
        acc += g.weight(i) * w * std::norm(coeffs[i]);
    }
    return std::sqrt(acc);
}

enum class ProductSpace { X0, X1 };

/// ||(u,v)||_{X0}^2 = ||u||_2^2 + ||v||_{-1}^2, ||(u,v)||_{X1}^2 = ||u||_3^2 + ||v||_0^2,
/// with graph weights on the positive-order component.
inline double x_norm(const Grid& g, const std::vector<cplx>& u, const std::vector<cplx>& v,
                     ProductSpace space) {
    if (space == ProductSpace::X0) {
        const double a = graph_norm(g, u, 2);
        const double b = sobolev_norm(g, v, -1.0);
        return std::sqrt(a * a + b * b);
    }
    const double a = graph_norm(g, u, 3);
    const double b = sobolev_norm(g, v, 0.0);
    return std::sqrt(a * a + b * b);
}

}  // namespace mpfc
