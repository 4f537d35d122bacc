#pragma once

#include <functional>
#include <vector>

#include "mpfc/config.hpp"
#include "mpfc/field.hpp"

namespace mpfc::testing {

// Sample a closure over the unit cell onto the grid.
inline Field sample(const Grid& g,
                    const std::function<double(double, double, double)>& fn) {
    Field f(g);
    for (std::size_t j = 0; j < g.npoints(); ++j) {
        auto x = g.coords(j);
        f.values[j] = fn(x[0], x[1], x[2]);
    }
    return f;
}

inline std::vector<cplx> sample_hat(const Grid& g,
                                    const std::function<double(double, double, double)>& fn) {
    return transform(sample(g, fn));
}

inline std::vector<cplx> random_field(const Grid& g, double mean, double amplitude,
                                      std::uint64_t seed, double decay_q = 4.0) {
    InitialConditionSpec spec;
    spec.kind = InitialKind::random_smooth;
    spec.mean = mean;
    spec.amplitude = amplitude;
    spec.decay_q = decay_q;
    return make_initial(g, spec, seed);
}

}  // namespace mpfc::testing
