#pragma once

#include "npgroup/npgroup.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cstdint>

namespace npgroup::testing {

inline Vector normal_vector(Index n, CounterRng& rng, double sd = 1.0) {
    boost::random::normal_distribution<double> normal(0.0, sd);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

inline Matrix normal_matrix(Index n, Index k, CounterRng& rng) {
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(n, k);
    for (Index j = 0; j < k; ++j) {
        for (Index i = 0; i < n; ++i) m(i, j) = normal(rng);
    }
    return m;
}

inline double uniform(CounterRng& rng, double lo = 0.0, double hi = 1.0) {
    return boost::random::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_int(CounterRng& rng, std::size_t lo, std::size_t hi) {
    return boost::random::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace npgroup::testing
