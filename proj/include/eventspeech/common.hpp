#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace evsp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Deterministic RNG used everywhere. std::mt19937_64 state is serializable
// via stream operators, which checkpoint resume relies on.
using Rng = std::mt19937_64;

inline double uniform_real(Rng& rng, double lo, double hi) {
    // 53-bit mantissa draw, independent of libstdc++ distribution internals
    const double u = (rng() >> 11) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
}

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    if (lo >= hi) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t r;
    do { r = rng(); } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
}

inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
    // Box-Muller, deterministic across platforms
    double u1 = uniform_real(rng, 0.0, 1.0);
    double u2 = uniform_real(rng, 0.0, 1.0);
    if (u1 < 1e-300) u1 = 1e-300;
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

} // namespace evsp
