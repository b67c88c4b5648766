#pragma once

#include <random>
#include <vector>

#include "qmemnet/linsys.hpp"
#include "qmemnet/presets.hpp"

namespace qmemnet::testing {

/// Random passive system with complex Gaussian Omega (Hermitised) and C.
/// Systems whose abscissa is tiny relative to the spectral radius are rejected so
/// truncation windows stay short.
inline PassiveLinearSystem random_hurwitz_system(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (;;) {
        Mat x(n, n);
        RowVec c(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) x(i, j) = {gauss(rng), gauss(rng)};
            c(i) = {gauss(rng), gauss(rng)};
        }
        const Mat omega = 0.5 * (x + x.adjoint());
        PassiveLinearSystem sys = build_system(omega, c);
        if (spectral_abscissa(sys) < -0.02 * spectral_radius(sys)) return sys;
    }
}

inline std::vector<PassiveLinearSystem> random_suite(std::uint64_t seed, std::size_t count, Eigen::Index max_n = 6) {
    std::mt19937_64 rng(seed);
    std::vector<PassiveLinearSystem> out;
    for (std::size_t k = 0; k < count; ++k) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(k % static_cast<std::size_t>(max_n));
        out.push_back(random_hurwitz_system(rng, n));
    }
    return out;
}

inline Vec random_unit_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = {gauss(rng), gauss(rng)};
    return v / v.norm();
}

inline PassiveLinearSystem atomic(double delta, double kappa = 2.0, double g = 1.0) {
    return presets::build_atomic_network({kappa, g, delta});
}

}  // namespace qmemnet::testing
