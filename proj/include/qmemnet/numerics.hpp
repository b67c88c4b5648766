#pragma once

// Shared numerical kernels: matrix exponential, fixed-step RK4, composite Simpson weights.

#include <cmath>
#include <cstddef>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "qmemnet/types.hpp"

namespace qmemnet {

/// Scaling-and-squaring Pade approximant (Eigen's Higham 2005 implementation).
inline Mat expm(const Mat& m) {
    if (m.size() == 0) return m;
    return m.exp();
}

inline double spectral_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
}

/// Which one-sided limit a pulse evaluation should take at a switching instant.
enum class Limit { left, right };

/// One classical RK4 step of y' = f(t, limit, y) over [t, t + h].
/// The derivative at t uses the right limit and at t + h the left limit, so a
/// switching instant that sits on a grid point never leaks into the wrong step.
template <class State, class Deriv>
State rk4_step(const State& y, double t, double h, Deriv&& f) {
    const State k1 = f(t, Limit::right, y);
    const State k2 = f(t + 0.5 * h, Limit::right, State(y + (0.5 * h) * k1));
    const State k3 = f(t + 0.5 * h, Limit::right, State(y + (0.5 * h) * k2));
    const State k4 = f(t + h, Limit::left, State(y + h * k3));
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Composite Simpson weights for `count` equally spaced samples. An odd number of
/// intervals closes with Simpson's 3/8 rule on the final three intervals.
inline std::vector<double> simpson_weights(std::size_t count, double h) {
    std::vector<double> w(count, 0.0);
    if (count < 2) return w;
    const std::size_t intervals = count - 1;
    if (intervals == 1) {
        w[0] = w[1] = 0.5 * h;
        return w;
    }
    std::size_t simpson_end = intervals;
    if (intervals % 2 == 1) simpson_end = intervals - 3;
    for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if (intervals % 2 == 1) {
        const std::size_t s = simpson_end;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    return w;
}

template <class Range>
auto simpson(const Range& samples, double h) {
    const auto w = simpson_weights(samples.size(), h);
    using T = std::decay_t<decltype(samples[0])>;
    T acc = T{};
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * samples[i];
    return acc;
}

/// Uniform grid t_k = start + k h, k = 0..steps. Times are formed by
/// multiplication so a grid anchored on a switching time hits it exactly.
struct UniformGrid {
    double start = 0.0;
    double h = 0.0;
    std::size_t steps = 0;

    double at(std::size_t k) const { return start + static_cast<double>(k) * h; }
    double end() const { return at(steps); }
    std::size_t size() const { return steps + 1; }
};

/// Grid ending exactly on `stop` with a step no larger than `h_max`.
inline UniformGrid grid_ending_at(double start, double stop, double h_max) {
    const double span = stop - start;
    auto steps = static_cast<std::size_t>(std::ceil(span / h_max - 1e-9));
    if (steps == 0) steps = 1;
    const double h = span / static_cast<double>(steps);
    return {stop - static_cast<double>(steps) * h, h, steps};
}

inline bool same_instant(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

/// RK4 over [t, t + h], split at any breakpoint strictly inside the step so that
/// input discontinuities between grid points keep fourth-order accuracy.
template <class State, class Deriv>
State rk4_advance(const State& y, double t, double h, const std::vector<double>& breaks, Deriv&& f) {
    State out = y;
    double at = t;
    const double end = t + h;
    for (double b : breaks) {
        if (b <= at || b >= end || same_instant(b, at) || same_instant(b, end)) continue;
        out = rk4_step(out, at, b - at, f);
        at = b;
    }
    return rk4_step(out, at, end - at, f);
}

}  // namespace qmemnet
