#pragma once

// Dark-state reductions for a single mode with L = sqrt(kappa) a and H = 0.
//
// Coherent input alpha(t): the conditional state stays the coherent state |beta>,
//   beta' = -kappa beta / 2 - sqrt(kappa) alpha,   N = |sqrt(kappa) beta + alpha|^2.
// Single-photon input xi(t): rho^11 = (1 - x)|0><0| + x|1><1|, rho^01 = z|0><1|,
//   x' = -kappa x - sqrt(kappa)(xi z + xi^* z^*),  z' = -kappa z / 2 - sqrt(kappa) xi^*,
//   N = kappa x + sqrt(kappa)(xi z + xi^* z^*) + |xi|^2.
// N is the photon-counting rate; it vanishes identically along the rising exponential.

#include <cmath>
#include <functional>
#include <vector>

#include "qmemnet/numerics.hpp"
#include "qmemnet/types.hpp"

namespace qmemnet {

enum class DarkInputKind { coherent, single_photon };

struct DarkStateRun {
    double kappa = 0.0;
    DarkInputKind input_kind = DarkInputKind::coherent;
    UniformGrid grid;
    std::vector<double> intensity;  // N(t)
    std::vector<cplx> input;        // alpha(t) or xi(t)
    std::vector<cplx> beta;         // coherent amplitude (coherent runs)
    std::vector<double> x;          // excited population (single-photon runs)
    std::vector<cplx> z;            // coherence (single-photon runs)

    double peak_intensity() const {
        double m = 0.0;
        for (double v : intensity) m = std::max(m, std::abs(v));
        return m;
    }
    double peak_input_power() const {
        double m = 0.0;
        for (const cplx& v : input) m = std::max(m, std::norm(v));
        return m;
    }
};

using ScalarDrive = std::function<cplx(double)>;

inline void check_dark_args(double kappa, double h) {
    if (!(kappa > 0.0)) throw Error(ErrorKind::NonPositiveRate, "kappa must be positive");
    if (!(h > 0.0) || kappa * h > 0.5) {
        throw Error(ErrorKind::StepTooLarge, "need 0 < kappa h <= 0.5");
    }
}

/// Rising exponential e^{kappa (t - t0) / 2} amp.
inline ScalarDrive rising_exponential(double kappa, double t0, cplx amp) {
    return [=](double t) { return std::exp(kappa * (t - t0) / 2.0) * amp; };
}

/// Coherent reduction with beta(t0) = -alpha(t0) / sqrt(kappa).
inline DarkStateRun dark_state_coherent(double kappa, const ScalarDrive& alpha, double t0, double t_end,
                                        double h) {
    check_dark_args(kappa, h);
    const double sk = std::sqrt(kappa);
    DarkStateRun run;
    run.kappa = kappa;
    run.input_kind = DarkInputKind::coherent;
    run.grid = grid_ending_at(t0, t_end, h);
    auto rhs = [&](double t, Limit, const cplx& b) { return -0.5 * kappa * b - sk * alpha(t); };
    cplx beta = -alpha(run.grid.start) / sk;
    for (std::size_t k = 0; k <= run.grid.steps; ++k) {
        const double t = run.grid.at(k);
        const cplx a = alpha(t);
        run.beta.push_back(beta);
        run.input.push_back(a);
        run.intensity.push_back(std::norm(sk * beta + a));
        if (k < run.grid.steps) beta = rk4_step(beta, t, run.grid.h, rhs);
    }
    return run;
}

inline DarkStateRun dark_state_coherent(double kappa, cplx alpha0, double t0, double t_end, double h) {
    return dark_state_coherent(kappa, rising_exponential(kappa, t0, alpha0), t0, t_end, h);
}

/// Single-photon reduction from x(t0) = 0 and z(t0) = -xi(t0) / (2 sqrt(kappa)),
/// which satisfies N(t0) = 0 when xi(t0) is real.
inline DarkStateRun dark_state_single_photon(double kappa, const ScalarDrive& xi, double t0, double t_end,
                                             double h) {
    check_dark_args(kappa, h);
    const double sk = std::sqrt(kappa);
    DarkStateRun run;
    run.kappa = kappa;
    run.input_kind = DarkInputKind::single_photon;
    run.grid = grid_ending_at(t0, t_end, h);
    // y = (x, z) with x carried in the real part of the first slot.
    using V2 = Eigen::Vector2cd;
    auto rhs = [&](double t, Limit, const V2& y) {
        const cplx e = xi(t);
        const cplx zz = y(1);
        V2 d;
        d(0) = -kappa * y(0).real() - sk * 2.0 * (e * zz).real();
        d(1) = -0.5 * kappa * zz - sk * std::conj(e);
        return d;
    };
    V2 y(0.0, -xi(run.grid.start) / (2.0 * sk));
    for (std::size_t k = 0; k <= run.grid.steps; ++k) {
        const double t = run.grid.at(k);
        const cplx e = xi(t);
        run.x.push_back(y(0).real());
        run.z.push_back(y(1));
        run.input.push_back(e);
        run.intensity.push_back(kappa * y(0).real() + sk * 2.0 * (e * y(1)).real() + std::norm(e));
        if (k < run.grid.steps) y = rk4_step(y, t, run.grid.h, rhs);
    }
    return run;
}

inline DarkStateRun dark_state_single_photon(double kappa, double xi0, double t0, double t_end, double h) {
    return dark_state_single_photon(kappa, rising_exponential(kappa, t0, xi0), t0, t_end, h);
}

}  // namespace qmemnet
