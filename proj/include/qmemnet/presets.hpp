#pragma once

// Concrete systems: a single-mode cavity, three atomic ensembles in a ring cavity,
// and the degenerate parametric oscillator used as the active counter-example.

#include <cmath>
#include <functional>

#include "qmemnet/linsys.hpp"
#include "qmemnet/numerics.hpp"

namespace qmemnet::presets {

inline PassiveLinearSystem build_single_mode(double kappa) {
    if (!(kappa > 0.0)) throw Error(ErrorKind::NonPositiveRate, "kappa must be positive");
    Mat omega = Mat::Zero(1, 1);
    RowVec c(1);
    c(0) = std::sqrt(kappa);
    return build_system(omega, c);
}

struct AtomicNetworkParams {
    double kappa = 2.0;  // cavity decay rate
    double g = 1.0;      // collective cavity-ensemble coupling
    double delta = 1.0;  // magnetic detuning of ensembles 2 and 3
};

/// Mode 1 is the cavity, modes 2..4 the ensembles; only the cavity sees the field.
inline PassiveLinearSystem build_atomic_network(const AtomicNetworkParams& p) {
    if (!(p.kappa > 0.0)) throw Error(ErrorKind::NonPositiveRate, "kappa must be positive");
    const cplx ig = I_unit * p.g;
    Mat omega = Mat::Zero(4, 4);
    omega(0, 1) = omega(0, 2) = omega(0, 3) = ig;
    omega(1, 0) = omega(2, 0) = omega(3, 0) = -ig;
    omega(1, 1) = p.delta;
    omega(2, 2) = -p.delta;
    RowVec c = RowVec::Zero(4);
    c(0) = std::sqrt(p.kappa);
    return build_system(omega, c);
}

/// Basis with a'_1 = cavity, a'_2 = symmetric ensemble mode, a'_3, a'_4 = memory modes.
inline Mat atomic_network_frame() {
    const double r2 = std::sqrt(2.0), r3 = std::sqrt(3.0), r6 = std::sqrt(6.0);
    Mat u = Mat::Zero(4, 4);
    u(0, 0) = 1.0;
    u(1, 1) = 1.0 / r3;
    u(1, 2) = 2.0 / r6;
    u(2, 1) = 1.0 / r3;
    u(2, 2) = -1.0 / r6;
    u(2, 3) = 1.0 / r2;
    u(3, 1) = 1.0 / r3;
    u(3, 2) = -1.0 / r6;
    u(3, 3) = -1.0 / r2;
    return u;
}

/// Expected U^dagger A U for the frame above, written out entry by entry.
inline Mat atomic_network_transformed_drift(const AtomicNetworkParams& p) {
    const double r2 = std::sqrt(2.0), r3 = std::sqrt(3.0), r6 = std::sqrt(6.0);
    const cplx id = I_unit * p.delta;
    Mat a = Mat::Zero(4, 4);
    a(0, 0) = -p.kappa / 2.0;
    a(0, 1) = r3 * p.g;
    a(1, 0) = -r3 * p.g;
    a(1, 2) = -r2 * id / 2.0;
    a(1, 3) = r6 * id / 6.0;
    a(2, 1) = -r2 * id / 2.0;
    a(2, 2) = -id / 2.0;
    a(2, 3) = -r3 * id / 6.0;
    a(3, 1) = r6 * id / 6.0;
    a(3, 2) = -r3 * id / 6.0;
    a(3, 3) = id / 2.0;
    return a;
}

struct UnitaryCheckReport {
    double unitarity_residual = 0.0;   // |U^dagger U - I|_max
    double drift_residual = 0.0;       // |U^dagger A U - A'_expected|_max
    double coupling_residual = 0.0;    // |C U - [sqrt(kappa), 0, 0, 0]|_max
    double memory_block_norm = 0.0;    // |A'[2:4, 2:4]|_max
    double subspace_angle = 0.0;       // principal angle to df_decompose memory (delta = 0 only)
    Mat transformed_drift;
    RowVec transformed_coupling;
};

inline UnitaryCheckReport atomic_frame_check(const AtomicNetworkParams& p) {
    const PassiveLinearSystem sys = build_atomic_network(p);
    const Mat u = atomic_network_frame();
    UnitaryCheckReport r;
    r.unitarity_residual = max_abs(u.adjoint() * u - Mat::Identity(4, 4));
    r.transformed_drift = u.adjoint() * sys.a_drift() * u;
    r.transformed_coupling = sys.c_row() * u;
    r.drift_residual = max_abs(r.transformed_drift - atomic_network_transformed_drift(p));
    RowVec expected_c = RowVec::Zero(4);
    expected_c(0) = std::sqrt(p.kappa);
    r.coupling_residual = max_abs(r.transformed_coupling - expected_c);
    r.memory_block_norm = max_abs(r.transformed_drift.bottomRightCorner(2, 2));
    if (p.delta == 0.0) {
        const ModeDecomposition d = df_decompose(sys);
        r.subspace_angle = max_principal_angle(d.memory_basis(), u.rightCols(2));
    }
    return r;
}

struct ActiveSystemParams {
    double kappa = 2.0;
    double epsilon = 0.0;  // squeezing strength
};

inline void check_active(const ActiveSystemParams& p) {
    if (!(p.kappa > 0.0)) throw Error(ErrorKind::NonPositiveRate, "kappa must be positive");
    if (!(p.epsilon >= 0.0) || !(p.epsilon < p.kappa)) {
        throw Error(ErrorKind::EpsilonTooLarge, "need 0 <= epsilon < kappa");
    }
}

/// Weight of the single-photon component written into the oscillator by the
/// unit pulse xi_1: sqrt(2 (kappa^2 - eps^2) / (2 kappa^2 - eps^2)).
inline double active_transfer_amplitude(const ActiveSystemParams& p) {
    check_active(p);
    const double k2 = p.kappa * p.kappa, e2 = p.epsilon * p.epsilon;
    return std::sqrt(2.0 * (k2 - e2) / (2.0 * k2 - e2));
}

/// Coefficient of the unavoidable B(xi_2) term.
inline double active_spurious_amplitude(const ActiveSystemParams& p) {
    check_active(p);
    return p.epsilon / std::sqrt(2.0 * p.kappa * p.kappa - p.epsilon * p.epsilon);
}

/// Input pulse xi_1(t) for switch time 0 (zero for t > 0).
inline double active_xi1(const ActiveSystemParams& p, double t) {
    check_active(p);
    if (t > 0.0) return 0.0;
    const double k2 = p.kappa * p.kappa, e2 = p.epsilon * p.epsilon;
    return -std::sqrt(2.0 * p.kappa * (k2 - e2) / (2.0 * k2 - e2)) * std::exp(p.kappa * t / 2.0) *
           std::cosh(p.epsilon * t / 2.0);
}

/// Companion pulse xi_2(t); at epsilon = 0 the epsilon -> 0 limit is returned.
inline double active_xi2(const ActiveSystemParams& p, double t) {
    check_active(p);
    if (t > 0.0) return 0.0;
    const double k2 = p.kappa * p.kappa, e2 = p.epsilon * p.epsilon;
    if (p.epsilon == 0.0) return std::sqrt(2.0 * p.kappa * k2) * (t / 2.0) * std::exp(p.kappa * t / 2.0);
    return std::sqrt(2.0 * p.kappa * (k2 - e2) / e2) * std::exp(p.kappa * t / 2.0) *
           std::sinh(p.epsilon * t / 2.0);
}

struct ActiveOdeReport {
    double transfer_amplitude = 0.0;   // 1 / |v| from the integrated kernel
    double spurious_amplitude = 0.0;   // |u| / |v|
    double ccr_residual = 0.0;         // |v|^2 - |u|^2 - 1
};

/// Doubled-variable cross-check. With M = -(1/2)[[kappa, -eps], [-eps, kappa]] the
/// final creation operator is a^*(0) = integral of u(s) b(s) + v(s) b^*(s) over s <= 0,
/// where (u, v)(s) = -sqrt(kappa) (second row of exp(-M s)). The kernel is integrated
/// by RK4 in tau = -s together with the running norms of u and v.
inline ActiveOdeReport active_transfer_amplitude_ode(const ActiveSystemParams& p, double h = 1e-3) {
    check_active(p);
    const double k = p.kappa, e = p.epsilon;
    const double decay = 0.5 * (k - e);
    const double tau_end = std::log(1e16) / decay;
    const auto steps = static_cast<std::size_t>(std::ceil(tau_end / h));
    // y = [phi_21, phi_22, |u|^2 acc, |v|^2 acc]; exp(M tau) is symmetric so its
    // second row equals its second column, which solves y' = M y from e_2.
    using V4 = Eigen::Vector4d;
    auto rhs = [&](double, Limit, const V4& y) {
        V4 d;
        d(0) = -0.5 * (k * y(0) - e * y(1));
        d(1) = -0.5 * (-e * y(0) + k * y(1));
        d(2) = k * y(0) * y(0);
        d(3) = k * y(1) * y(1);
        return d;
    };
    V4 y(0.0, 1.0, 0.0, 0.0);
    for (std::size_t i = 0; i < steps; ++i) y = rk4_step(y, static_cast<double>(i) * h, h, rhs);
    ActiveOdeReport r;
    r.transfer_amplitude = 1.0 / std::sqrt(y(3));
    r.spurious_amplitude = std::sqrt(y(2) / y(3));
    r.ccr_residual = y(3) - y(2) - 1.0;
    return r;
}

}  // namespace qmemnet::presets
