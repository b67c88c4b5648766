#pragma once

// Classical input-output dynamics  eta' = A eta - C^dagger xi,  xi_out = C eta + xi.
// The same equations carry the single-photon pulse shape and the coherent mean.

#include <cmath>
#include <vector>

#include "qmemnet/linsys.hpp"
#include "qmemnet/numerics.hpp"
#include "qmemnet/pulses.hpp"

namespace qmemnet {

struct Trajectory {
    UniformGrid grid;
    Mat state;          // n x (steps + 1)
    Vec input;          // input at each grid point
    Vec output;         // C state + input
    RealVec input_energy;   // cumulative integral of |input|^2
    RealVec output_energy;  // cumulative integral of |output|^2

    std::size_t size() const { return grid.size(); }
    double time(std::size_t k) const { return grid.at(k); }
};

inline void check_step(const PassiveLinearSystem& sys, double h) {
    if (!(h > 0.0)) throw Error(ErrorKind::StepTooLarge, "step must be positive");
    const double a_norm = spectral_norm(sys.a_drift());
    if (a_norm * h > 0.5) {
        throw Error(ErrorKind::StepTooLarge, "|A| h = " + std::to_string(a_norm * h) + " exceeds 0.5");
    }
}

/// RK4 integration on `grid`. `pulse(t, limit)` returns the scalar input; the
/// cumulative energies are co-integrated as two extra components so the energy
/// balance is resolved to the integrator's own order. Steps containing one of the
/// sorted `breaks` (pulse switching instants) are split there.
template <class Pulse>
Trajectory simulate_io(const PassiveLinearSystem& sys, const Pulse& pulse, const UniformGrid& grid,
                       const Vec& initial_state, const std::vector<double>& breaks = {}) {
    check_step(sys, grid.h);
    const Eigen::Index n = sys.n();
    if (initial_state.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "initial state length mismatch");
    }
    const Mat& a = sys.a_drift();
    const RowVec& c = sys.c_row();
    const Vec c_dag = c.adjoint();

    auto rhs = [&](double t, Limit limit, const Vec& y) {
        const cplx xi = pulse(t, limit);
        const Vec eta = y.head(n);
        const cplx out = (c * eta)(0) + xi;
        Vec dy(n + 2);
        dy.head(n) = a * eta - c_dag * xi;
        dy(n) = std::norm(xi);
        dy(n + 1) = std::norm(out);
        return dy;
    };

    Trajectory traj;
    traj.grid = grid;
    const auto count = static_cast<Eigen::Index>(grid.size());
    traj.state.resize(n, count);
    traj.input.resize(count);
    traj.output.resize(count);
    traj.input_energy.resize(count);
    traj.output_energy.resize(count);

    Vec y = Vec::Zero(n + 2);
    y.head(n) = initial_state;
    auto record = [&](std::size_t k, Limit limit) {
        const auto i = static_cast<Eigen::Index>(k);
        const cplx xi = pulse(grid.at(k), limit);
        traj.state.col(i) = y.head(n);
        traj.input(i) = xi;
        traj.output(i) = (c * y.head(n))(0) + xi;
        traj.input_energy(i) = y(n).real();
        traj.output_energy(i) = y(n + 1).real();
    };
    record(0, Limit::right);
    for (std::size_t k = 0; k < grid.steps; ++k) {
        y = rk4_advance(y, grid.at(k), grid.h, breaks, rhs);
        record(k + 1, Limit::left);
    }
    return traj;
}

/// Simulate a composed input over [t_start, t_end] with step h from eta(t_start) = initial.
inline Trajectory simulate_io(const PassiveLinearSystem& sys, const InputSignal& input,
                              double t_start, double t_end, double h,
                              std::optional<Vec> initial = std::nullopt) {
    if (!(t_end > t_start)) throw Error(ErrorKind::ScheduleInvalid, "empty simulation window");
    check_step(sys, h);
    const UniformGrid grid = grid_ending_at(t_start, t_end, h);
    const HalfStepDrive<InputSignal> drive(input, grid);
    return simulate_io(sys, drive, grid, initial.value_or(Vec::Zero(sys.n())), {input.family().switch_time()});
}

/// Free evolution (zero input) from a given state, e.g. the reading stage.
inline Trajectory simulate_free(const PassiveLinearSystem& sys, const Vec& initial, double t_start,
                                double t_end, double h) {
    const UniformGrid grid = grid_ending_at(t_start, t_end, h);
    auto zero = [](double, Limit) { return cplx{0.0, 0.0}; };
    return simulate_io(sys, zero, grid, initial);
}

/// Largest |norm(eta)^2 + E_out - E_in - norm(eta0)^2| over the grid, relative to
/// the total energy that entered the system (initial content plus input).
inline double energy_balance_residual(const Trajectory& traj) {
    const double initial = traj.state.col(0).squaredNorm();
    const double reference =
        initial + traj.input_energy(static_cast<Eigen::Index>(traj.size()) - 1);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(traj.size()); ++k) {
        const double r = traj.state.col(k).squaredNorm() + traj.output_energy(k) -
                         traj.input_energy(k) - initial;
        worst = std::max(worst, std::abs(r));
    }
    return reference > 0.0 ? worst / reference : worst;
}

struct ZeroOutputReport {
    double max_abs = 0.0;
    double tol = 0.0;
    bool pass = false;
};

/// Passes iff max over grid points t <= until of |output| <= tol. A negative tol
/// selects the default 1e-6 * sqrt(peak input power).
inline ZeroOutputReport zero_output_check(const Trajectory& traj, double until, double tol = -1.0) {
    if (until < traj.grid.start - 1e-12) {
        throw Error(ErrorKind::ScheduleInvalid, "check horizon precedes the trajectory");
    }
    ZeroOutputReport rep;
    double peak = 0.0;
    for (Eigen::Index k = 0; k < traj.input.size(); ++k) peak = std::max(peak, std::abs(traj.input(k)));
    rep.tol = tol >= 0.0 ? tol : 1e-6 * peak;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.time(k);
        if (t > until && !same_instant(t, until)) break;
        rep.max_abs = std::max(rep.max_abs, std::abs(traj.output(static_cast<Eigen::Index>(k))));
    }
    rep.pass = rep.max_abs <= rep.tol;
    return rep;
}

/// Least-squares coefficient c minimising sum |y_k - c b(t_k)|^2 over grid points in [lo, hi].
template <class Basis>
cplx fit_coefficient(const Trajectory& traj, const Vec& values, double lo, double hi, Basis&& basis) {
    cplx num{0.0, 0.0};
    double den = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.time(k);
        if (t < lo || t > hi) continue;
        const double b = basis(t);
        num += b * values(static_cast<Eigen::Index>(k));
        den += b * b;
    }
    return den > 0.0 ? num / den : cplx{0.0, 0.0};
}

struct SingleModeWaveforms {
    double xi_prime = 0.0;
    double xi_tilde = 0.0;
};

/// Closed forms for a single mode of rate kappa driven by the rising exponential of rate gamma
/// switched off at t = 0: xi'(t) and the full output pulse xi_tilde(t).
inline SingleModeWaveforms single_mode_closed_form(double kappa, double gamma, double t) {
    if (!(kappa > 0.0) || !(gamma > 0.0)) {
        throw Error(ErrorKind::NonPositiveRate, "kappa and gamma must be positive");
    }
    const double sg = std::sqrt(gamma);
    SingleModeWaveforms w;
    if (t <= 0.0) {
        w.xi_prime = -2.0 * kappa * sg / (kappa + gamma) * std::exp(gamma * t / 2.0);
        w.xi_tilde = (kappa - gamma) / (kappa + gamma) * sg * std::exp(gamma * t / 2.0);
    } else {
        w.xi_prime = -2.0 * kappa * sg / (kappa + gamma) * std::exp(-kappa * t / 2.0);
        w.xi_tilde = 2.0 * kappa / (kappa + gamma) * sg * std::exp(-kappa * t / 2.0);
    }
    return w;
}

struct CancellationReport {
    std::vector<cplx> samples;
    std::vector<double> residuals;
    double max_residual = 0.0;
    bool pass = false;
};

/// Checks G[s] * C (sI + A^dagger)^{-1} eta1 == C (sI - A)^{-1} eta1 at each sample:
/// the rising-exponential spectrum cancels the transfer-function zero.
inline CancellationReport transfer_cancellation_check(const PassiveLinearSystem& sys,
                                                      const std::vector<cplx>& s_samples,
                                                      const Vec& eta1, double tol = 1e-8) {
    if (eta1.size() != sys.n()) throw Error(ErrorKind::DimensionMismatch, "eta1 length mismatch");
    const Eigen::Index n = sys.n();
    const Mat& a = sys.a_drift();
    const Vec zero_ev = eigenvalues(Mat(-a.adjoint()));
    CancellationReport rep;
    for (const cplx s : s_samples) {
        for (Eigen::Index i = 0; i < zero_ev.size(); ++i) {
            if (std::abs(zero_ev(i) - s) <= 1e-12) {
                throw Error(ErrorKind::SingularResolvent, "sample coincides with a transmission zero");
            }
        }
        const cplx g = transfer_function(sys, s);
        const Mat id = Mat::Identity(n, n);
        const cplx xi_s = (sys.c_row() * (s * id + a.adjoint()).partialPivLu().solve(eta1))(0);
        const cplx rhs = (sys.c_row() * (s * id - a).partialPivLu().solve(eta1))(0);
        const double r = std::abs(g * xi_s - rhs) / std::max(1.0, std::abs(rhs));
        rep.samples.push_back(s);
        rep.residuals.push_back(r);
        rep.max_residual = std::max(rep.max_residual, r);
    }
    rep.pass = rep.max_residual <= tol;
    return rep;
}

}  // namespace qmemnet
