#pragma once

// Quantum statistics of the writing stage.
//
// Single photon: the correlation matrix N_ij = <a_i^* a_j>_11 and the cross vector
// a10 = <a^sharp>_10 obey
//   N'   = A^sharp N + N A^T - xi^* C^T a10^dagger - xi a10 C^sharp
//   a10' = A^sharp a10 - C^T xi^*
// Coherent: the mean m follows the input-output equation and V = <da^sharp da^T>
// obeys V' = A^sharp V + V A^T.

#include <optional>
#include <vector>

#include "qmemnet/iosim.hpp"
#include "qmemnet/linsys.hpp"
#include "qmemnet/numerics.hpp"
#include "qmemnet/pulses.hpp"

namespace qmemnet {

/// Correlation matrix expressed in a rotated mode basis a' = U^dagger a.
inline Mat to_frame(const Mat& n_matrix, const Mat& u) { return u.transpose() * n_matrix * u.conjugate(); }

struct PhotonStatistics {
    UniformGrid grid;
    std::vector<double> times;       // recorded sample times
    std::vector<Mat> n_matrix;       // <N>_11 at each recorded time
    Mat a10;                         // n x records
    std::vector<double> trace;
    double max_hermiticity_residual = 0.0;  // before the per-step symmetrisation
    double min_eigenvalue = 0.0;            // most negative eigenvalue seen at records

    const Mat& final_n() const { return n_matrix.back(); }
    Vec final_a10() const { return a10.col(a10.cols() - 1); }

    /// Mean photon number per mode at record k, in the node frame or in `frame`.
    RealVec mean_photon_numbers(std::size_t k, const std::optional<Mat>& frame = std::nullopt) const {
        const Mat& nk = n_matrix[k];
        const Mat m = frame ? to_frame(nk, *frame) : nk;
        return m.diagonal().real();
    }
};

struct StatsOptions {
    std::size_t record_stride = 1;  // keep every stride-th grid point (the last is always kept)
};

template <class Pulse>
PhotonStatistics evolve_photon_stats(const PassiveLinearSystem& sys, const Pulse& pulse,
                                     const UniformGrid& grid, const StatsOptions& opts = {},
                                     const std::vector<double>& breaks = {}) {
    check_step(sys, grid.h);
    const Eigen::Index n = sys.n();
    const Eigen::Index nn = n * n;
    const Mat a_sh = sys.a_sharp();
    const Mat a_tr = sys.a_drift().transpose();
    const Vec c_tr = sys.c_row().transpose();
    const RowVec c_sh = sys.c_row().conjugate();

    auto rhs = [&](double t, Limit limit, const Vec& y) {
        const cplx xi = pulse(t, limit);
        const Eigen::Map<const Mat> nm(y.data(), n, n);
        const Vec a10 = y.tail(n);
        Vec dy(nn + n);
        Eigen::Map<Mat> dn(dy.data(), n, n);
        dn = a_sh * nm + nm * a_tr - std::conj(xi) * c_tr * a10.adjoint() - xi * a10 * c_sh;
        dy.tail(n) = a_sh * a10 - c_tr * std::conj(xi);
        return dy;
    };

    PhotonStatistics st;
    st.grid = grid;
    const std::size_t stride = std::max<std::size_t>(1, opts.record_stride);
    std::vector<Vec> a10_records;
    Vec y = Vec::Zero(nn + n);
    auto record = [&](std::size_t k) {
        const Eigen::Map<const Mat> nm(y.data(), n, n);
        st.times.push_back(grid.at(k));
        st.n_matrix.emplace_back(nm);
        a10_records.emplace_back(y.tail(n));
        st.trace.push_back(nm.trace().real());
        Eigen::SelfAdjointEigenSolver<Mat> es(nm, Eigen::EigenvaluesOnly);
        st.min_eigenvalue = std::min(st.min_eigenvalue, es.eigenvalues().minCoeff());
    };
    record(0);
    for (std::size_t k = 0; k < grid.steps; ++k) {
        y = rk4_advance(y, grid.at(k), grid.h, breaks, rhs);
        Eigen::Map<Mat> nm(y.data(), n, n);
        const double scale = std::max(1.0, max_abs(nm));
        st.max_hermiticity_residual =
            std::max(st.max_hermiticity_residual, max_abs(nm - nm.adjoint()) / scale);
        const Mat sym = 0.5 * (nm + nm.adjoint());
        nm = sym;
        if ((k + 1) % stride == 0 || k + 1 == grid.steps) record(k + 1);
    }
    st.a10.resize(n, static_cast<Eigen::Index>(a10_records.size()));
    for (std::size_t i = 0; i < a10_records.size(); ++i) st.a10.col(static_cast<Eigen::Index>(i)) = a10_records[i];
    return st;
}

inline PhotonStatistics evolve_photon_stats(const PassiveLinearSystem& sys, const InputSignal& input,
                                            double t_start, double t_end, double h,
                                            const StatsOptions& opts = {}) {
    if (input.kind() != InputKind::single_photon) {
        throw Error(ErrorKind::ConfigError, "photon statistics need a single-photon input");
    }
    if (!(t_end > t_start)) throw Error(ErrorKind::ScheduleInvalid, "empty simulation window");
    check_step(sys, h);
    const UniformGrid grid = grid_ending_at(t_start, t_end, h);
    const HalfStepDrive<InputSignal> drive(input, grid);
    return evolve_photon_stats(sys, drive, grid, opts, {input.family().switch_time()});
}

/// <N(t1)>_11 = M^dagger M with M_j = integral of xi(t) conj(nu_j(t)), nu the writing
/// family of `sys` switched at t1. Quadrature window defaults to the truncation window.
inline Mat lyapunov_closed_form(const PassiveLinearSystem& sys, const InputSignal& input, double t1,
                                std::optional<QuadratureSpec> quad = std::nullopt) {
    const PulseFamily nu = writing_pulse(sys, t1);
    const QuadratureSpec q = quad.value_or(default_quadrature(nu));
    const double tail = gramian_tail(nu, q);
    if (tail > 1e-12) {
        throw Error(ErrorKind::WindowTooSmall, "closed-form window leaves tail mass " + std::to_string(tail));
    }
    const UniformGrid grid = grid_ending_at(q.t_lo, q.t_hi, q.h);
    const Mat nu_s = nu.sample(grid.start, grid.h, grid.size());
    const Vec xi_s = input.sample(grid.start, grid.h, grid.size());
    const auto w = simpson_weights(grid.size(), grid.h);
    RowVec m = RowVec::Zero(sys.n());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        m += w[k] * xi_s(i) * nu_s.col(i).adjoint();
    }
    return m.adjoint() * m;
}

struct CoherentStatistics {
    Trajectory mean;                 // m(t), output mean C m + f, energies
    std::vector<double> cov_norm;    // max |V(t)| per grid point
    Mat final_cov;

    Vec mean_at(std::size_t k) const { return mean.state.col(static_cast<Eigen::Index>(k)); }
    Vec final_mean() const { return mean.state.col(mean.state.cols() - 1); }
};

inline CoherentStatistics evolve_coherent_stats(const PassiveLinearSystem& sys, const InputSignal& input,
                                                double t_start, double t_end, double h,
                                                std::optional<Mat> initial_cov = std::nullopt) {
    if (input.kind() != InputKind::coherent) {
        throw Error(ErrorKind::ConfigError, "coherent statistics need a coherent input");
    }
    CoherentStatistics st;
    st.mean = simulate_io(sys, input, t_start, t_end, h);
    const Mat a_sh = sys.a_sharp();
    const Mat a_tr = sys.a_drift().transpose();
    auto rhs = [&](double, Limit, const Mat& v) -> Mat { return a_sh * v + v * a_tr; };
    Mat v = initial_cov.value_or(Mat::Zero(sys.n(), sys.n()));
    st.cov_norm.push_back(max_abs(v));
    for (std::size_t k = 0; k < st.mean.grid.steps; ++k) {
        v = rk4_step(v, st.mean.grid.at(k), st.mean.grid.h, rhs);
        st.cov_norm.push_back(max_abs(v));
    }
    st.final_cov = v;
    return st;
}

}  // namespace qmemnet
