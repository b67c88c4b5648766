#pragma once

// Optimal writing and reading pulse families and the scalar inputs composed from them.
//
// Writing:  nu(t)       = -exp(-A^sharp (t - t1)) C^T   for t <= t1, zero afterwards.
// Reading:  nu_tilde(t) =  exp( A^T     (t - t2)) C^T   for t >= t2, zero before.
// Both families are orthonormal in L2 whenever A is Hurwitz.

#include <cmath>
#include <optional>
#include <vector>

#include "qmemnet/linsys.hpp"
#include "qmemnet/numerics.hpp"

namespace qmemnet {

enum class PulseDirection { writing, reading };

class PulseFamily {
public:
    PulseFamily(Mat generator_a, RowVec generator_c, double switch_time, PulseDirection direction)
        : a_(std::move(generator_a)), c_(std::move(generator_c)), switch_(switch_time),
          direction_(direction) {
        // Propagation matrix M with nu(t) = exp(M (t - switch)) v0 on the support.
        if (direction_ == PulseDirection::writing) {
            m_ = -a_.conjugate();
            v0_ = -c_.transpose();
        } else {
            m_ = a_.transpose();
            v0_ = c_.transpose();
        }
    }

    Eigen::Index n() const { return a_.rows(); }
    const Mat& generator_a() const { return a_; }
    const RowVec& generator_c() const { return c_; }
    double switch_time() const { return switch_; }
    PulseDirection direction() const { return direction_; }

    bool in_support(double t, Limit limit = Limit::left) const {
        if (same_instant(t, switch_)) {
            return direction_ == PulseDirection::writing ? limit == Limit::left
                                                         : limit == Limit::right;
        }
        return direction_ == PulseDirection::writing ? t < switch_ : t > switch_;
    }

    /// Closed-form value of the whole vector at t. At the switching instant the
    /// default left limit is the writing pulse's closing value and zero for reading.
    Vec evaluate(double t, Limit limit = Limit::left) const {
        if (!in_support(t, limit)) return Vec::Zero(n());
        return expm(m_ * (t - switch_)) * v0_;
    }

    /// Samples on t_first + k dt, k < count, as columns of an n x count matrix.
    /// Values are propagated from the support edge by one exact step exponential,
    /// always in the decaying direction. Switching instants take the in-support value.
    Mat sample(double t_first, double dt, std::size_t count) const {
        Mat out = Mat::Zero(n(), static_cast<Eigen::Index>(count));
        if (count == 0) return out;
        auto time = [&](std::size_t k) { return t_first + static_cast<double>(k) * dt; };
        auto covered = [&](std::size_t k) {
            const double t = time(k);
            if (same_instant(t, switch_)) return true;
            return direction_ == PulseDirection::writing ? t < switch_ : t > switch_;
        };
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < count; ++k)
            if (covered(k)) idx.push_back(k);
        if (idx.empty()) return out;
        // Writing decays toward the past: start at the latest sample and walk backwards.
        if (direction_ == PulseDirection::writing) std::reverse(idx.begin(), idx.end());
        const Mat step = expm(m_ * (time(idx[1 % idx.size()]) - time(idx[0])));
        Vec value = expm(m_ * (time(idx[0]) - switch_)) * v0_;
        out.col(static_cast<Eigen::Index>(idx[0])) = value;
        for (std::size_t j = 1; j < idx.size(); ++j) {
            value = step * value;
            out.col(static_cast<Eigen::Index>(idx[j])) = value;
        }
        return out;
    }

private:
    Mat a_;
    RowVec c_;
    double switch_;
    PulseDirection direction_;
    Mat m_;
    Vec v0_;
};

inline PulseFamily writing_pulse(const PassiveLinearSystem& sys, double t1) {
    if (!is_hurwitz(sys)) {
        throw Error(ErrorKind::NotHurwitz, "writing pulse needs a Hurwitz drift");
    }
    return PulseFamily(sys.a_drift(), sys.c_row(), t1, PulseDirection::writing);
}

inline PulseFamily reading_pulse(const PassiveLinearSystem& sys, double t2) {
    if (!is_hurwitz(sys)) {
        throw Error(ErrorKind::NotHurwitz, "reading pulse needs a Hurwitz drift");
    }
    return PulseFamily(sys.a_drift(), sys.c_row(), t2, PulseDirection::reading);
}

inline double family_abscissa(const PulseFamily& family) {
    const Vec ev = eigenvalues(family.generator_a());
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i) best = std::max(best, ev(i).real());
    return best;
}

inline double family_radius(const PulseFamily& family) {
    const Vec ev = eigenvalues(family.generator_a());
    double best = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) best = std::max(best, std::abs(ev(i)));
    return best;
}

/// Smallest duration tau with |exp(A tau)|_2 <= bound, found by doubling then
/// bisection, capped at 80 / |abscissa|. The same duration bounds the pulse
/// amplitude envelope for both families.
inline double truncation_duration(const Mat& a, double bound = 1e-8) {
    const Vec ev = eigenvalues(a);
    double abscissa = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i) abscissa = std::max(abscissa, ev(i).real());
    if (!(abscissa < 0.0)) {
        throw Error(ErrorKind::NotHurwitz, "truncation needs a Hurwitz drift");
    }
    const double cap = 80.0 / std::abs(abscissa);
    auto norm_at = [&](double tau) { return spectral_norm(expm(a * tau)); };
    double hi = std::min(cap, std::log(1.0 / bound) / std::abs(abscissa));
    while (norm_at(hi) > bound && hi < cap) hi = std::min(cap, 2.0 * hi);
    if (norm_at(hi) > bound) return cap;
    double lo = 0.0;
    for (int it = 0; it < 60 && hi - lo > 1e-6 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (norm_at(mid) > bound ? lo : hi) = mid;
    }
    return hi;
}

/// Start of the writing window for switch time t1.
inline double truncation_start(const PassiveLinearSystem& sys, double t1, double bound = 1e-8) {
    return t1 - truncation_duration(sys.a_drift(), bound);
}

/// Default integration step: 0.01 over the spectral radius, which never exceeds
/// 0.01 / |abscissa| since the radius dominates the abscissa.
inline double default_step(const PassiveLinearSystem& sys) {
    return 0.01 / std::max(spectral_radius(sys), 1e-300);
}

struct QuadratureSpec {
    double t_lo = 0.0;
    double t_hi = 0.0;
    double h = 0.0;
};

/// Window spanning the support until the pulse envelope drops below 1e-8.
inline QuadratureSpec default_quadrature(const PulseFamily& family) {
    const double tau = truncation_duration(family.generator_a());
    const double h = 0.01 / std::max(family_radius(family), 1e-300);
    if (family.direction() == PulseDirection::writing)
        return {family.switch_time() - tau, family.switch_time(), h};
    return {family.switch_time(), family.switch_time() + tau, h};
}

/// Operator-norm bound on the Gramian mass left outside the window:
/// |exp(A tau)|_2^2 with tau the distance from the switch to the far window edge.
inline double gramian_tail(const PulseFamily& family, const QuadratureSpec& quad) {
    const double tau = family.direction() == PulseDirection::writing
                           ? family.switch_time() - quad.t_lo
                           : quad.t_hi - family.switch_time();
    if (tau <= 0.0) return 1.0;
    const double e = spectral_norm(expm(family.generator_a() * tau));
    return e * e;
}

/// Integral of nu^sharp nu^T over the window by composite Simpson.
inline Mat gramian(const PulseFamily& family, const QuadratureSpec& quad) {
    const double tail = gramian_tail(family, quad);
    if (tail > 1e-12) {
        throw Error(ErrorKind::WindowTooSmall,
                    "quadrature window leaves tail mass " + std::to_string(tail));
    }
    const UniformGrid grid = grid_ending_at(quad.t_lo, quad.t_hi, quad.h);
    const Mat samples = family.sample(grid.start, grid.h, grid.size());
    const auto w = simpson_weights(grid.size(), grid.h);
    const Eigen::Map<const RealVec> weights(w.data(), static_cast<Eigen::Index>(w.size()));
    return samples.conjugate() * weights.cast<cplx>().asDiagonal() * samples.transpose();
}

inline Mat gramian(const PulseFamily& family) { return gramian(family, default_quadrature(family)); }

enum class InputKind { single_photon, coherent };

/// Scalar input xi(t) = sum_k s_k nu_k(t) (single photon) or f(t) = sum_k alpha_k nu_k(t).
class InputSignal {
public:
    InputSignal(PulseFamily family, Vec coefficients, InputKind kind)
        : family_(std::move(family)), coeffs_(std::move(coefficients)), kind_(kind) {}

    InputKind kind() const { return kind_; }
    const Vec& coefficients() const { return coeffs_; }
    const PulseFamily& family() const { return family_; }
    double energy() const { return coeffs_.squaredNorm(); }

    cplx operator()(double t, Limit limit = Limit::left) const {
        return (coeffs_.transpose() * family_.evaluate(t, limit))(0);
    }

    /// Values at t_first + k dt; switching instants carry the in-support value.
    Vec sample(double t_first, double dt, std::size_t count) const {
        return (coeffs_.transpose() * family_.sample(t_first, dt, count)).transpose();
    }

private:
    PulseFamily family_;
    Vec coeffs_;
    InputKind kind_;
};

inline InputSignal compose_input(const PulseFamily& family, const Vec& coefficients, InputKind kind) {
    if (coefficients.size() != family.n()) {
        throw Error(ErrorKind::DimensionMismatch, "coefficient vector has length " +
                                                      std::to_string(coefficients.size()) +
                                                      ", expected " + std::to_string(family.n()));
    }
    if (kind == InputKind::single_photon && std::abs(coefficients.squaredNorm() - 1.0) > 1e-10) {
        throw Error(ErrorKind::NormViolation, "single-photon coefficients must have unit norm, got " +
                                                  std::to_string(coefficients.squaredNorm()));
    }
    return InputSignal(family, coefficients, kind);
}

/// Precomputed drive on the half-step lattice of a uniform grid, for RK4 stages.
/// Off-lattice times and switching-instant limits fall back to the closed form.
template <class Signal>
class HalfStepDrive {
public:
    HalfStepDrive(const Signal& signal, const UniformGrid& grid)
        : signal_(signal), grid_(grid), values_(signal.sample(grid.start, 0.5 * grid.h, 2 * grid.steps + 1)) {}

    cplx operator()(double t, Limit limit) const {
        const double pos = (t - grid_.start) / (0.5 * grid_.h);
        const double k = std::round(pos);
        if (std::abs(pos - k) < 1e-9 * std::max(1.0, std::abs(pos)) && k >= 0 && k < static_cast<double>(values_.size())) {
            const double tk = grid_.start + k * 0.5 * grid_.h;
            if (same_instant(tk, signal_.family().switch_time())) return signal_(tk, limit);
            return values_(static_cast<Eigen::Index>(k));
        }
        return signal_(t, limit);
    }

private:
    const Signal& signal_;
    UniformGrid grid_;
    Vec values_;
};

}  // namespace qmemnet
