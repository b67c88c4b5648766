#pragma once

// Write / store / read orchestration over piecewise-constant system matrices.
//
// State bookkeeping uses the one-photon amplitude vector c = conj(<a^sharp>_10)
// (or the coherent mean m). Both obey c' = A c - C^dagger xi, so storage and
// reading reuse the same propagators for either input kind.

#include <cmath>
#include <optional>

#include "qmemnet/iosim.hpp"
#include "qmemnet/linsys.hpp"
#include "qmemnet/pulses.hpp"
#include "qmemnet/stats.hpp"

namespace qmemnet {

struct StageSchedule {
    PassiveLinearSystem write_sys;
    PassiveLinearSystem store_sys;
    PassiveLinearSystem read_sys;
    double t1 = 0.0;
    double t2 = 0.0;
    std::optional<double> t_start;  // writing window start; truncation point when absent
    std::optional<Mat> frame;       // primed basis, memory modes last; df_decompose when absent
};

/// Validated schedule with its resolved primed frame.
struct ResolvedSchedule {
    ModeDecomposition store;  // store_sys in the primed frame
    double t_start = 0.0;

    const Mat& frame() const { return store.u; }
    Eigen::Index memory_dim() const { return store.memory_dim; }
    Eigen::Index buffer_dim() const { return store.buffer_dim; }
};

inline ResolvedSchedule resolve_schedule(const StageSchedule& s) {
    const Eigen::Index n = s.write_sys.n();
    if (s.store_sys.n() != n || s.read_sys.n() != n) {
        throw Error(ErrorKind::ScheduleInvalid, "stage systems differ in mode count");
    }
    if (s.t2 < s.t1) throw Error(ErrorKind::ScheduleInvalid, "t2 precedes t1");
    if (!is_hurwitz(s.write_sys)) throw Error(ErrorKind::ScheduleInvalid, "writing system is not Hurwitz");
    if (max_abs(s.read_sys.omega() - s.write_sys.omega()) > 1e-12 ||
        max_abs(s.read_sys.c_row() - s.write_sys.c_row()) > 1e-12) {
        throw Error(ErrorKind::ScheduleInvalid, "reading system must repeat the writing matrices");
    }
    const ModeDecomposition own = df_decompose(s.store_sys);
    if (own.memory_dim < 1) throw Error(ErrorKind::ScheduleInvalid, "storage system has no memory modes");

    ResolvedSchedule r;
    if (s.frame) {
        const Mat& u = *s.frame;
        if (u.rows() != n || u.cols() != n || max_abs(u.adjoint() * u - Mat::Identity(n, n)) > 1e-10) {
            throw Error(ErrorKind::ScheduleInvalid, "frame is not an n x n unitary");
        }
        const double angle = max_principal_angle(own.memory_basis(), u.rightCols(own.memory_dim));
        if (angle > 1e-8) {
            throw Error(ErrorKind::ScheduleInvalid,
                        "frame memory columns miss the decoherence-free subspace by " + std::to_string(angle));
        }
        r.store = decompose_in_frame(s.store_sys, u, own.buffer_dim);
    } else {
        r.store = own;
    }
    r.t_start = s.t_start.value_or(truncation_start(s.write_sys, s.t1));
    if (!(r.t_start < s.t1)) throw Error(ErrorKind::ScheduleInvalid, "writing window is empty");
    return r;
}

/// Input built from coefficients in the primed frame: xi = sum_k s'_k nu'_k = (U s')^T nu.
inline InputSignal primed_input(const StageSchedule& s, const Vec& primed_coefficients, InputKind kind) {
    const ResolvedSchedule r = resolve_schedule(s);
    return compose_input(writing_pulse(s.write_sys, s.t1), r.frame() * primed_coefficients, kind);
}

/// Storage-stage propagation of a primed-frame state: buffer modes decay by
/// exp(A_B duration); memory modes are copied (or rotated by exp(A_M duration)
/// when the memory carries its own Hamiltonian).
inline Vec storage_decay(const ModeDecomposition& store, const Vec& primed_state, double duration) {
    if (primed_state.size() != store.u.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "state length mismatch");
    }
    if (store.block_residual > 1e-8) {
        throw Error(ErrorKind::BlockStructureViolation, "storage system is not in block form");
    }
    Vec out = primed_state;
    const Eigen::Index b = store.buffer_dim, m = store.memory_dim;
    if (b > 0) out.head(b) = expm(store.a_buffer * duration) * primed_state.head(b);
    if (m > 0 && max_abs(store.a_memory) > 1e-12) {
        out.tail(m) = expm(store.a_memory * duration) * primed_state.tail(m);
    }
    return out;
}

inline Vec storage_decay(const PassiveLinearSystem& store_sys, const Vec& primed_state, double duration) {
    const ModeDecomposition d = df_decompose(store_sys);
    if (d.memory_dim < 1) throw Error(ErrorKind::BlockStructureViolation, "storage system has no memory modes");
    return storage_decay(d, primed_state, duration);
}

/// Node-frame amplitude vector c at the end of the write stage run up to `until`.
struct WriteStage {
    std::optional<PhotonStatistics> photon;
    std::optional<CoherentStatistics> coherent;
    Vec amplitudes;  // node frame
};

inline WriteStage run_write_stage(const PassiveLinearSystem& sys, const InputSignal& input, double t_start,
                                  double until, double h, const StatsOptions& opts = {}) {
    WriteStage w;
    if (input.kind() == InputKind::single_photon) {
        w.photon = evolve_photon_stats(sys, input, t_start, until, h, opts);
        w.amplitudes = w.photon->final_a10().conjugate();
    } else {
        w.coherent = evolve_coherent_stats(sys, input, t_start, until, h);
        w.amplitudes = w.coherent->final_mean();
    }
    return w;
}

struct ProtocolReport {
    InputKind kind = InputKind::single_photon;
    Vec input_primed;              // U^dagger times the node-frame input coefficients
    Vec written_primed;            // full primed amplitudes at the switch
    Vec stored_coefficients;       // memory components at the switch
    Vec after_storage_primed;      // primed amplitudes at t2
    double leakage = 0.0;          // input weight not in the memory modes at the switch
    double retrieval_fidelity = 0.0;
    double retrieved_energy = 0.0;
    double zero_output_max = 0.0;  // max |output| during writing
    WriteStage write;
    Trajectory write_io;           // classical io run of the writing stage
    Trajectory read;               // free evolution from t2, output = retrieved pulse
    Vec target;                    // sum_k s'_k nu_tilde'_k on the read grid
};

/// `switch_time` moves the write-to-store switch earlier than t1; input arriving
/// after the switch is not absorbed.
inline ProtocolReport run_protocol(const StageSchedule& schedule, const InputSignal& input, double h,
                                   const StatsOptions& opts = {},
                                   std::optional<double> switch_time = std::nullopt) {
    const ResolvedSchedule r = resolve_schedule(schedule);
    const double t_switch = switch_time.value_or(schedule.t1);
    if (t_switch > schedule.t1 && !same_instant(t_switch, schedule.t1)) {
        throw Error(ErrorKind::ScheduleInvalid, "switch must not follow t1");
    }
    if (!(t_switch > r.t_start)) throw Error(ErrorKind::ScheduleInvalid, "switch precedes the writing window");
    const Mat& u = r.frame();
    const Eigen::Index b = r.buffer_dim(), m = r.memory_dim();
    if (input.coefficients().size() != u.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "input coefficient length mismatch");
    }
    ProtocolReport rep;
    rep.kind = input.kind();
    rep.input_primed = u.adjoint() * input.coefficients();
    const double off_memory = b > 0 ? rep.input_primed.head(b).squaredNorm() : 0.0;
    if (off_memory > 1e-8) {
        throw Error(ErrorKind::UnsupportedCoefficients,
                    "input places weight " + std::to_string(off_memory) + " on buffer modes");
    }

    rep.write = run_write_stage(schedule.write_sys, input, r.t_start, t_switch, h, opts);
    rep.write_io = simulate_io(schedule.write_sys, input, r.t_start, t_switch, h);
    rep.zero_output_max = zero_output_check(rep.write_io, t_switch).max_abs;
    rep.written_primed = u.adjoint() * rep.write.amplitudes;
    rep.stored_coefficients = rep.written_primed.tail(m);
    rep.leakage = std::max(0.0, input.energy() - rep.stored_coefficients.squaredNorm());

    rep.after_storage_primed = storage_decay(r.store, rep.written_primed, schedule.t2 - t_switch);

    const double abscissa = spectral_abscissa(schedule.read_sys);
    const double t_end = schedule.t2 + 40.0 / std::abs(abscissa);
    rep.read = simulate_free(schedule.read_sys, u * rep.after_storage_primed, schedule.t2, t_end, h);

    const PulseFamily nu_read = reading_pulse(schedule.read_sys, schedule.t2);
    const UniformGrid& g = rep.read.grid;
    rep.target = (input.coefficients().transpose() * nu_read.sample(g.start, g.h, g.size())).transpose();
    const auto w = simpson_weights(g.size(), g.h);
    cplx overlap{0.0, 0.0};
    double rr = 0.0, tt = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        overlap += w[k] * std::conj(rep.target(i)) * rep.read.output(i);
        rr += w[k] * std::norm(rep.read.output(i));
        tt += w[k] * std::norm(rep.target(i));
    }
    rep.retrieved_energy = rr;
    rep.retrieval_fidelity = (rr > 0.0 && tt > 0.0) ? std::norm(overlap) / (rr * tt) : 0.0;
    return rep;
}

struct EarlySwitchReport {
    double t_switch = 0.0;
    Vec amplitudes;          // primed-frame one-photon amplitudes c'
    RealVec magnitudes;      // |c'_k|
    RealVec populations;     // |c'_k|^2, mean photon numbers per primed mode
    double vacuum_weight = 0.0;  // input weight not yet in the system
    double memory_weight = 0.0;
    double leakage = 0.0;        // input weight outside the memory modes
};

/// Stops the writing stage at t_switch <= t1 while the input stays the pulse designed for t1.
inline EarlySwitchReport early_switch_experiment(const StageSchedule& schedule, const InputSignal& input,
                                                 double t_switch, double h) {
    const ResolvedSchedule r = resolve_schedule(schedule);
    if (t_switch > schedule.t1 && !same_instant(t_switch, schedule.t1)) {
        throw Error(ErrorKind::ScheduleInvalid, "early switch must not follow t1");
    }
    const Eigen::Index n = schedule.write_sys.n();
    EarlySwitchReport rep;
    rep.t_switch = t_switch;
    if (t_switch <= r.t_start || same_instant(t_switch, r.t_start)) {
        rep.amplitudes = Vec::Zero(n);
    } else {
        StatsOptions opts;
        opts.record_stride = std::numeric_limits<std::size_t>::max();
        const WriteStage w = run_write_stage(schedule.write_sys, input, r.t_start, t_switch, h, opts);
        rep.amplitudes = r.frame().adjoint() * w.amplitudes;
    }
    rep.magnitudes = rep.amplitudes.cwiseAbs();
    rep.populations = rep.amplitudes.cwiseAbs2();
    rep.memory_weight = rep.populations.tail(r.memory_dim()).sum();
    rep.vacuum_weight = std::max(0.0, input.energy() - rep.populations.sum());
    rep.leakage = std::max(0.0, input.energy() - rep.memory_weight);
    return rep;
}

}  // namespace qmemnet
