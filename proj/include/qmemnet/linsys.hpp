#pragma once

// Passive linear quantum networks: construction, spectra, controllability,
// decoherence-free decomposition and the scalar transfer function.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qmemnet/numerics.hpp"
#include "qmemnet/types.hpp"

namespace qmemnet {

/// Open network of n coupled modes driven by one field channel.
/// Drift is A = -i Omega - C^dagger C / 2.
class PassiveLinearSystem {
public:
    PassiveLinearSystem(Mat omega, RowVec c_row)
        : omega_(std::move(omega)), c_(std::move(c_row)) {
        a_ = -I_unit * omega_ - 0.5 * c_.adjoint() * c_;
    }

    Eigen::Index n() const { return omega_.rows(); }
    const Mat& omega() const { return omega_; }
    const RowVec& c_row() const { return c_; }
    const Mat& a_drift() const { return a_; }
    /// Elementwise conjugate A^sharp.
    Mat a_sharp() const { return a_.conjugate(); }

private:
    Mat omega_;
    RowVec c_;
    Mat a_;
};

inline PassiveLinearSystem build_system(const Mat& omega, const RowVec& c_row) {
    if (omega.rows() != omega.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "omega must be square");
    }
    if (omega.rows() == 0) {
        throw Error(ErrorKind::DimensionMismatch, "system needs at least one mode");
    }
    if (c_row.size() != omega.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "coupling row has length " +
                                                      std::to_string(c_row.size()) + ", expected " +
                                                      std::to_string(omega.rows()));
    }
    if (!omega.allFinite() || !c_row.allFinite()) {
        throw Error(ErrorKind::DimensionMismatch, "non-finite matrix entries");
    }
    const double residual = max_abs(omega - omega.adjoint());
    const double tol = 1e-12 * std::max(1.0, max_abs(omega));
    if (residual > tol) {
        throw Error(ErrorKind::NotHermitian,
                    "omega Hermiticity residual " + std::to_string(residual));
    }
    Mat symmetric = 0.5 * (omega + omega.adjoint());
    return PassiveLinearSystem(std::move(symmetric), c_row);
}

inline Vec eigenvalues(const Mat& m) {
    Eigen::ComplexEigenSolver<Mat> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::EigenFailure, "complex Schur iteration did not converge");
    }
    return solver.eigenvalues();
}

inline Vec poles(const PassiveLinearSystem& sys) { return eigenvalues(sys.a_drift()); }

/// Largest real part over the spectrum of A.
inline double spectral_abscissa(const PassiveLinearSystem& sys) {
    const Vec ev = poles(sys);
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i) best = std::max(best, ev(i).real());
    return best;
}

inline double spectral_radius(const PassiveLinearSystem& sys) {
    const Vec ev = poles(sys);
    double best = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) best = std::max(best, std::abs(ev(i)));
    return best;
}

inline bool is_hurwitz(const PassiveLinearSystem& sys, double tol = 1e-10) {
    return spectral_abscissa(sys) < -tol;
}

/// Orthonormal basis (n x m) of span{C^dagger, A C^dagger, ..., A^{n-1} C^dagger}.
/// Krylov columns are normalised individually before the SVD; this leaves the
/// span unchanged and keeps the rank decision independent of |A|^k growth.
inline Mat controllable_subspace(const PassiveLinearSystem& sys) {
    const auto n = sys.n();
    Mat krylov(n, n);
    Vec col = sys.c_row().adjoint();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double norm = col.norm();
        krylov.col(k) = norm > 0.0 ? Vec(col / norm) : col;
        col = sys.a_drift() * krylov.col(k);
    }
    Eigen::JacobiSVD<Mat> svd(krylov, Eigen::ComputeFullU);
    const RealVec& sigma = svd.singularValues();
    Eigen::Index rank = 0;
    if (sigma.size() > 0 && sigma(0) > 0.0) {
        const double threshold = 1e-10 * sigma(0);
        while (rank < sigma.size() && sigma(rank) > threshold) ++rank;
    }
    return svd.matrixU().leftCols(rank);
}

/// Basis change separating the field-coupled buffer from the decoherence-free memory.
struct ModeDecomposition {
    Mat u;                  // n x n unitary, buffer columns first
    Eigen::Index buffer_dim = 0;
    Eigen::Index memory_dim = 0;
    Mat a_buffer;           // buffer block of U^dagger A U
    RowVec c_buffer;        // buffer block of C U
    Mat a_memory;           // memory block of U^dagger A U
    double block_residual = 0.0;

    Mat memory_basis() const { return u.rightCols(memory_dim); }
    Mat buffer_basis() const { return u.leftCols(buffer_dim); }
};

/// Largest magnitude among the entries that must vanish for the block form
/// [[A_B, 0], [0, A_M]], [C_B, 0] in the frame `u` with `buffer_dim` coupled modes.
inline double df_block_residual(const PassiveLinearSystem& sys, const Mat& u,
                                Eigen::Index buffer_dim) {
    const Eigen::Index n = sys.n();
    const Eigen::Index mem = n - buffer_dim;
    if (mem == 0) return 0.0;
    const Mat a_t = u.adjoint() * sys.a_drift() * u;
    const RowVec c_t = sys.c_row() * u;
    double r = max_abs(c_t.tail(mem));
    if (buffer_dim > 0) {
        r = std::max(r, max_abs(a_t.topRightCorner(buffer_dim, mem)));
        r = std::max(r, max_abs(a_t.bottomLeftCorner(mem, buffer_dim)));
    }
    return r;
}

inline ModeDecomposition decompose_in_frame(const PassiveLinearSystem& sys, const Mat& u,
                                            Eigen::Index buffer_dim) {
    ModeDecomposition d;
    d.u = u;
    d.buffer_dim = buffer_dim;
    d.memory_dim = sys.n() - buffer_dim;
    const Mat a_t = u.adjoint() * sys.a_drift() * u;
    const RowVec c_t = sys.c_row() * u;
    d.a_buffer = a_t.topLeftCorner(buffer_dim, buffer_dim);
    d.c_buffer = c_t.head(buffer_dim);
    d.a_memory = a_t.bottomRightCorner(d.memory_dim, d.memory_dim);
    d.block_residual = df_block_residual(sys, u, buffer_dim);
    if (d.block_residual > 1e-8) {
        throw Error(ErrorKind::BlockStructureViolation,
                    "memory block couples to buffer or field, residual " +
                        std::to_string(d.block_residual));
    }
    return d;
}

inline ModeDecomposition df_decompose(const PassiveLinearSystem& sys) {
    const Mat basis = controllable_subspace(sys);
    const Eigen::Index m = basis.cols();
    const Eigen::Index n = sys.n();
    Mat u(n, n);
    u.leftCols(m) = basis;
    if (m < n) {
        // Orthonormal complement from the full left singular basis of the projector residual.
        const Mat residual = Mat::Identity(n, n) - basis * basis.adjoint();
        Eigen::JacobiSVD<Mat> svd(residual, Eigen::ComputeFullU);
        u.rightCols(n - m) = svd.matrixU().leftCols(n - m);
    }
    return decompose_in_frame(sys, u, m);
}

/// Largest principal angle (radians) between the column spans of two orthonormal bases.
inline double max_principal_angle(const Mat& q1, const Mat& q2) {
    if (q1.cols() != q2.cols()) return M_PI / 2;
    if (q1.cols() == 0) return 0.0;
    const Mat residual = q2 - q1 * (q1.adjoint() * q2);
    const double s = std::min(1.0, spectral_norm(residual));
    return std::asin(s);
}

/// G[s] = 1 - C (sI - A)^{-1} C^dagger, by LU solve.
inline cplx transfer_function(const PassiveLinearSystem& sys, cplx s) {
    const Vec ev = poles(sys);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i) - s) <= 1e-12) {
            throw Error(ErrorKind::SingularResolvent, "s coincides with a pole");
        }
    }
    const Mat resolvent = s * Mat::Identity(sys.n(), sys.n()) - sys.a_drift();
    const Vec x = resolvent.partialPivLu().solve(Vec(sys.c_row().adjoint()));
    return 1.0 - (sys.c_row() * x)(0);
}

/// Greedy nearest-neighbour pairing distance between two spectra.
inline double pairing_residual(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    std::vector<bool> used(static_cast<std::size_t>(b.size()), false);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index best_j = -1;
        for (Eigen::Index j = 0; j < b.size(); ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double d = std::abs(a(i) - b(j));
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        used[static_cast<std::size_t>(best_j)] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

/// Zeros of G[s] as eig(A + C^dagger C), cross-checked against eig(-A^dagger).
inline Vec transmission_zeros(const PassiveLinearSystem& sys) {
    const Mat shifted = sys.a_drift() + sys.c_row().adjoint() * sys.c_row();
    const Vec zeros = eigenvalues(shifted);
    const Vec mirror = eigenvalues(Mat(-sys.a_drift().adjoint()));
    const double residual = pairing_residual(zeros, mirror);
    if (residual > 1e-8 * std::max(1.0, max_abs(sys.a_drift()))) {
        throw Error(ErrorKind::EigenFailure,
                    "zero spectrum disagrees with -A^dagger, residual " + std::to_string(residual));
    }
    return zeros;
}

}  // namespace qmemnet
