#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "qmemnet/linsys.hpp"
#include "test_support.hpp"

using namespace qmemnet;
using qmemnet::testing::atomic;

namespace {

// Independent oracle: explicit inverse instead of the LU solve.
cplx transfer_by_inverse(const PassiveLinearSystem& sys, cplx s) {
    const Mat inv = (s * Mat::Identity(sys.n(), sys.n()) - sys.a_drift()).inverse();
    return 1.0 - (sys.c_row() * inv * sys.c_row().adjoint())(0);
}

// Rosenbrock pencil determinant det([[sI - A, C^dagger], [C, 1]]) scaled by det(sI - A).
cplx pencil_ratio(const PassiveLinearSystem& sys, cplx s) {
    const auto n = sys.n();
    Mat p(n + 1, n + 1);
    p.topLeftCorner(n, n) = s * Mat::Identity(n, n) - sys.a_drift();
    p.topRightCorner(n, 1) = sys.c_row().adjoint();
    p.bottomLeftCorner(1, n) = sys.c_row();
    p(n, n) = 1.0;
    return p.determinant() / (s * Mat::Identity(n, n) - sys.a_drift()).determinant();
}

}  // namespace

TEST(BuildSystem, SingleModeDrift) {
    Mat omega = Mat::Zero(1, 1);
    RowVec c(1);
    c(0) = std::sqrt(2.0);
    const auto sys = build_system(omega, c);
    EXPECT_NEAR(std::abs(sys.a_drift()(0, 0) - cplx(-1.0, 0.0)), 0.0, 1e-15);
}

TEST(BuildSystem, AtomicNetworkDriftMatchesDisplayedMatrix) {
    const auto sys = atomic(1.0);
    Mat expected(4, 4);
    expected << -1, 1, 1, 1,
                -1, cplx(0, -1), 0, 0,
                -1, 0, cplx(0, 1), 0,
                -1, 0, 0, 0;
    EXPECT_LE(max_abs(sys.a_drift() - expected), 1e-15);
    // A + A^dagger = -C^dagger C
    EXPECT_LE(max_abs(sys.a_drift() + sys.a_drift().adjoint() + sys.c_row().adjoint() * sys.c_row()), 1e-12);
}

TEST(BuildSystem, RejectsNonHermitian) {
    Mat omega(2, 2);
    omega << 0, 1, 0, 0;
    RowVec c = RowVec::Ones(2);
    try {
        build_system(omega, c);
        FAIL() << "expected NotHermitian";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotHermitian);
    }
}

TEST(BuildSystem, RejectsDimensionMismatch) {
    const Mat omega = Mat::Zero(2, 2);
    const RowVec c = RowVec::Ones(3);
    EXPECT_THROW(build_system(omega, c), Error);
    EXPECT_THROW(build_system(Mat::Zero(2, 3), RowVec::Ones(2)), Error);
}

TEST(BuildSystem, SymmetrisesRoundOff) {
    Mat omega(2, 2);
    omega << 1.0, cplx(0.5, 1e-14), cplx(0.5, 0.0), 2.0;
    const auto sys = build_system(omega, RowVec::Ones(2));
    EXPECT_EQ(max_abs(sys.omega() - sys.omega().adjoint()), 0.0);
}

TEST(Hurwitz, Examples) {
    EXPECT_TRUE(is_hurwitz(presets::build_single_mode(2.0)));
    EXPECT_TRUE(is_hurwitz(atomic(1.0)));
    EXPECT_FALSE(is_hurwitz(atomic(0.0)));
}

TEST(Controllability, Ranks) {
    EXPECT_EQ(controllable_subspace(presets::build_single_mode(2.0)).cols(), 1);
    EXPECT_EQ(controllable_subspace(atomic(0.0)).cols(), 2);
    EXPECT_EQ(controllable_subspace(atomic(1.0)).cols(), 4);
    const auto zero_coupling = build_system(Mat::Identity(3, 3), RowVec::Zero(3));
    EXPECT_EQ(controllable_subspace(zero_coupling).cols(), 0);
}

TEST(Controllability, RawKrylovOracleAtDeltaZero) {
    // Brute-force: SVD of the unnormalised controllability matrix.
    const auto sys = atomic(0.0);
    Mat k(4, 4);
    Vec col = sys.c_row().adjoint();
    for (int i = 0; i < 4; ++i) {
        k.col(i) = col;
        col = sys.a_drift() * col;
    }
    Eigen::JacobiSVD<Mat> svd(k);
    const auto& s = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < 4; ++i)
        if (s(i) > 1e-10 * s(0)) ++rank;
    EXPECT_EQ(rank, 2);
}

TEST(Controllability, FullRankIffHurwitz) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 40; ++trial) {
        const Eigen::Index n = 1 + trial % 5;
        Mat x(n, n);
        RowVec c(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) x(i, j) = {gauss(rng), gauss(rng)};
            c(i) = {gauss(rng), gauss(rng)};
        }
        // Every third trial gets a hidden decoupled mode.
        if (trial % 3 == 0 && n > 1) {
            x.row(n - 1).setZero();
            x.col(n - 1).setZero();
            x(n - 1, n - 1) = 0.7;
            c(n - 1) = 0.0;
        }
        const auto sys = build_system(0.5 * (x + x.adjoint()), c);
        EXPECT_EQ(controllable_subspace(sys).cols() == n, is_hurwitz(sys)) << "trial " << trial;
    }
}

TEST(DfDecompose, AtomicNetworkDeltaZero) {
    const auto sys = atomic(0.0);
    const auto d = df_decompose(sys);
    EXPECT_EQ(d.memory_dim, 2);
    EXPECT_EQ(d.buffer_dim, 2);
    EXPECT_LE(max_abs(d.u.adjoint() * d.u - Mat::Identity(4, 4)), 1e-10);
    EXPECT_LE(d.block_residual, 1e-8);
    EXPECT_LE(max_principal_angle(d.memory_basis(), presets::atomic_network_frame().rightCols(2)), 1e-8);
    // Buffer block reproduces [[-kappa/2, sqrt3 g], [-sqrt3 g, 0]] up to a basis phase.
    EXPECT_NEAR(std::abs(d.a_buffer.trace() - cplx(-1.0, 0.0)), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(d.a_buffer.determinant() - cplx(3.0, 0.0)), 0.0, 1e-10);
}

TEST(DfDecompose, HurwitzSystemsHaveNoMemory) {
    EXPECT_EQ(df_decompose(atomic(1.0)).memory_dim, 0);
    EXPECT_EQ(df_decompose(presets::build_single_mode(2.0)).memory_dim, 0);
}

TEST(DfDecompose, IdempotentOnTransformedSystem) {
    const auto sys = atomic(0.0);
    const auto d = df_decompose(sys);
    const Mat omega_t = d.u.adjoint() * sys.omega() * d.u;
    const auto transformed = build_system(0.5 * (omega_t + omega_t.adjoint()), RowVec(sys.c_row() * d.u));
    EXPECT_EQ(df_decompose(transformed).memory_dim, d.memory_dim);
}

TEST(DfDecompose, RejectsFrameWithoutBlockForm) {
    const auto sys = atomic(0.0);
    // Node frame: the memory column (a_4) is coupled to the cavity.
    EXPECT_THROW(decompose_in_frame(sys, Mat::Identity(4, 4), 2), Error);
}

TEST(TransferFunction, SingleModeValues) {
    const auto sys = presets::build_single_mode(2.0);
    EXPECT_NEAR(std::abs(transfer_function(sys, 3.0) - cplx(0.5, 0.0)), 0.0, 1e-14);
    for (double kappa : {0.5, 2.0, 7.0}) {
        EXPECT_NEAR(std::abs(transfer_function(presets::build_single_mode(kappa), 0.0) + 1.0), 0.0, 1e-14);
    }
}

TEST(TransferFunction, AtomicNetworkMatchesExplicitInverse) {
    const auto sys = atomic(1.0);
    const cplx g = transfer_function(sys, 1.0);
    EXPECT_NEAR(std::abs(g - transfer_by_inverse(sys, 1.0)), 0.0, 1e-12);
}

TEST(TransferFunction, SingularAtPole) {
    const auto sys = presets::build_single_mode(2.0);
    try {
        transfer_function(sys, -1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularResolvent);
    }
}

TEST(TransmissionZeros, SingleMode) {
    auto z = transmission_zeros(presets::build_single_mode(2.0));
    ASSERT_EQ(z.size(), 1);
    EXPECT_NEAR(std::abs(z(0) - 1.0), 0.0, 1e-14);
    z = transmission_zeros(presets::build_single_mode(4.0));
    EXPECT_NEAR(std::abs(z(0) - 2.0), 0.0, 1e-14);
}

TEST(TransmissionZeros, MirrorPolesAndPencilOracle) {
    for (const auto& sys : qmemnet::testing::random_suite(5, 12)) {
        const Vec z = transmission_zeros(sys);
        const Vec p = poles(sys);
        EXPECT_LE(pairing_residual(z, Vec(-p.conjugate())), 1e-8);
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            EXPECT_LE(std::abs(pencil_ratio(sys, z(i))), 1e-8);
            EXPECT_LE(std::abs(transfer_function(sys, z(i))), 1e-8);
        }
    }
    const auto net = atomic(1.0);
    EXPECT_LE(pairing_residual(transmission_zeros(net), Vec(-poles(net).conjugate())), 1e-8);
}

TEST(TransferFunction, AllPassOnImaginaryAxis) {
    for (const auto& sys : qmemnet::testing::random_suite(6, 12)) {
        const double bound = 10.0 * spectral_norm(sys.a_drift());
        for (int k = 0; k <= 40; ++k) {
            const double w = -bound + 2.0 * bound * k / 40.0;
            EXPECT_NEAR(std::abs(transfer_function(sys, cplx(0.0, w))), 1.0, 1e-8);
        }
    }
}

TEST(PrincipalAngle, DetectsRotatedSubspace) {
    Mat q1 = Mat::Zero(3, 1), q2 = Mat::Zero(3, 1);
    q1(0, 0) = 1.0;
    q2(0, 0) = std::cos(0.3);
    q2(1, 0) = std::sin(0.3);
    EXPECT_NEAR(max_principal_angle(q1, q2), 0.3, 1e-12);
}
