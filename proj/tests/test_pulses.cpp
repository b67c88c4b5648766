#include <gtest/gtest.h>

#include <random>

#include "qmemnet/pulses.hpp"
#include "test_support.hpp"

using namespace qmemnet;
using qmemnet::testing::atomic;

namespace {

// Test-side propagation of y' = M y with a plain RK4 loop (independent of expm).
Vec propagate(const Mat& m, Vec y, double duration, int steps) {
    const double h = duration / steps;
    for (int i = 0; i < steps; ++i) {
        const Vec k1 = m * y;
        const Vec k2 = m * (y + 0.5 * h * k1);
        const Vec k3 = m * (y + 0.5 * h * k2);
        const Vec k4 = m * (y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

}  // namespace

TEST(WritingPulse, SingleModeRisingExponential) {
    const double kappa = 2.0;
    const auto nu = writing_pulse(presets::build_single_mode(kappa), 0.0);
    for (double t : {-5.0, -1.3, -0.2, 0.0}) {
        const cplx expected = -std::sqrt(kappa) * std::exp(kappa * t / 2.0);
        EXPECT_NEAR(std::abs(nu.evaluate(t)(0) - expected), 0.0, 1e-13) << t;
    }
    EXPECT_EQ(nu.evaluate(1.0).norm(), 0.0);
    EXPECT_EQ(nu.evaluate(0.0, Limit::right).norm(), 0.0);
}

TEST(WritingPulse, RequiresHurwitz) {
    try {
        writing_pulse(atomic(0.0), 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotHurwitz);
    }
    EXPECT_THROW(reading_pulse(atomic(0.0), 0.0), Error);
}

TEST(WritingPulse, AtomicNetworkMatchesOdePropagation) {
    const auto sys = atomic(1.0);
    const auto nu = writing_pulse(sys, 0.0);
    const Mat a_sharp = sys.a_sharp();
    // nu(t) = exp(-A^sharp t) nu(0) solves y' = -A^sharp y; march backwards from t = 0.
    const Vec nu0 = -sys.c_row().transpose();
    for (double t : {-0.5, -3.0, -10.0, -25.0}) {
        const Vec ode = propagate(-a_sharp, nu0, t, static_cast<int>(std::abs(t) * 400));
        EXPECT_LE((ode - nu.evaluate(t)).norm(), 1e-8 * std::max(1.0, ode.norm())) << t;
    }
    // Primed memory pulses vanish at the switching time.
    const Mat u = presets::atomic_network_frame();
    const Vec primed = u.transpose() * nu.evaluate(0.0);
    EXPECT_LE(std::abs(primed(2)), 1e-14);
    EXPECT_LE(std::abs(primed(3)), 1e-14);
    EXPECT_GT(std::abs((u.transpose() * nu.evaluate(-2.0))(2)), 0.05);
}

TEST(WritingPulse, SampledGridMatchesClosedForm) {
    const auto sys = atomic(1.0);
    const auto nu = writing_pulse(sys, 0.5);
    const Mat s = nu.sample(-30.0, 0.01, 3101);
    for (int k : {0, 1000, 2999, 3049, 3050, 3051, 3100}) {
        const double t = -30.0 + 0.01 * k;
        EXPECT_LE((s.col(k) - nu.evaluate(t)).norm(), 1e-11) << t;
    }
}

TEST(WritingPulse, TimeShiftCovariance) {
    const auto sys = atomic(1.0);
    const auto nu0 = writing_pulse(sys, 0.0);
    const auto nu1 = writing_pulse(sys, 1.7);
    for (double t = -20.0; t <= 3.0; t += 0.37) {
        EXPECT_LE((nu1.evaluate(t) - nu0.evaluate(t - 1.7)).norm(), 1e-12);
    }
}

TEST(ReadingPulse, SingleModeDecayingExponential) {
    const double kappa = 2.0;
    const auto nu = reading_pulse(presets::build_single_mode(kappa), 0.0);
    for (double t : {0.1, 1.0, 4.0}) {
        EXPECT_NEAR(std::abs(nu.evaluate(t)(0) - std::sqrt(kappa) * std::exp(-kappa * t / 2.0)), 0.0, 1e-13);
    }
    EXPECT_EQ(nu.evaluate(-1.0).norm(), 0.0);
    EXPECT_EQ(nu.evaluate(0.0, Limit::left).norm(), 0.0);
    EXPECT_GT(nu.evaluate(0.0, Limit::right).norm(), 1.0);
}

TEST(Gramian, SingleMode) {
    const auto nu = writing_pulse(presets::build_single_mode(2.0), 0.0);
    const Mat g = gramian(nu);
    EXPECT_NEAR(std::abs(g(0, 0) - 1.0), 0.0, 1e-8);
}

TEST(Gramian, AtomicNetworkIsIdentity) {
    const auto sys = atomic(1.0);
    EXPECT_LE(max_abs(gramian(writing_pulse(sys, 0.0)) - Mat::Identity(4, 4)), 1e-6);
    EXPECT_LE(max_abs(gramian(reading_pulse(sys, 3.0)) - Mat::Identity(4, 4)), 1e-6);
}

TEST(Gramian, RandomSystemsAreOrthonormal) {
    for (const auto& sys : qmemnet::testing::random_suite(21, 12)) {
        const Mat id = Mat::Identity(sys.n(), sys.n());
        EXPECT_LE(max_abs(gramian(writing_pulse(sys, 0.0)) - id), 1e-6);
        EXPECT_LE(max_abs(gramian(reading_pulse(sys, 0.0)) - id), 1e-6);
    }
}

TEST(Gramian, WindowTooSmall) {
    const auto nu = writing_pulse(presets::build_single_mode(2.0), 0.0);
    try {
        gramian(nu, {-3.0, 0.0, 0.01});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::WindowTooSmall);
    }
}

TEST(Truncation, EnvelopeBound) {
    const auto sys = atomic(1.0);
    const double tau = truncation_duration(sys.a_drift());
    EXPECT_LE(spectral_norm(expm(sys.a_drift() * tau)), 1e-8 * (1.0 + 1e-6));
    EXPECT_GT(spectral_norm(expm(sys.a_drift() * (0.95 * tau))), 1e-8);
    EXPECT_LE(tau, 80.0 / std::abs(spectral_abscissa(sys)));
}

TEST(ComposeInput, BasisSelection) {
    const auto nu = writing_pulse(presets::build_single_mode(2.0), 0.0);
    Vec s(1);
    s(0) = 1.0;
    const auto xi = compose_input(nu, s, InputKind::single_photon);
    for (double t : {-2.0, -0.1, 0.0, 0.5}) EXPECT_EQ(xi(t), nu.evaluate(t)(0));
}

TEST(ComposeInput, AtomicMemoryCodeIsNormalised) {
    const auto sys = atomic(1.0);
    const auto nu = writing_pulse(sys, 0.0);
    Vec s = Vec::Zero(4);
    s(2) = s(3) = 1.0 / std::sqrt(2.0);
    const Mat u = presets::atomic_network_frame();
    const auto xi = compose_input(nu, u * s, InputKind::single_photon);
    // xi equals (nu'_3 + nu'_4)/sqrt2 with nu' = U^T nu.
    for (double t : {-6.0, -1.0, -0.01}) {
        const Vec primed = u.transpose() * nu.evaluate(t);
        EXPECT_NEAR(std::abs(xi(t) - (primed(2) + primed(3)) / std::sqrt(2.0)), 0.0, 1e-13);
    }
    const QuadratureSpec q = default_quadrature(nu);
    const UniformGrid g = grid_ending_at(q.t_lo, q.t_hi, q.h);
    const Vec samples = xi.sample(g.start, g.h, g.size());
    std::vector<double> power(samples.size());
    for (Eigen::Index i = 0; i < samples.size(); ++i) power[static_cast<std::size_t>(i)] = std::norm(samples(i));
    EXPECT_NEAR(simpson(power, g.h), 1.0, 1e-8);
}

TEST(ComposeInput, CoherentEnergyIsCoefficientNorm) {
    Mat omega(2, 2);
    omega << 0.3, cplx(0.2, -0.4), cplx(0.2, 0.4), -0.5;
    RowVec c(2);
    c << cplx(1.0, 0.2), cplx(-0.4, 0.6);
    const auto sys = build_system(omega, c);
    ASSERT_TRUE(is_hurwitz(sys));
    const auto nu = writing_pulse(sys, 0.0);
    Vec alpha(2);
    alpha << 0.0, cplx(0.0, 2.0);
    const auto f = compose_input(nu, alpha, InputKind::coherent);
    const QuadratureSpec q = default_quadrature(nu);
    const UniformGrid g = grid_ending_at(q.t_lo, q.t_hi, q.h);
    const Vec samples = f.sample(g.start, g.h, g.size());
    std::vector<double> power(samples.size());
    for (Eigen::Index i = 0; i < samples.size(); ++i) power[static_cast<std::size_t>(i)] = std::norm(samples(i));
    EXPECT_NEAR(simpson(power, g.h), 4.0, 1e-8);
}

TEST(ComposeInput, Errors) {
    const auto nu = writing_pulse(atomic(1.0), 0.0);
    try {
        compose_input(nu, Vec::Ones(4), InputKind::single_photon);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NormViolation);
    }
    EXPECT_THROW(compose_input(nu, Vec::Ones(3), InputKind::coherent), Error);
    EXPECT_NO_THROW(compose_input(nu, Vec::Ones(4), InputKind::coherent));
}

TEST(Simpson, WeightsIntegrateCubicsExactly) {
    for (std::size_t count : {3u, 4u, 5u, 8u, 11u}) {
        const double h = 2.0 / static_cast<double>(count - 1);
        std::vector<double> f(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double x = -1.0 + h * static_cast<double>(i);
            f[i] = x * x * x + 2.0 * x * x + 1.0;
        }
        EXPECT_NEAR(simpson(f, h), 4.0 / 3.0 + 2.0, 1e-13) << count;
    }
}
