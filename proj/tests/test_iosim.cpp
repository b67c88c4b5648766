#include <gtest/gtest.h>

#include "qmemnet/iosim.hpp"
#include "qmemnet/presets.hpp"
#include "test_support.hpp"

using namespace qmemnet;
using qmemnet::testing::atomic;

namespace {

InputSignal single_mode_input(double gamma) {
    Vec s(1);
    s(0) = 1.0;
    return compose_input(writing_pulse(presets::build_single_mode(gamma), 0.0), s, InputKind::single_photon);
}

double max_output_error(const Trajectory& traj, double kappa, double gamma) {
    double worst = 0.0;
    for (std::size_t k = 1; k < traj.size(); ++k) {
        const double expected = single_mode_closed_form(kappa, gamma, traj.time(k)).xi_tilde;
        worst = std::max(worst, std::abs(traj.output(static_cast<Eigen::Index>(k)) - expected));
    }
    return worst;
}

}  // namespace

TEST(SimulateIo, MatchedSingleModeOutputIsVacuum) {
    const auto sys = presets::build_single_mode(2.0);
    const auto traj = simulate_io(sys, single_mode_input(2.0), -20.0, 0.0, 1e-3);
    const auto rep = zero_output_check(traj, 0.0);
    EXPECT_TRUE(rep.pass) << rep.max_abs;
    // Absorbed amplitude |eta(0)| = 1.
    EXPECT_NEAR(std::abs(traj.state(0, static_cast<Eigen::Index>(traj.size()) - 1)), 1.0, 1e-8);
}

TEST(SimulateIo, MatchedAtomicNetworkOutputIsVacuum) {
    const auto sys = atomic(1.0);
    const auto nu = writing_pulse(sys, 0.0);
    Vec s = Vec::Zero(4);
    s(2) = s(3) = 1.0 / std::sqrt(2.0);
    const auto input = compose_input(nu, presets::atomic_network_frame() * s, InputKind::single_photon);
    const auto traj = simulate_io(sys, input, truncation_start(sys, 0.0), 0.0, default_step(sys));
    EXPECT_TRUE(zero_output_check(traj, 0.0).pass) << zero_output_check(traj, 0.0).max_abs;
    EXPECT_LE(energy_balance_residual(traj), 1e-8);
}

TEST(SimulateIo, ZeroInputStaysAtRest) {
    const auto sys = atomic(1.0);
    const auto traj = simulate_free(sys, Vec::Zero(4), 0.0, 5.0, 0.01);
    EXPECT_EQ(traj.state.norm(), 0.0);
    EXPECT_EQ(traj.output.norm(), 0.0);
}

TEST(SimulateIo, FreeDecayMatchesExponential) {
    const auto sys = atomic(1.0);
    Vec eta0 = Vec::Zero(4);
    eta0(0) = 1.0;
    const auto traj = simulate_free(sys, eta0, 0.0, 4.0, 0.005);
    const Vec expected = expm(sys.a_drift() * 4.0) * eta0;
    EXPECT_LE((traj.state.col(static_cast<Eigen::Index>(traj.size()) - 1) - expected).norm(), 1e-9);
    EXPECT_LE(energy_balance_residual(traj), 1e-9);
}

TEST(SimulateIo, MismatchRatioOneThird) {
    const double kappa = 2.0, gamma = 1.0;
    const auto sys = presets::build_single_mode(kappa);
    const auto traj = simulate_io(sys, single_mode_input(gamma), -40.0, 6.0, 1e-3);
    const auto shape = [&](double t) { return std::sqrt(gamma) * std::exp(gamma * t / 2.0); };
    const cplx before = fit_coefficient(traj, traj.output, -40.0, 0.0, shape);
    EXPECT_NEAR(before.real(), 1.0 / 3.0, 1e-4);
    EXPECT_NEAR(before.imag(), 0.0, 1e-10);
    const auto decay = [&](double t) { return std::sqrt(gamma) * std::exp(-kappa * t / 2.0); };
    const cplx after = fit_coefficient(traj, traj.output, 1e-9, 6.0, decay);
    EXPECT_NEAR(after.real(), 4.0 / 3.0, 1e-4);
}

TEST(SimulateIo, ClosedFormValues) {
    EXPECT_NEAR(single_mode_closed_form(2.0, 1.0, 0.0).xi_tilde, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(single_mode_closed_form(2.0, 1.0, 1e-12).xi_tilde, 4.0 / 3.0, 1e-10);
    EXPECT_NEAR(single_mode_closed_form(2.0, 2.0, -1.0).xi_prime, -std::sqrt(2.0) * std::exp(-1.0), 1e-15);
    EXPECT_THROW(single_mode_closed_form(0.0, 1.0, 0.0), Error);
}

TEST(SimulateIo, FourthOrderConvergence) {
    const double kappa = 2.0, gamma = 1.0;
    const auto sys = presets::build_single_mode(kappa);
    const auto input = single_mode_input(gamma);
    const double coarse = max_output_error(simulate_io(sys, input, -30.0, 4.0, 0.2), kappa, gamma);
    const double fine = max_output_error(simulate_io(sys, input, -30.0, 4.0, 0.1), kappa, gamma);
    EXPECT_GE(coarse / fine, 8.0) << coarse << " " << fine;
}

TEST(SimulateIo, Linearity) {
    const auto sys = atomic(1.0);
    const auto nu = writing_pulse(sys, 0.0);
    Vec a = Vec::Zero(4), b = Vec::Zero(4);
    a(0) = cplx(0.3, 0.1);
    a(2) = 0.5;
    b(1) = cplx(0.0, -0.7);
    b(3) = 0.2;
    const cplx alpha(0.4, -1.1), beta(2.0, 0.3);
    const double t0 = -30.0, h = 0.01;
    const auto ta = simulate_io(sys, compose_input(nu, a, InputKind::coherent), t0, 0.0, h);
    const auto tb = simulate_io(sys, compose_input(nu, b, InputKind::coherent), t0, 0.0, h);
    const auto tab = simulate_io(sys, compose_input(nu, Vec(alpha * a + beta * b), InputKind::coherent), t0, 0.0, h);
    EXPECT_LE((tab.output - alpha * ta.output - beta * tb.output).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SimulateIo, EnergyBalanceRandomSystems) {
    std::mt19937_64 rng(3);
    for (const auto& sys : qmemnet::testing::random_suite(8, 6)) {
        const auto nu = writing_pulse(sys, 0.0);
        const Vec s = qmemnet::testing::random_unit_vector(rng, sys.n());
        const auto traj =
            simulate_io(sys, compose_input(nu, s, InputKind::single_photon), truncation_start(sys, 0.0), 0.0,
                        default_step(sys));
        EXPECT_LE(energy_balance_residual(traj), 1e-8);
        EXPECT_TRUE(zero_output_check(traj, 0.0).pass);
        // Written state equals the coefficients.
        EXPECT_LE((traj.state.col(static_cast<Eigen::Index>(traj.size()) - 1) - s).norm(), 1e-6);
    }
}

TEST(SimulateIo, StepTooLarge) {
    const auto sys = atomic(1.0);
    try {
        simulate_free(sys, Vec::Zero(4), 0.0, 1.0, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::StepTooLarge);
    }
    EXPECT_THROW(simulate_free(sys, Vec::Zero(4), 0.0, 1.0, 0.0), Error);
}

TEST(Cancellation, SingleModeAndAtomicNetwork) {
    std::vector<cplx> samples;
    for (int k = 0; k < 10; ++k) samples.emplace_back(1.0 + 1e-3, -4.5 + k);
    Vec eta1(1);
    eta1(0) = std::sqrt(2.0) / 4.0;
    // s = 1 is the single-mode zero; shift slightly off it.
    const auto rep = transfer_cancellation_check(presets::build_single_mode(2.0), samples, eta1);
    EXPECT_TRUE(rep.pass) << rep.max_residual;
    Vec eta4(4);
    eta4 << 0.1, cplx(0.2, 0.3), -0.4, cplx(0.0, 0.5);
    const auto rep4 = transfer_cancellation_check(atomic(1.0), samples, eta4);
    EXPECT_TRUE(rep4.pass) << rep4.max_residual;
}
