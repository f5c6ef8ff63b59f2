#include "openphase/stirap.hpp"

#include <gtest/gtest.h>

using namespace openphase;

TEST(Pulses, PeaksAndOrder) {
    const PulseParams p;
    const auto [a1, a2] = pulses(0.0, p);
    EXPECT_NEAR(a2, 15.0, 1e-14);
    const auto [b1, b2] = pulses(p.t0, p);
    EXPECT_NEAR(b1, 15.0, 1e-14);
    // g2 acts first: tan(theta) = g1/g2 grows with t
    EXPECT_LT(theta_of_t(-2.0, p), theta_of_t(2.0, p));
}

TEST(Pulses, RatesMatchFiniteDifference) {
    const PulseParams p;
    for (double t : {-1.3, 0.2, 2.7}) {
        const double h = 1e-6;
        const auto [u1, u2] = pulses(t + h, p);
        const auto [d1, d2] = pulses(t - h, p);
        const auto [r1, r2] = pulse_rates(t, p);
        EXPECT_NEAR(r1, (u1 - d1) / (2 * h), 1e-6);
        EXPECT_NEAR(r2, (u2 - d2) / (2 * h), 1e-6);
    }
}

TEST(MixingAngle, MatchesDirectRatioAndInverts) {
    const PulseParams p;
    for (double t : {-4.0, -1.0, 0.0, 0.67, 3.0, 6.5}) {
        const auto [g1, g2] = pulses(t, p);
        EXPECT_NEAR(theta_of_t(t, p), std::atan2(g1, g2), 1e-12);
        EXPECT_NEAR(t_of_theta(theta_of_t(t, p), p), t, 1e-9);
    }
}

TEST(MixingAngle, TailsStayFinite) {
    const PulseParams p;
    EXPECT_NEAR(theta_of_t(-40.0, p), 0.0, 1e-30);
    EXPECT_NEAR(theta_of_t(40.0, p), std::numbers::pi / 2, 1e-12);
}

TEST(MixingAngle, ZeroDelayRejected) {
    PulseParams p;
    p.t0 = 0.0;
    EXPECT_THROW(t_of_theta(0.3, p), DegenerateDelay);
}

TEST(MixingAngle, RateMatchesFiniteDifference) {
    const PulseParams p;
    for (double t : {-2.0, 0.5, 3.0}) {
        const double h = 1e-6;
        EXPECT_NEAR(dtheta_dt(t, p), (theta_of_t(t + h, p) - theta_of_t(t - h, p)) / (2 * h), 1e-7);
    }
}

TEST(Adiabaticity, WindowHoldsWithDefaults) {
    const PulseParams p;
    for (int k = 0; k <= 200; ++k) {
        const double t = -3.06 + (4.39 + 3.06) * k / 200.0;
        EXPECT_LT(adiabaticity_lhs(t, p), std::exp(-1.0)) << "t = " << t;
    }
    EXPECT_GT(adiabaticity_lhs(6.0, p), std::exp(-1.0));
}

TEST(Adiabaticity, UnderflowIsInfinite) {
    EXPECT_TRUE(std::isinf(adiabaticity_lhs(200.0, PulseParams{})));
}

TEST(DressedStates, EigenvectorsOfUnitHamiltonian) {
    for (double th : {0.1, 0.7, 1.3}) {
        const auto ces = closed_eigensystem(th);
        const Eigen::Matrix3d H = build_hamiltonian(std::sin(th), std::cos(th)).real();
        for (int n = 0; n < 3; ++n) {
            EXPECT_LT((H * ces.states[n] - ces.energies[n] * ces.states[n]).norm(), 1e-14);
            EXPECT_NEAR(ces.states[n].norm(), 1.0, 1e-14);
        }
    }
}

TEST(DressedStates, DarkStateHasNoExcitedComponent) {
    const auto ces = closed_eigensystem(0.4);
    EXPECT_EQ(ces.state(Dressed::Zero)(2), 0.0);
}

// real dressed states carry no closed-system Berry connection
TEST(DressedStates, BerryIntegrandVanishes) {
    for (double th : {0.2, 0.9, 1.4})
        for (auto n : {Dressed::Zero, Dressed::Plus, Dressed::Minus}) EXPECT_NEAR(std::abs(closed_berry_integrand(n, th)), 0.0, 1e-15);
}
