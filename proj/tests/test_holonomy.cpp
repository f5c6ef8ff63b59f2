#include "openphase/holonomy.hpp"

#include <gtest/gtest.h>

using namespace openphase;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::map<int, PhaseResult>& emission_2to1() {
    static const auto res = geometric_phases(PulseParams{}, {0.5, 1.0, 0.0, 0.0});
    return res;
}

}  // namespace

TEST(Labels, ClosedLimitValuesAreEnergyDifferences) {
    EXPECT_EQ(closed_limit_value(1, 3.0), cd(0.0, 6.0));
    EXPECT_EQ(closed_limit_value(4, 3.0), cd(0.0, 0.0));
    EXPECT_EQ(closed_limit_value(9, 3.0), cd(0.0, -6.0));
}

// |m><n| is an eigenvector of -i[H, .] with eigenvalue i(E_n - E_m)
TEST(Labels, ClosedLimitFormsAreEigenvectors) {
    const double th = 0.6, G = 4.0;
    const Mat9 L = build_superoperator(G * std::sin(th), G * std::cos(th), {});
    for (int l = 1; l <= 9; ++l) {
        const auto v = closed_limit_form(l, th, std::numbers::pi / 4);
        EXPECT_LT((L.cast<cd>() * v - closed_limit_value(l, G) * v).norm(), 1e-13) << "label " << l;
    }
}

TEST(Loop, StartsAndEndsAtTheSameField) {
    const PhaseLoop loop(PulseParams{}, {0.5, 1.0, 0.0, 0.0}, GridSpec{}, LoopOptions{});
    const auto [a1, a2] = loop.field(0.0);
    const auto [b1, b2] = loop.field(4.0);
    EXPECT_NEAR(a1, b1, 1e-9 * std::hypot(a1, a2));
    EXPECT_NEAR(a2, b2, 1e-9 * std::hypot(a1, a2));
    EXPECT_GT(loop.t_end(), loop.t_start());
}

TEST(Loop, FieldRateMatchesFiniteDifference) {
    const PhaseLoop loop(PulseParams{}, {0.5, 1.0, 0.0, 0.0}, GridSpec{}, LoopOptions{});
    for (double s : {0.3, 1.4, 2.6, 3.5}) {
        const double h = 1e-6;
        const auto [u1, u2] = loop.field(s + h);
        const auto [d1, d2] = loop.field(s - h);
        const auto [r1, r2] = loop.field_rate(s);
        EXPECT_NEAR(r1, (u1 - d1) / (2 * h), 1e-5 * (1 + std::abs(r1)));
        EXPECT_NEAR(r2, (u2 - d2) / (2 * h), 1e-5 * (1 + std::abs(r2)));
    }
}

TEST(Loop, RatesAboveThePulsesRejected) {
    EXPECT_THROW(PhaseLoop(PulseParams{}, {10.0, 10.0, 0.0, 0.0}, GridSpec{}, LoopOptions{}), NumericalError);
}

TEST(Tracking, EmissionPairsFormBands) {
    const PulseParams p;
    const DecayRates r{0.5, 1.0, 0.0, 0.0};
    const PhaseLoop loop(p, r, GridSpec{}, LoopOptions{});
    const auto tl = track_eigenpaths(loop, p, r);
    const std::vector<std::vector<int>> expect{{1}, {2, 3}, {4}, {5}, {6}, {7, 8}, {9}};
    EXPECT_EQ(tl.bands, expect);
    EXPECT_GT(tl.diagnostics.minContinuity, 0.9);
    EXPECT_THROW(track_eigenpaths(loop, p, r, LoopOptions{}, false), DegenerateRegime);
}

TEST(Phases, MirrorLabelsAreConjugateNegatives) {
    const auto& res = emission_2to1();
    const cd b1 = res.at(1).beta, b9 = res.at(9).beta;
    EXPECT_NEAR(std::abs(b9 + std::conj(b1)), 0.0, 1e-9);
}

TEST(Phases, StationaryStateHasNoPhase) {
    EXPECT_NEAR(std::abs(emission_2to1().at(4).beta), 0.0, 1e-9);
}

TEST(Phases, UnequalEmissionGivesPhase) {
    EXPECT_GT(std::abs(emission_2to1().at(1).beta.real()), 1e-3 * kTwoPi);
}

// rotation symmetry in the ground-state plane cancels the phase at equal rates
TEST(Phases, EqualEmissionGivesNone) {
    const auto res = geometric_phases(PulseParams{}, {1.0, 1.0, 0.0, 0.0});
    for (const auto& [l, r] : res) EXPECT_NEAR(std::abs(r.beta), 0.0, 1e-6) << "label " << l;
}

TEST(Phases, VanishInClosedLimit) {
    const auto res = geometric_phases(PulseParams{}, {0.5e-6, 1e-6, 0.0, 0.0});
    for (const auto& [l, r] : res) EXPECT_LT(std::abs(r.beta), 1e-6) << "label " << l;
}

TEST(Phases, ConvergeWithGrid) {
    GridSpec coarse;
    coarse.N = 1000;
    const cd a = emission_2to1().at(1).beta;
    const cd b = geometric_phase(PulseParams{}, {0.5, 1.0, 0.0, 0.0}, 1, coarse).beta;
    EXPECT_LT(std::abs(a - b), 1e-3 * std::abs(a));
}

TEST(Phases, ClosingRadiusDoesNotMatter) {
    LoopOptions far;
    far.referenceFactor = 400;
    const cd a = emission_2to1().at(1).beta;
    const cd b = geometric_phase(PulseParams{}, {0.5, 1.0, 0.0, 0.0}, 1, GridSpec{}, far).beta;
    EXPECT_LT(std::abs(a - b), 1e-2 * std::abs(a));
}

TEST(Phases, ReportsDiagnostics) {
    const auto& r = emission_2to1().at(2);
    EXPECT_EQ(r.bandSize, 2);
    EXPECT_EQ(r.gridPoints, 2000);
    EXPECT_LT(r.windowStart, r.windowEnd);
}

TEST(Phases, LabelOutOfRange) {
    EXPECT_THROW(geometric_phase(PulseParams{}, {0.5, 1.0, 0.0, 0.0}, 10), std::invalid_argument);
}

TEST(Sweep, OrderIndependentOfThreads) {
    const std::vector<DecayRates> sched{{0.2, 0.4, 0, 0}, {0.4, 0.2, 0, 0}, {0.0, 0.0, 0.6, 0.3}};
    const auto one = phase_sweep(sched, PulseParams{}, {1, 9}, GridSpec{}, LoopOptions{}, 1);
    const auto three = phase_sweep(sched, PulseParams{}, {1, 9}, GridSpec{}, LoopOptions{}, 3);
    ASSERT_EQ(one.size(), 6u);
    ASSERT_EQ(three.size(), 6u);
    for (size_t i = 0; i < one.size(); ++i) {
        EXPECT_EQ(one[i].scheduleIndex, three[i].scheduleIndex);
        EXPECT_EQ(one[i].result.label, three[i].result.label);
        EXPECT_EQ(one[i].result.beta, three[i].result.beta);
    }
}

TEST(Sweep, ErrorsNameTheEntry) {
    const std::vector<DecayRates> sched{{0.2, 0.4, 0, 0}, {10.0, 10.0, 0, 0}};
    try {
        phase_sweep(sched, PulseParams{}, {1}, GridSpec{}, LoopOptions{}, 1);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("schedule entry 1"), std::string::npos);
    }
}
