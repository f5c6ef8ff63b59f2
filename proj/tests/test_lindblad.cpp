#include "openphase/lindblad.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace openphase;

namespace {

Mat3 random_density(std::mt19937& rng) {
    std::normal_distribution<double> d;
    Mat3 A;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) A(i, j) = cd(d(rng), d(rng));
    Mat3 rho = A * A.adjoint();
    return rho / rho.trace();
}

DecayRates random_rates(std::mt19937& rng, bool collisions) {
    std::uniform_real_distribution<double> u(0.0, 2.0);
    return {u(rng), u(rng), collisions ? u(rng) : 0.0, collisions ? u(rng) : 0.0};
}

}  // namespace

TEST(GellMann, TracelessHermitianOrthogonal) {
    const auto& g = gell_mann();
    for (int a = 0; a < 8; ++a) {
        EXPECT_NEAR(std::abs(g[a].trace()), 0.0, 1e-15);
        EXPECT_NEAR((g[a] - g[a].adjoint()).norm(), 0.0, 1e-15);
        for (int b = 0; b < 8; ++b) EXPECT_NEAR(std::abs((g[a] * g[b]).trace() - (a == b ? 2.0 : 0.0)), 0.0, 1e-14);
    }
}

TEST(Coherence, RoundTrip) {
    std::mt19937 rng(1);
    for (int i = 0; i < 10; ++i) {
        const Mat3 rho = random_density(rng);
        EXPECT_LT((coherence_to_density(density_to_coherence(rho)) - rho).norm(), 1e-14);
    }
}

TEST(Coherence, PureGroundState) {
    Mat3 rho = Mat3::Zero();
    rho(0, 0) = 1.0;
    const Vec9 v = density_to_coherence(rho);
    EXPECT_NEAR(v(0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(v(3), 0.5, 1e-15);
    EXPECT_NEAR(v(8), 0.5 / std::sqrt(3.0), 1e-15);
}

TEST(Coherence, RejectsNonStates) {
    Mat3 rho = Mat3::Zero();
    rho(0, 0) = 0.5;
    EXPECT_THROW(density_to_coherence(rho), NotAState);
    rho(0, 0) = 1.0;
    rho(0, 1) = cd(0.0, 0.1);
    EXPECT_THROW(density_to_coherence(rho), NotAState);
}

// the coherence-basis matrix must act like the master equation on every state
TEST(Superoperator, MatchesMasterEquation) {
    std::mt19937 rng(2);
    for (int i = 0; i < 20; ++i) {
        const DecayRates r = random_rates(rng, true);
        const double g1 = 3.0 * (i % 4), g2 = 1.7 * (i % 3);
        const Mat9 L = build_superoperator(g1, g2, r);
        const Mat3 rho = random_density(rng);
        const Mat3 direct = lindblad_rhs(build_hamiltonian(g1, g2), jump_operators(r), rho);
        EXPECT_LT((coherence_to_density(L * density_to_coherence(rho)) - direct).norm(), 1e-12);
    }
}

// same generator reached through the column-stacked representation
TEST(Superoperator, SimilarToVectorizedForm) {
    const DecayRates r{0.4, 1.1, 0.3, 0.8};
    const Mat3 H = build_hamiltonian(2.0, 5.0);
    const CMat T = coherence_transform();
    const CMat viaVec = T * lindblad_vectorized(H, jump_operators(r)) * T.inverse();
    EXPECT_LT((viaVec - build_superoperator(2.0, 5.0, r).cast<cd>()).norm(), 1e-12);
}

TEST(Superoperator, TracePreserving) {
    const Mat9 L = build_superoperator(4.0, 7.0, {1.0, 0.5, 0.2, 0.9});
    EXPECT_NEAR(L.row(0).norm(), 0.0, 1e-15);
}

TEST(Superoperator, ClosedSystemIsAntisymmetric) {
    const Mat9 L = build_superoperator(4.0, 7.0, {});
    EXPECT_LT((L + L.transpose()).norm(), 1e-13);
}

TEST(Superoperator, EmissionOnlyMatchesPrintedForm) {
    std::mt19937 rng(3);
    for (int i = 0; i < 20; ++i) {
        const DecayRates r = random_rates(rng, false);
        EXPECT_LT(fixture_deviation(1.0 + i, 0.5 * i, r), 1e-12);
    }
}

// the printed collisional diagonal differs from the master equation by a factor of two
TEST(Superoperator, PrintedCollisionalEntriesDiffer) {
    const DecayRates r{0.0, 0.0, 1.0, 0.5};
    const Mat9 gen = build_superoperator(0.0, 0.0, r), printed = printed_superoperator(0.0, 0.0, r);
    const double gp = 1.0 + 0.25;
    EXPECT_NEAR(gen(1, 1), -gp / 2.0, 1e-15);
    EXPECT_NEAR(printed(1, 1), -gp, 1e-15);
    EXPECT_GT(fixture_deviation(0.0, 0.0, r), 0.1);
}

TEST(Superoperator, PartsRecombine) {
    const DecayRates r{0.7, 0.2, 0.4, 0.1};
    for (auto model : {SuperoperatorModel::Lindblad, SuperoperatorModel::Printed}) {
        const auto parts = superoperator_parts(r, model);
        EXPECT_LT((parts[0] + 3.0 * parts[1] + 5.0 * parts[2] - superoperator(3.0, 5.0, r, model)).norm(), 1e-13);
    }
}

TEST(Rates, RejectNegative) {
    EXPECT_THROW(build_superoperator(1.0, 1.0, {-0.1, 0.0, 0.0, 0.0}), std::invalid_argument);
}
