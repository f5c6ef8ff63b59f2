#pragma once

#include "openphase/matops.hpp"

#include <array>
#include <cmath>

namespace openphase {

using Mat3 = Eigen::Matrix3cd;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

/// Lindblad amplitudes: gamma13, gamma23 for emission out of |3>, gamma12, gamma21 for collisions.
struct DecayRates {
    double gamma13 = 0.0;
    double gamma23 = 0.0;
    double gamma12 = 0.0;
    double gamma21 = 0.0;

    void validate() const {
        for (double g : {gamma13, gamma23, gamma12, gamma21})
            if (!(std::isfinite(g) && g >= 0.0)) throw std::invalid_argument("decay amplitudes must be finite and nonnegative");
    }
    double total() const { return gamma13 * gamma13 + gamma23 * gamma23 + gamma12 * gamma12 + gamma21 * gamma21; }
    DecayRates scaled(double s) const { return {s * gamma13, s * gamma23, s * gamma12, s * gamma21}; }
};

struct RateCombos {
    double gammaPlus, gammaMinus, gammaPrimePlus, gammaPrimeMinus;
};

inline RateCombos rate_combos(const DecayRates& r) {
    const double a = r.gamma13 * r.gamma13, b = r.gamma23 * r.gamma23;
    const double c = r.gamma12 * r.gamma12, d = r.gamma21 * r.gamma21;
    return {(a + b) / 2.0, a - b, c + d, c - d};
}

/// Gell-Mann generators in the order 12s, 12a, z, 13s, 13a, 23s, 23a, 8.
inline const std::array<Mat3, 8>& gell_mann() {
    static const std::array<Mat3, 8> basis = [] {
        const cd I(0.0, 1.0);
        std::array<Mat3, 8> g;
        for (auto& m : g) m.setZero();
        g[0](0, 1) = g[0](1, 0) = 1.0;
        g[1](0, 1) = -I;
        g[1](1, 0) = I;
        g[2](0, 0) = 1.0;
        g[2](1, 1) = -1.0;
        g[3](0, 2) = g[3](2, 0) = 1.0;
        g[4](0, 2) = -I;
        g[4](2, 0) = I;
        g[5](1, 2) = g[5](2, 1) = 1.0;
        g[6](1, 2) = -I;
        g[6](2, 1) = I;
        const double s = 1.0 / std::sqrt(3.0);
        g[7](0, 0) = g[7](1, 1) = s;
        g[7](2, 2) = -2.0 * s;
        return g;
    }();
    return basis;
}

/// Components (Tr rho / 3, Tr(l_a rho) / 2); complex for non-Hermitian operators.
inline Eigen::Matrix<cd, 9, 1> operator_to_coherence(const Mat3& X) {
    Eigen::Matrix<cd, 9, 1> v;
    v(0) = X.trace() / 3.0;
    const auto& g = gell_mann();
    for (int a = 0; a < 8; ++a) v(a + 1) = (g[a] * X).trace() / 2.0;
    return v;
}

inline Mat3 coherence_to_operator(const Eigen::Matrix<cd, 9, 1>& v) {
    Mat3 X = v(0) * Mat3::Identity();
    const auto& g = gell_mann();
    for (int a = 0; a < 8; ++a) X += v(a + 1) * g[a];
    return X;
}

struct NotAState : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline Vec9 density_to_coherence(const Mat3& rho) {
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw NotAState("density matrix not Hermitian");
    if (std::abs(rho.trace() - 1.0) > 1e-12) throw NotAState("density matrix trace differs from 1");
    return operator_to_coherence(rho).real();
}

inline Mat3 coherence_to_density(const Vec9& v) {
    return coherence_to_operator(v.cast<cd>());
}

inline Mat3 build_hamiltonian(double g1, double g2) {
    Mat3 H = Mat3::Zero();
    H(0, 2) = H(2, 0) = g1;
    H(1, 2) = H(2, 1) = g2;
    return H;
}

inline std::array<Mat3, 4> jump_operators(const DecayRates& r) {
    std::array<Mat3, 4> J;
    for (auto& m : J) m.setZero();
    J[0](0, 2) = r.gamma13;
    J[1](1, 2) = r.gamma23;
    J[2](0, 1) = r.gamma12;
    J[3](1, 0) = r.gamma21;
    return J;
}

/// Right-hand side of the master equation.
inline Mat3 lindblad_rhs(const Mat3& H, const std::array<Mat3, 4>& jumps, const Mat3& rho) {
    const cd I(0.0, 1.0);
    Mat3 out = -I * (H * rho - rho * H);
    for (const auto& G : jumps) {
        const Mat3 GdG = G.adjoint() * G;
        out += G * rho * G.adjoint() - 0.5 * (GdG * rho + rho * GdG);
    }
    return out;
}

/// Superoperator on column-stacked vec(rho).
inline CMat lindblad_vectorized(const Mat3& H, const std::array<Mat3, 4>& jumps) {
    CMat L(9, 9);
    for (int j = 0; j < 9; ++j) {
        Mat3 E = Mat3::Zero();
        E(j % 3, j / 3) = 1.0;
        const Mat3 out = lindblad_rhs(H, jumps, E);
        for (int i = 0; i < 9; ++i) L(i, j) = out(i % 3, i / 3);
    }
    return L;
}

/// T with coherence = T * vec(rho) (column stacking).
inline CMat coherence_transform() {
    CMat T(9, 9);
    for (int j = 0; j < 9; ++j) {
        Mat3 E = Mat3::Zero();
        E(j % 3, j / 3) = 1.0;
        T.col(j) = operator_to_coherence(E);
    }
    return T;
}

/// 9x9 Liouvillian in the coherence-vector basis, built from the master equation.
inline Mat9 build_superoperator(double g1, double g2, const DecayRates& rates) {
    rates.validate();
    const Mat3 H = build_hamiltonian(g1, g2);
    const auto jumps = jump_operators(rates);
    const auto& g = gell_mann();
    Mat9 L;
    for (int j = 0; j < 9; ++j) {
        const Mat3 B = j == 0 ? Mat3(Mat3::Identity()) : g[j - 1];
        L.col(j) = operator_to_coherence(lindblad_rhs(H, jumps, B)).real();
    }
    return L;
}

/// The closed-form matrix as printed with the model, entries in the rate combinations.
inline Mat9 printed_superoperator(double g1, double g2, const DecayRates& r) {
    const RateCombos c = rate_combos(r);
    const double s3 = std::sqrt(3.0);
    const double d12 = r.gamma12 * r.gamma12 / 2.0, d21 = r.gamma21 * r.gamma21 / 2.0;
    Mat9 L = Mat9::Zero();
    L(1, 1) = -c.gammaPrimePlus;
    L(1, 5) = g2;
    L(1, 7) = g1;
    L(2, 2) = -c.gammaPrimePlus;
    L(2, 4) = -g2;
    L(2, 6) = g1;
    L(3, 0) = c.gammaMinus / 2.0 + c.gammaPrimeMinus;
    L(3, 3) = -2.0 * c.gammaPrimePlus;
    L(3, 5) = g1;
    L(3, 7) = -g2;
    L(3, 8) = -(c.gammaMinus - c.gammaPrimeMinus) / s3;
    L(4, 2) = g2;
    L(4, 4) = -c.gammaPlus - d21;
    L(5, 1) = -g2;
    L(5, 3) = -g1;
    L(5, 5) = -c.gammaPlus - d12;
    L(5, 8) = -s3 * g1;
    L(6, 2) = -g1;
    L(6, 6) = -c.gammaPlus - d21;
    L(7, 1) = -g1;
    L(7, 3) = g2;
    L(7, 7) = -c.gammaPlus - d12;
    L(7, 8) = -s3 * g2;
    L(8, 0) = s3 * c.gammaPlus;
    L(8, 5) = s3 * g1;
    L(8, 7) = s3 * g2;
    L(8, 8) = -2.0 * c.gammaPlus;
    return L;
}

enum class SuperoperatorModel { Lindblad, Printed };

inline Mat9 superoperator(double g1, double g2, const DecayRates& rates, SuperoperatorModel model) {
    return model == SuperoperatorModel::Printed ? printed_superoperator(g1, g2, rates)
                                                : build_superoperator(g1, g2, rates);
}

/// Largest elementwise gap between the master-equation build and the printed form.
inline double fixture_deviation(double g1, double g2, const DecayRates& rates) {
    return (build_superoperator(g1, g2, rates) - printed_superoperator(g1, g2, rates)).cwiseAbs().maxCoeff();
}

/// The g1 and g2 coefficient matrices: L = L0 + g1 * L1 + g2 * L2.
inline std::array<Mat9, 3> superoperator_parts(const DecayRates& rates, SuperoperatorModel model) {
    const Mat9 L0 = superoperator(0.0, 0.0, rates, model);
    return {L0, superoperator(1.0, 0.0, rates, model) - L0, superoperator(0.0, 1.0, rates, model) - L0};
}

}  // namespace openphase
