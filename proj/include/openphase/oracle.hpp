#pragma once

#include "openphase/holonomy.hpp"
#include "openphase/lindblad.hpp"
#include "openphase/stirap.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace openphase {

struct BranchFailure : NumericalError {
    using NumericalError::NumericalError;
};
struct StepTooCoarse : NumericalError {
    using NumericalError::NumericalError;
};

/// Root choices in P = (x + sqrt(x^2 + (Q/3)^3))^(1/3).
struct CubicBranch {
    int cube = 0;      // multiplies the principal cube root by exp(2 pi i cube / 3)
    int sqrtSign = 1;  // sign of the inner square root
};

struct AnalyticSpectrum {
    cd P, Q, x;
    CubicBranch branch;
    std::array<cd, 9> lambdas;  // index = label - 1
};

inline AnalyticSpectrum analytic_eigenvalues(double g1, double g2, double gamma, CubicBranch br) {
    const double g2sum = g1 * g1 + g2 * g2;
    const double y = gamma * gamma;
    AnalyticSpectrum a;
    a.branch = br;
    a.Q = 4.0 * g2sum - y * y;
    a.x = y * g2sum;
    const cd inner = static_cast<double>(br.sqrtSign) * std::sqrt(a.x * a.x + std::pow(a.Q / 3.0, 3));
    const cd w = std::polar(1.0, 2.0 * std::numbers::pi * br.cube / 3.0);
    a.P = std::pow(a.x + inner, 1.0 / 3.0) * w;
    const cd I(0.0, 1.0);
    const cd P = a.P, Q = a.Q;
    const cd r = std::abs(P) > 0.0 ? Q / (3.0 * P) : cd(0.0);
    const cd re = -y + r / 2.0 - P / 2.0;
    const cd im = std::sqrt(3.0) / 2.0 * (r + P);
    const cd sq = std::sqrt(Q);
    a.lambdas[0] = re + I * im;
    a.lambdas[8] = re - I * im;
    a.lambdas[1] = a.lambdas[2] = 0.5 * (-y + I * sq);
    a.lambdas[6] = a.lambdas[7] = 0.5 * (-y - I * sq);
    a.lambdas[3] = 0.0;
    a.lambdas[4] = -y;
    a.lambdas[5] = -y - r + P;
    return a;
}

/// Largest distance between two multisets after optimal pairing.
inline double multiset_distance(const std::vector<cd>& a, const std::vector<cd>& b) {
    const int n = static_cast<int>(a.size());
    RMat d(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d(i, j) = std::abs(a[i] - b[j]);
    const auto m = optimal_assignment(d);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, d(i, m[i]));
    return worst;
}

inline std::vector<cd> numeric_spectrum(const Mat9& L) {
    const CVec w = Eigen::EigenSolver<RMat>(RMat(L), false).eigenvalues();
    return {w.data(), w.data() + w.size()};
}

/// Branch of the cubic that reproduces the direct spectrum at the calibration point.
inline CubicBranch calibrate_branch(double g1, double g2, double gamma) {
    const auto direct = numeric_spectrum(build_superoperator(g1, g2, {gamma, gamma, 0.0, 0.0}));
    double scale = 1.0;
    for (const auto& v : direct) scale = std::max(scale, std::abs(v));
    CubicBranch best;
    double bestErr = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 3; ++c)
        for (int s : {1, -1}) {
            const auto a = analytic_eigenvalues(g1, g2, gamma, {c, s});
            const double err = multiset_distance({a.lambdas.begin(), a.lambdas.end()}, direct);
            if (err <= 1e-10 * scale) return {c, s};  // first acceptable branch, principal first
            if (err < bestErr) {
                bestErr = err;
                best = {c, s};
            }
        }
    if (bestErr > 1e-6 * scale) throw BranchFailure("no cube-root branch reproduces the direct spectrum");
    return best;
}

inline AnalyticSpectrum analytic_eigenvalues(double g1, double g2, double gamma) {
    return analytic_eigenvalues(g1, g2, gamma, calibrate_branch(g1, g2, gamma));
}

/// i(E_n - E_m) ordered by label.
inline std::array<cd, 9> closed_liouvillian_spectrum(double g1, double g2) {
    std::array<cd, 9> eps;
    const double G = std::hypot(g1, g2);
    for (int l = 1; l <= 9; ++l) eps[l - 1] = closed_limit_value(l, G);
    return eps;
}

struct PropagationResult {
    std::vector<double> times;
    std::vector<Vec9> states;
    std::vector<std::array<double, 3>> populations;
};

inline std::array<double, 3> populations_of(const Vec9& v) {
    const double s3 = std::sqrt(3.0);
    return {v(0) + v(3) + v(8) / s3, v(0) - v(3) + v(8) / s3, v(0) - 2.0 * v(8) / s3};
}

namespace detail {

inline PropagationResult rk4(const Vec9& v0, const PulseParams& p, const DecayRates& rates, double tMin, double tMax,
                             int steps, SuperoperatorModel model, bool record) {
    const auto parts = superoperator_parts(rates, model);
    auto L = [&](double t) {
        const auto [g1, g2] = pulses(t, p);
        return Mat9(parts[0] + g1 * parts[1] + g2 * parts[2]);
    };
    PropagationResult out;
    const double h = (tMax - tMin) / steps;
    Vec9 v = v0;
    auto push = [&](double t) {
        out.times.push_back(t);
        out.states.push_back(v);
        out.populations.push_back(populations_of(v));
    };
    if (record) push(tMin);
    for (int k = 0; k < steps; ++k) {
        const double t = tMin + k * h;
        const Mat9 La = L(t), Lm = L(t + 0.5 * h), Lb = L(t + h);
        const Vec9 k1 = La * v;
        const Vec9 k2 = Lm * (v + 0.5 * h * k1);
        const Vec9 k3 = Lm * (v + 0.5 * h * k2);
        const Vec9 k4 = Lb * (v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (record) push(t + h);
    }
    if (!record) push(tMax);
    return out;
}

}  // namespace detail

/// Fixed-step RK4 integration of dv/dt = L(t) v in the coherence basis.
inline PropagationResult propagate(const Vec9& v0, const PulseParams& p, const DecayRates& rates, double tMin,
                                   double tMax, int steps, SuperoperatorModel model = SuperoperatorModel::Lindblad,
                                   bool checkSteps = true) {
    if (steps < 100) throw std::invalid_argument("propagate needs at least 100 steps");
    if (!(tMin < tMax)) throw std::invalid_argument("propagate interval is empty");
    auto res = detail::rk4(v0, p, rates, tMin, tMax, steps, model, true);
    if (checkSteps) {
        const auto fine = detail::rk4(v0, p, rates, tMin, tMax, 2 * steps, model, false);
        if ((fine.states.back() - res.states.back()).cwiseAbs().maxCoeff() > 1e-6)
            throw StepTooCoarse("doubling the step count moves the final state by more than 1e-6");
    }
    return res;
}

namespace detail {

struct BandPoint {
    EigenSystem sys;
    std::vector<int> members;  // columns of the band at this point
};

// Band projector and its derivative from first-order perturbation theory.
inline std::pair<CMat, CMat> projector_and_rate(const BandPoint& bp, const Mat9& dL) {
    const auto& sys = bp.sys;
    CMat P = CMat::Zero(9, 9), dP = CMat::Zero(9, 9);
    std::vector<char> in(9, 0);
    for (int a : bp.members) in[a] = 1;
    const CMat dLc = dL.cast<cd>();
    for (int a : bp.members) {
        P += sys.rights.col(a) * sys.lefts.row(a);
        for (int b = 0; b < 9; ++b) {
            if (in[b]) continue;
            const cd den = sys.values(a) - sys.values(b);
            const cd ab = (sys.lefts.row(b) * dLc * sys.rights.col(a))(0);
            const cd ba = (sys.lefts.row(a) * dLc * sys.rights.col(b))(0);
            dP += (sys.rights.col(b) * sys.lefts.row(a)) * (ab / den) + (sys.rights.col(a) * sys.lefts.row(b)) * (ba / den);
        }
    }
    return {P, dP};
}

}  // namespace detail

/// Parallel transport of the invariant subspace that starts on the eigenvalues nearest to startValues,
/// integrated by RK4 from the transport generator [P', P] around the loop.
/// Returns the coefficient matrix of the transported basis in the starting eigenbasis;
/// for a single eigenvalue this is p(end)/p(start) = exp(i beta).
inline CMat adiabatic_coefficient(const PhaseLoop& loop, const DecayRates& rates, const std::vector<cd>& startValues,
                                  const LoopOptions& opt = {}, int stepsPerSegment = 4000) {
    const auto parts = superoperator_parts(rates, opt.model);
    auto frame = [&](double s) {
        const auto [g1, g2] = loop.field(s);
        return dual_decompose(RMat(parts[0] + g1 * parts[1] + g2 * parts[2]));
    };
    auto rate = [&](double s) {
        const auto [d1, d2] = loop.field_rate(s);
        return Mat9(d1 * parts[1] + d2 * parts[2]);
    };
    const int m = static_cast<int>(startValues.size());
    detail::BandPoint cur{frame(0.0), {}};
    {
        RMat d(m, 9);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < 9; ++j) d(i, j) = std::abs(startValues[i] - cur.sys.values(j));
        RMat sq = RMat::Constant(9, 9, 0.0);
        sq.topRows(m) = d;
        const auto pick = optimal_assignment(sq);
        for (int i = 0; i < m; ++i) cur.members.push_back(pick[i]);
    }
    const detail::BandPoint first = cur;
    auto advance = [&](const detail::BandPoint& from, double s) {
        detail::BandPoint to{frame(s), {}};
        const RMat C = (from.sys.lefts * to.sys.rights).cwiseAbs();
        const auto next = max_weight_assignment(C);
        for (int a : from.members) to.members.push_back(next[a]);
        return to;
    };
    CMat X(9, m);
    for (int i = 0; i < m; ++i) X.col(i) = first.sys.rights.col(first.members[i]);

    const int steps = 4 * stepsPerSegment;
    const double h = 4.0 / steps;
    auto generator = [&](const detail::BandPoint& bp, double s) {
        auto [P, dP] = detail::projector_and_rate(bp, rate(s));
        return CMat(dP * P - P * dP);
    };
    CMat Ga = generator(cur, 0.0);
    for (int k = 0; k < steps; ++k) {
        const double s = k * h;
        const detail::BandPoint mid = advance(cur, s + 0.5 * h);
        const detail::BandPoint end = advance(mid, s + h);
        const CMat Gm = generator(mid, s + 0.5 * h);
        const CMat Gb = generator(end, s + h);
        const CMat k1 = Ga * X;
        const CMat k2 = Gm * (X + 0.5 * h * k1);
        const CMat k3 = Gm * (X + 0.5 * h * k2);
        const CMat k4 = Gb * (X + h * k3);
        X += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        cur = end;
        Ga = Gb;
    }
    CMat C(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) C(i, j) = (first.sys.lefts.row(first.members[i]) * X.col(j))(0);
    return C;
}

/// exp(i beta) for one label by the transport-ODE route.
inline cd adiabatic_ratio(const PulseParams& p, const DecayRates& rates, int label, const GridSpec& grid = {},
                          const LoopOptions& opt = {}, int stepsPerSegment = 4000) {
    const PhaseLoop loop(p, rates, grid, opt);
    const TrackedLoop tl = track_eigenpaths(loop, p, rates, opt, true);
    for (const auto& band : tl.bands)
        if (std::find(band.begin(), band.end(), label) != band.end() && band.size() > 1)
            throw DegenerateRegime("label shares an invariant subspace; use the band form");
    const cd start = tl.frames[0].sys.values(tl.column[0][label - 1]);
    return adiabatic_coefficient(loop, rates, {start}, opt, stepsPerSegment)(0, 0);
}

}  // namespace openphase
