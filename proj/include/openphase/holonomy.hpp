#pragma once

#include "openphase/lindblad.hpp"
#include "openphase/matops.hpp"
#include "openphase/stirap.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace openphase {

struct DegenerateRegime : NumericalError {
    using NumericalError::NumericalError;
};
struct LostTrack : NumericalError {
    using NumericalError::NumericalError;
};
struct AmbiguousLabel : NumericalError {
    using NumericalError::NumericalError;
};
struct BranchJump : NumericalError {
    using NumericalError::NumericalError;
};

struct GridSpec {
    int N = 2000;
    double tMin = -6.0;
    double tMax = 8.0;

    void validate() const {
        if (N < 2) throw std::invalid_argument("grid needs at least two points");
        if (!(tMin < tMax)) throw std::invalid_argument("grid interval is empty");
    }
    double at(int k) const { return tMin + (tMax - tMin) * k / (N - 1); }
};

struct LoopOptions {
    double kappa = 0.5;             // physical segment keeps G >= kappa * sum of squared amplitudes
    double fieldFloor = 1e-4;       // and G >= fieldFloor * peak G
    double referenceFactor = 100.0; // closing arc radius relative to max(G_peak, sum of squares)
    int closurePoints = 400;        // samples per closing segment
    double clusterTol = 1e-7;       // eigenvalue coincidence, relative to ||L||
    double continuityFloor = 0.5;
    int maxRefine = 8;              // bisection depth when consecutive frames lose overlap
    int homotopySteps = 16;
    SuperoperatorModel model = SuperoperatorModel::Lindblad;
};

/// Closed loop in the (g1, g2) plane, parametrised by s in [0, 4]:
/// [0,1] ray from the reference radius down to the dressed-segment start,
/// [1,2] the pulse path, [2,3] ray back up, [3,4] arc at the reference radius.
class PhaseLoop {
public:
    PhaseLoop(const PulseParams& p, const DecayRates& rates, const GridSpec& grid, const LoopOptions& opt)
        : pulse_(p) {
        p.validate();
        rates.validate();
        grid.validate();
        double peak = 0.0;
        for (int k = 0; k < grid.N; ++k) {
            const auto [g1, g2] = pulses(grid.at(k), p);
            peak = std::max(peak, std::hypot(g1, g2));
        }
        const double floor = std::max({opt.kappa * rates.total(), opt.fieldFloor * peak, 1e-300});
        int a = -1, b = -1;
        for (int k = 0; k < grid.N; ++k) {
            const auto [g1, g2] = pulses(grid.at(k), p);
            if (std::hypot(g1, g2) >= floor) {
                if (a < 0) a = k;
                b = k;
            }
        }
        if (a < 0 || b <= a) throw NumericalError("decay rates exceed the pulse strength everywhere on the grid");
        ta_ = grid.at(a);
        tb_ = grid.at(b);
        for (int k = a; k <= b; ++k) physical_.push_back(grid.at(k));
        thetaA_ = theta_of_t(ta_, p);
        thetaB_ = theta_of_t(tb_, p);
        const auto [a1, a2] = pulses(ta_, p);
        const auto [b1, b2] = pulses(tb_, p);
        Ga_ = std::hypot(a1, a2);
        Gb_ = std::hypot(b1, b2);
        Gref_ = opt.referenceFactor * std::max(peak, rates.total());
        const int M = std::max(opt.closurePoints, 2);
        for (int j = 0; j < M; ++j) samples_.push_back(static_cast<double>(j) / M);
        for (double t : physical_) samples_.push_back(1.0 + (t - ta_) / (tb_ - ta_));
        for (int j = 1; j < M; ++j) samples_.push_back(2.0 + static_cast<double>(j) / M);
        for (int j = 0; j <= M; ++j) samples_.push_back(3.0 + static_cast<double>(j) / M);
    }

    std::pair<double, double> field(double s) const {
        if (s <= 1.0) return polar(thetaA_, std::exp(std::log(Gref_) + s * (std::log(Ga_) - std::log(Gref_))));
        if (s <= 2.0) {
            if (s == 1.0) return pulses(ta_, pulse_);
            if (s == 2.0) return pulses(tb_, pulse_);
            return pulses(ta_ + (s - 1.0) * (tb_ - ta_), pulse_);
        }
        if (s <= 3.0) return polar(thetaB_, std::exp(std::log(Gb_) + (s - 2.0) * (std::log(Gref_) - std::log(Gb_))));
        return polar(thetaB_ + (s - 3.0) * (thetaA_ - thetaB_), Gref_);
    }

    std::pair<double, double> field_rate(double s) const {
        if (s <= 1.0) {
            const auto [g1, g2] = field(s);
            const double k = std::log(Ga_) - std::log(Gref_);
            return {k * g1, k * g2};
        }
        if (s <= 2.0) {
            const auto [d1, d2] = pulse_rates(ta_ + (s - 1.0) * (tb_ - ta_), pulse_);
            return {d1 * (tb_ - ta_), d2 * (tb_ - ta_)};
        }
        if (s <= 3.0) {
            const auto [g1, g2] = field(s);
            const double k = std::log(Gref_) - std::log(Gb_);
            return {k * g1, k * g2};
        }
        const double th = thetaB_ + (s - 3.0) * (thetaA_ - thetaB_);
        const double k = (thetaA_ - thetaB_) * Gref_;
        return {k * std::cos(th), -k * std::sin(th)};
    }

    const std::vector<double>& samples() const { return samples_; }
    double t_start() const { return ta_; }
    double t_end() const { return tb_; }
    double reference_radius() const { return Gref_; }
    double theta_start() const { return thetaA_; }
    int physical_points() const { return static_cast<int>(physical_.size()); }

private:
    static std::pair<double, double> polar(double theta, double G) { return {G * std::sin(theta), G * std::cos(theta)}; }

    PulseParams pulse_;
    std::vector<double> physical_;
    std::vector<double> samples_;
    double ta_ = 0, tb_ = 0, thetaA_ = 0, thetaB_ = 0, Ga_ = 0, Gb_ = 0, Gref_ = 0;
};

/// Eigen data at one loop sample.
struct LoopFrame {
    double s = 0.0;
    double norm = 0.0;
    EigenSystem sys;
};

/// Closed-limit bookkeeping: label -> (n, m) with eigenvalue i(E_n - E_m).
/// The matching eigenvector of -i[H, .] is |m><n|.
struct LabelInfo {
    int label;
    Dressed n, m;
};

inline const std::array<LabelInfo, 9>& label_table() {
    using D = Dressed;
    static const std::array<LabelInfo, 9> table{{{1, D::Plus, D::Minus},
                                                 {2, D::Plus, D::Zero},
                                                 {3, D::Zero, D::Minus},
                                                 {4, D::Zero, D::Zero},
                                                 {5, D::Plus, D::Plus},
                                                 {6, D::Minus, D::Minus},
                                                 {7, D::Zero, D::Plus},
                                                 {8, D::Minus, D::Zero},
                                                 {9, D::Minus, D::Plus}}};
    return table;
}

inline double dressed_energy(Dressed n) {
    return n == Dressed::Plus ? 1.0 : (n == Dressed::Minus ? -1.0 : 0.0);
}

/// i(E_n - E_m) for each label at field strength G.
inline cd closed_limit_value(int label, double G) {
    const auto& li = label_table()[label - 1];
    return cd(0.0, G * (dressed_energy(li.n) - dressed_energy(li.m)));
}

/// Coherence vector of |m><n| at angle theta.
inline Eigen::Matrix<cd, 9, 1> closed_limit_form(int label, double theta, double phi) {
    const auto& li = label_table()[label - 1];
    const auto ces = closed_eigensystem(theta, phi);
    const Mat3 X = (ces.state(li.m) * ces.state(li.n).transpose()).cast<cd>();
    return operator_to_coherence(X);
}

struct TrackDiagnostics {
    double minContinuity = 1.0;
    double minRelativeGap = std::numeric_limits<double>::infinity();
    int refinements = 0;
    int frames = 0;
};

/// Nine labelled eigenpaths around the loop.
struct TrackedLoop {
    std::vector<LoopFrame> frames;              // last frame repeats the first
    std::vector<std::array<int, 9>> column;     // column[k][label - 1]
    std::vector<std::vector<int>> bands;        // labels that must be transported together
    TrackDiagnostics diagnostics;
    double tStart = 0.0, tEnd = 0.0;
};

namespace detail {

inline LoopFrame make_frame(double s, const PhaseLoop& loop, const std::array<Mat9, 3>& parts, double relTol) {
    const auto [g1, g2] = loop.field(s);
    const Mat9 L = parts[0] + g1 * parts[1] + g2 * parts[2];
    LoopFrame f;
    f.s = s;
    f.norm = L.cwiseAbs().rowwise().sum().maxCoeff();
    f.sys = regularize_clusters(dual_decompose(RMat(L)), L.cast<cd>(), relTol * f.norm);
    return f;
}

inline bool crowded(const CVec& v, int i, double tol) {
    for (Eigen::Index j = 0; j < v.size(); ++j)
        if (j != i && std::abs(v(j) - v(i)) <= tol) return true;
    return false;
}

// Matching between consecutive frames; returns next[col_k] = col_{k+1} and the weakest
// overlap among eigenvalues that are not crowded by a neighbour.
inline std::pair<std::vector<int>, double> link_frames(const LoopFrame& a, const LoopFrame& b, double relTol) {
    const RMat C = (a.sys.lefts * b.sys.rights).cwiseAbs();
    auto next = max_weight_assignment(C);
    double worst = 1.0;
    const double ta = relTol * a.norm, tb = relTol * b.norm;
    for (int i = 0; i < static_cast<int>(next.size()); ++i) {
        if (crowded(a.sys.values, i, ta) || crowded(b.sys.values, next[i], tb)) continue;
        worst = std::min(worst, C(i, next[i]));
    }
    return {next, worst};
}

}  // namespace detail

/// Tracks and labels the nine eigenpaths around the loop.
/// With allowDegenerate = false any persistent eigenvalue coincidence raises DegenerateRegime.
inline TrackedLoop track_eigenpaths(const PhaseLoop& loop, const PulseParams& p, const DecayRates& rates,
                                    const LoopOptions& opt = {}, bool allowDegenerate = true) {
    const auto parts = superoperator_parts(rates, opt.model);
    TrackedLoop out;
    out.tStart = loop.t_start();
    out.tEnd = loop.t_end();

    const auto& S = loop.samples();
    std::vector<LoopFrame> coarse;
    coarse.reserve(S.size());
    for (size_t k = 0; k + 1 < S.size(); ++k) coarse.push_back(detail::make_frame(S[k], loop, parts, opt.clusterTol));
    coarse.push_back(coarse.front());
    coarse.back().s = S.back();

    // link with bisection wherever continuity drops below the floor
    std::vector<LoopFrame>& F = out.frames;
    std::vector<std::vector<int>> links;
    F.push_back(coarse[0]);
    for (size_t k = 0; k + 1 < coarse.size(); ++k) {
        std::vector<LoopFrame> stack{coarse[k + 1]};
        int depth = 0;
        while (!stack.empty()) {
            const LoopFrame& target = stack.back();
            auto [next, worst] = detail::link_frames(F.back(), target, opt.clusterTol);
            if (worst < opt.continuityFloor && depth < opt.maxRefine) {
                const double mid = 0.5 * (F.back().s + target.s);
                stack.push_back(detail::make_frame(mid, loop, parts, opt.clusterTol));
                ++depth;
                ++out.diagnostics.refinements;
                continue;
            }
            if (worst < opt.continuityFloor) throw LostTrack("eigenpath overlap below floor after refinement");
            out.diagnostics.minContinuity = std::min(out.diagnostics.minContinuity, worst);
            links.push_back(next);
            F.push_back(target);
            stack.pop_back();
            depth = std::max(0, depth - 1);
        }
    }
    out.diagnostics.frames = static_cast<int>(F.size());

    // labels at the loop start from a rate homotopy towards the closed limit
    const auto [g1, g2] = loop.field(0.0);
    const double G = std::hypot(g1, g2);
    std::array<int, 9> start{};
    {
        std::vector<int> track(9);
        std::iota(track.begin(), track.end(), 0);
        CVec prev = F[0].sys.values;
        const int steps = std::max(opt.homotopySteps, 1);
        const double sMin = 1e-8;
        for (int j = 1; j <= steps; ++j) {
            const double sc = std::pow(sMin, static_cast<double>(j) / steps);
            const Mat9 L = superoperator(g1, g2, rates.scaled(sc), opt.model);
            const CVec w = Eigen::EigenSolver<RMat>(RMat(L), false).eigenvalues();
            RMat dist(9, 9);
            for (int a = 0; a < 9; ++a)
                for (int b = 0; b < 9; ++b) dist(a, b) = std::abs(prev(a) - w(b));
            const auto m = optimal_assignment(dist);
            CVec moved(9);
            for (int a = 0; a < 9; ++a) moved(a) = w(m[a]);
            prev = moved;
        }
        // closed-limit group for each tracked eigenvalue
        RMat dist(9, 9);
        for (int a = 0; a < 9; ++a)
            for (int l = 1; l <= 9; ++l) dist(a, l - 1) = std::abs(prev(a) - closed_limit_value(l, G));
        const auto toLabel = optimal_assignment(dist);
        for (int a = 0; a < 9; ++a) {
            double own = dist(a, toLabel[a]), other = std::numeric_limits<double>::infinity();
            const cd target = closed_limit_value(toLabel[a] + 1, G);
            for (int l = 1; l <= 9; ++l)
                if (std::abs(closed_limit_value(l, G) - target) > 1e-9 * G) other = std::min(other, dist(a, l - 1));
            if (other < 2.0 * own) throw AmbiguousLabel("closed-limit matching is ambiguous at the loop start");
        }
        // within each closed-limit group, resolve by overlap with |m><n|
        std::map<long, std::vector<int>> groups;  // key: rounded closed-limit value
        for (int a = 0; a < 9; ++a) groups[std::lround(closed_limit_value(toLabel[a] + 1, 1.0).imag())].push_back(a);
        for (auto& [key, members] : groups) {
            std::vector<int> labels;
            for (int a : members) labels.push_back(toLabel[a] + 1);
            std::sort(labels.begin(), labels.end());
            const int n = static_cast<int>(members.size());
            RMat w(n, n);
            for (int i = 0; i < n; ++i) {
                const auto R = closed_limit_form(labels[i], loop.theta_start(), p.phi);
                for (int j = 0; j < n; ++j) {
                    const CVec d = F[0].sys.rights.col(members[j]);
                    w(i, j) = std::abs(R.dot(d)) / (R.norm() * d.norm());
                }
            }
            const auto m = max_weight_assignment(w);
            for (int i = 0; i < n; ++i) start[labels[i] - 1] = members[m[i]];
        }
    }

    out.column.resize(F.size());
    out.column[0] = start;
    for (size_t k = 0; k + 1 < F.size(); ++k)
        for (int l = 0; l < 9; ++l) out.column[k + 1][l] = links[k][out.column[k][l]];

    // bands: persistent coincidences and closure permutations
    std::array<int, 9> parent;
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    auto near = [&](size_t k, int a, int b) {
        const auto& v = F[k].sys.values;
        return std::abs(v(out.column[k][a]) - v(out.column[k][b])) <= opt.clusterTol * F[k].norm;
    };
    for (size_t k = 0; k + 1 < F.size(); ++k)
        for (int a = 0; a < 9; ++a)
            for (int b = a + 1; b < 9; ++b)
                if (near(k, a, b) && near(k + 1, a, b)) parent[find(a)] = find(b);
    for (int l = 0; l < 9; ++l)
        if (out.column.back()[l] != out.column.front()[l]) {
            for (int m = 0; m < 9; ++m)
                if (out.column.front()[m] == out.column.back()[l]) parent[find(l)] = find(m);
        }
    std::map<int, std::vector<int>> byRoot;
    for (int l = 0; l < 9; ++l) byRoot[find(l)].push_back(l + 1);
    for (auto& [r, labels] : byRoot) out.bands.push_back(labels);
    std::sort(out.bands.begin(), out.bands.end());

    for (size_t k = 0; k < F.size(); ++k) {
        const auto& v = F[k].sys.values;
        for (const auto& band : out.bands)
            for (int a : band)
                for (int l = 1; l <= 9; ++l) {
                    if (std::find(band.begin(), band.end(), l) != band.end()) continue;
                    const double gap = std::abs(v(out.column[k][a - 1]) - v(out.column[k][l - 1])) / F[k].norm;
                    out.diagnostics.minRelativeGap = std::min(out.diagnostics.minRelativeGap, gap);
                }
    }

    if (!allowDegenerate)
        for (const auto& band : out.bands)
            if (band.size() > 1) throw DegenerateRegime("eigenvalues coincide along the loop (labels share an invariant subspace)");
    return out;
}

struct PhaseResult {
    int label = 0;
    cd beta = 0.0;  // radians
    int gridPoints = 0;
    double tMin = 0.0, tMax = 0.0;
    double windowStart = 0.0, windowEnd = 0.0;  // dressed segment
    int bandSize = 1;
    double attribution = 1.0;  // weight of the label's closed-limit form in its band eigenvector
    double minContinuity = 1.0;
    double minRelativeGap = 0.0;
    int refinements = 0;
};

/// Transport matrix of a band around the loop (coefficients in the start basis, columns ordered by band).
inline CMat band_holonomy(const TrackedLoop& tl, const std::vector<int>& band) {
    const int m = static_cast<int>(band.size());
    auto cols = [&](size_t k) {
        std::vector<int> c(m);
        for (int i = 0; i < m; ++i) c[i] = tl.column[k][band[i] - 1];
        return c;
    };
    CMat W = CMat::Identity(m, m);
    std::vector<int> c0 = cols(0);
    for (size_t k = 0; k + 1 < tl.frames.size(); ++k) {
        const std::vector<int> c1 = cols(k + 1);
        const auto& A = tl.frames[k].sys;
        const auto& B = tl.frames[k + 1].sys;
        CMat K(m, m), Fw(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                K(i, j) = (B.lefts.row(c1[i]) * A.rights.col(c0[j]))(0);
                Fw(i, j) = (A.lefts.row(c0[i]) * B.rights.col(c1[j]))(0);
            }
        CMat T;
        if (m == 1) {
            // K * F is gauge invariant and close to 1 for a resolved step; the root takes the sign of K
            if (std::abs(std::arg(K(0, 0) * Fw(0, 0))) > std::numbers::pi / 2.0)
                throw BranchJump("single-step transport phase exceeds pi/2");
            cd root = std::sqrt(K(0, 0) / Fw(0, 0));
            if (std::real(root / K(0, 0)) < 0.0) root = -root;
            T = CMat::Constant(1, 1, root);
        } else {
            T = 0.5 * (K + Fw.inverse());
        }
        W = T * W;
        c0 = c1;
    }
    // final frame repeats the first: express the end basis in the start ordering
    const auto first = cols(0);
    CMat P = CMat::Zero(m, m);
    for (int a = 0; a < m; ++a) {
        const int pos = static_cast<int>(std::find(first.begin(), first.end(), c0[a]) - first.begin());
        P(pos, a) = 1.0;
    }
    return P * W;
}

/// Phases of every label; bands contribute the eigenphases of their transport matrix,
/// attributed to labels by overlap with the closed-limit forms at the loop start.
inline std::map<int, PhaseResult> loop_phases(const TrackedLoop& tl, const PhaseLoop& loop, const PulseParams& p,
                                              const GridSpec& grid) {
    std::map<int, PhaseResult> res;
    for (const auto& band : tl.bands) {
        const CMat W = band_holonomy(tl, band);
        const int m = static_cast<int>(band.size());
        std::vector<cd> beta(m);
        std::vector<double> attribution(m, 1.0);
        if (m == 1) {
            beta[0] = -cd(0, 1) * std::log(W(0, 0));
        } else {
            Eigen::ComplexEigenSolver<CMat> es(W);
            const CVec mu = es.eigenvalues();
            // coefficients of the closed-limit forms, projected onto the band, in the tracked start basis
            const auto& sys = tl.frames[0].sys;
            CMat C(m, m);
            for (int i = 0; i < m; ++i) {
                const auto R = closed_limit_form(band[i], loop.theta_start(), p.phi);
                for (int q = 0; q < m; ++q) C(q, i) = (sys.lefts.row(tl.column[0][band[q] - 1]) * R)(0);
            }
            const CMat Y = C.fullPivLu().solve(es.eigenvectors());
            RMat w(m, m);
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i) w(i, j) = std::abs(Y(i, j)) / Y.col(j).norm();
            auto pick = max_weight_assignment(w);
            for (int i = 0; i < m; ++i) attribution[i] = w(i, pick[i]);
            // no preferred form: eigenphases go to labels in order of decreasing argument
            if (*std::min_element(attribution.begin(), attribution.end()) < 1.0 / std::sqrt(double(m)) + 1e-6) {
                std::iota(pick.begin(), pick.end(), 0);
                std::sort(pick.begin(), pick.end(), [&](int a, int b) {
                    return std::arg(mu(a)) > std::arg(mu(b));
                });
            }
            for (int i = 0; i < m; ++i) beta[i] = -cd(0, 1) * std::log(mu(pick[i]));
        }
        for (int i = 0; i < m; ++i) {
            PhaseResult r;
            r.label = band[i];
            r.beta = beta[i];
            r.gridPoints = grid.N;
            r.tMin = grid.tMin;
            r.tMax = grid.tMax;
            r.windowStart = tl.tStart;
            r.windowEnd = tl.tEnd;
            r.bandSize = m;
            r.attribution = attribution[i];
            r.minContinuity = tl.diagnostics.minContinuity;
            r.minRelativeGap = tl.diagnostics.minRelativeGap;
            r.refinements = tl.diagnostics.refinements;
            res[band[i]] = r;
        }
    }
    return res;
}

/// All nine phases for one parameter point.
inline std::map<int, PhaseResult> geometric_phases(const PulseParams& p, const DecayRates& rates, const GridSpec& grid = {},
                                                   const LoopOptions& opt = {}) {
    const PhaseLoop loop(p, rates, grid, opt);
    const TrackedLoop tl = track_eigenpaths(loop, p, rates, opt, true);
    return loop_phases(tl, loop, p, grid);
}

inline PhaseResult geometric_phase(const PulseParams& p, const DecayRates& rates, int label, const GridSpec& grid = {},
                                   const LoopOptions& opt = {}) {
    if (label < 1 || label > 9) throw std::invalid_argument("label must be in 1..9");
    return geometric_phases(p, rates, grid, opt).at(label);
}

struct SweepRow {
    int scheduleIndex = 0;
    DecayRates rates;
    PhaseResult result;
};

/// One row per (schedule entry, label), in input order; entries run on a bounded worker pool.
inline std::vector<SweepRow> phase_sweep(const std::vector<DecayRates>& schedule, const PulseParams& p,
                                         const std::set<int>& labels, const GridSpec& grid = {},
                                         const LoopOptions& opt = {}, unsigned threads = 0) {
    for (int l : labels)
        if (l < 1 || l > 9) throw std::invalid_argument("label must be in 1..9");
    const size_t n = schedule.size();
    std::vector<std::map<int, PhaseResult>> results(n);
    std::vector<std::string> errors(n);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<size_t>(threads, std::max<size_t>(n, 1)));
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i = next++; i < n; i = next++) {
            try {
                results[i] = geometric_phases(p, schedule[i], grid, opt);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    std::vector<SweepRow> rows;
    for (size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) throw NumericalError("schedule entry " + std::to_string(i) + ": " + errors[i]);
        for (int l : labels) rows.push_back({static_cast<int>(i), schedule[i], results[i].at(l)});
    }
    return rows;
}

}  // namespace openphase
