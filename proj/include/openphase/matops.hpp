#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace openphase {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DefectiveMatrix : NumericalError {
    using NumericalError::NumericalError;
};
struct NonFinite : NumericalError {
    using NumericalError::NumericalError;
};
struct NearDegenerate : NumericalError {
    using NumericalError::NumericalError;
};
struct IllConditionedTransform : NumericalError {
    using NumericalError::NumericalError;
};
struct TolClash : NumericalError {
    using NumericalError::NumericalError;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Eigenvalues with paired right columns D and left rows E.
struct EigenSystem {
    CVec values;
    CMat rights;
    CMat lefts;
    double tolerance = 0.0;

    int dim() const { return static_cast<int>(values.size()); }
};

struct JordanBlock {
    cd lambda;
    int size = 1;
};

struct JordanForm {
    CMat transform;
    std::vector<JordanBlock> blocks;
    double clusterTolerance = 0.0;
    double residual = 0.0;   // ||S J S^-1 - M|| / ||M||
    double condition = 1.0;  // 2-norm condition of S

    CMat canonical() const {
        const Eigen::Index n = transform.rows();
        CMat J = CMat::Zero(n, n);
        Eigen::Index at = 0;
        for (const auto& b : blocks) {
            for (int i = 0; i < b.size; ++i) {
                J(at + i, at + i) = b.lambda;
                if (i + 1 < b.size) J(at + i, at + i + 1) = 1.0;
            }
            at += b.size;
        }
        return J;
    }
};

inline double spectral_norm(const CMat& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMat> svd(M);
    return svd.singularValues()(0);
}

inline double condition_number(const CMat& M) {
    Eigen::JacobiSVD<CMat> svd(M);
    const auto& s = svd.singularValues();
    const double lo = s(s.size() - 1);
    return lo > 0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

inline void require_finite(const CMat& M) {
    if (!M.allFinite()) throw NonFinite("matrix has non-finite entries");
}

/// Minimum-cost matching of every row to a distinct column (Hungarian method), rows <= columns.
/// Returns assign[row] = column.
inline std::vector<int> optimal_assignment(const RMat& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    if (n > m) throw std::invalid_argument("optimal_assignment: more rows than columns");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assign(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0) assign[p[j] - 1] = j - 1;
    return assign;
}

inline std::vector<int> max_weight_assignment(const RMat& weight) {
    return optimal_assignment(-weight);
}

/// Groups of indices whose values lie within tol of each other (single linkage).
inline std::vector<std::vector<int>> cluster_values(const CVec& values, double tol) {
    const int n = static_cast<int>(values.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(values(i) - values(j)) <= tol) parent[find(i)] = find(j);
    std::vector<std::vector<int>> groups;
    std::vector<int> slot(n, -1);
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[slot[r]].push_back(i);
    }
    return groups;
}

namespace detail {

inline double residual_right(const CMat& M, cd lambda, const CVec& d) {
    return (M * d - lambda * d).norm() / std::max(d.norm(), 1e-300);
}

inline double residual_left(const CMat& M, cd lambda, const Eigen::RowVectorXcd& e) {
    return (e * M - lambda * e).norm() / std::max(e.norm(), 1e-300);
}

}  // namespace detail

/// Eigenvalues, right vectors from M and left covectors from M^T, paired by eigenvalue.
inline EigenSystem spectral_decompose(const CMat& M, double tol = 1e-10) {
    if (M.rows() != M.cols()) throw std::invalid_argument("spectral_decompose: matrix not square");
    require_finite(M);
    const Eigen::Index n = M.rows();
    Eigen::ComplexEigenSolver<CMat> right(M);
    Eigen::ComplexEigenSolver<CMat> left(CMat(M.transpose()));
    if (right.info() != Eigen::Success || left.info() != Eigen::Success)
        throw NumericalError("spectral_decompose: eigen solver did not converge");

    RMat dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            dist(i, j) = std::abs(right.eigenvalues()(i) - left.eigenvalues()(j));
    const auto pair = optimal_assignment(dist);

    EigenSystem sys;
    sys.tolerance = tol;
    sys.values = right.eigenvalues();
    sys.rights = right.eigenvectors();
    sys.lefts.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sys.rights.col(i).normalize();
        sys.lefts.row(i) = left.eigenvectors().col(pair[i]).transpose().normalized();
    }

    const double scale = std::max(spectral_norm(M), 1e-300);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double rr = detail::residual_right(M, sys.values(i), sys.rights.col(i));
        const double rl = detail::residual_left(M, sys.values(i), sys.lefts.row(i));
        if (rr > tol * scale || rl > tol * scale)
            throw NumericalError("spectral_decompose: eigenpair residual above tolerance");
    }
    Eigen::JacobiSVD<CMat> svd(sys.rights);
    const auto& s = svd.singularValues();
    if (s(n - 1) <= std::sqrt(tol) * s(0))
        throw DefectiveMatrix("spectral_decompose: eigenvectors numerically dependent");
    return sys;
}

/// Scales rights so the largest-magnitude entry is real positive and lefts so E_a D_a = 1.
inline EigenSystem biorthonormalize(EigenSystem sys, double clusterTol = -1.0) {
    const int n = sys.dim();
    if (clusterTol < 0) clusterTol = 1e-7 * std::max(sys.values.cwiseAbs().maxCoeff(), 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(sys.values(i) - sys.values(j)) <= clusterTol)
                throw NearDegenerate("biorthonormalize: eigenvalues closer than cluster tolerance");
    for (int a = 0; a < n; ++a) {
        auto d = sys.rights.col(a);
        Eigen::Index big = 0;
        double mag = -1.0;
        for (Eigen::Index k = 0; k < d.size(); ++k) {
            // strict comparison keeps the lowest index on ties
            if (std::abs(d(k)) > mag * (1.0 + 1e-12)) {
                mag = std::abs(d(k));
                big = k;
            }
        }
        const cd phase = d(big) / std::abs(d(big));
        d /= phase * d.norm();
        const cd ov = (sys.lefts.row(a) * d)(0);
        if (std::abs(ov) < 1e-300) throw NearDegenerate("biorthonormalize: zero left/right overlap");
        sys.lefts.row(a) /= ov;
    }
    return sys;
}

/// Max |E_a D_b - delta_ab| over all pairs.
inline double biorthogonality_error(const EigenSystem& sys) {
    const CMat G = sys.lefts * sys.rights;
    return (G - CMat::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

/// Right vectors with lefts taken as the rows of the inverse; valid across semisimple degeneracy.
inline EigenSystem dual_decompose(const CMat& M) {
    require_finite(M);
    Eigen::ComplexEigenSolver<CMat> es(M);
    if (es.info() != Eigen::Success) throw NumericalError("dual_decompose: eigen solver did not converge");
    EigenSystem sys;
    sys.values = es.eigenvalues();
    sys.rights = es.eigenvectors();
    for (Eigen::Index i = 0; i < sys.rights.cols(); ++i) sys.rights.col(i).normalize();
    Eigen::PartialPivLU<CMat> lu(sys.rights);
    sys.lefts = lu.inverse();
    sys.tolerance = 0.0;
    return sys;
}

/// Real-input variant (uses the real Hessenberg/Schur path, which keeps conjugate symmetry exact).
inline EigenSystem dual_decompose(const RMat& M) {
    if (!M.allFinite()) throw NonFinite("matrix has non-finite entries");
    Eigen::EigenSolver<RMat> es(M);
    if (es.info() != Eigen::Success) return dual_decompose(CMat(M.cast<cd>()));
    EigenSystem sys;
    sys.values = es.eigenvalues();
    sys.rights = es.eigenvectors();
    for (Eigen::Index i = 0; i < sys.rights.cols(); ++i) sys.rights.col(i).normalize();
    Eigen::PartialPivLU<CMat> lu(sys.rights);
    sys.lefts = lu.inverse();
    sys.tolerance = 0.0;
    return sys;
}

/// Replaces the right vectors of each cluster of coincident eigenvalues (within tol) by an orthonormal
/// basis of the numerical null space of M - mean, then refreshes the lefts as the inverse.
/// Solvers return nearly parallel vectors at semisimple degeneracy; this keeps the pairing well conditioned.
inline EigenSystem regularize_clusters(EigenSystem sys, const CMat& M, double tol) {
    bool changed = false;
    for (const auto& c : cluster_values(sys.values, tol)) {
        if (c.size() < 2) continue;
        cd mean = 0.0;
        for (int i : c) mean += sys.values(i);
        mean /= static_cast<double>(c.size());
        const Eigen::Index n = M.rows();
        const Eigen::Index m = static_cast<Eigen::Index>(c.size());
        CMat V(n, m);
        for (Eigen::Index j = 0; j < m; ++j) V.col(j) = sys.rights.col(c[j]).normalized();
        if (Eigen::JacobiSVD<CMat>(V).singularValues()(m - 1) > 0.5) continue;  // solver basis already well spread
        Eigen::JacobiSVD<CMat> svd(M - mean * CMat::Identity(n, n), Eigen::ComputeFullV);
        if (svd.singularValues()(n - m) > tol) continue;  // not semisimple at this tolerance
        for (Eigen::Index j = 0; j < m; ++j) sys.rights.col(c[j]) = svd.matrixV().col(n - m + j);
        changed = true;
    }
    if (changed) sys.lefts = Eigen::PartialPivLU<CMat>(sys.rights).inverse();
    return sys;
}

namespace detail {

// Swap diagonal entries k, k+1 of upper-triangular T, updating the unitary factor U.
inline void schur_swap(CMat& T, CMat& U, Eigen::Index k) {
    const cd t11 = T(k, k);
    const cd t22 = T(k + 1, k + 1);
    Eigen::JacobiRotation<cd> rot;
    rot.makeGivens(T(k, k + 1), t22 - t11);
    T.applyOnTheLeft(k, k + 1, rot.adjoint());
    T.applyOnTheRight(k, k + 1, rot);
    U.applyOnTheRight(k, k + 1, rot);
    T(k + 1, k) = 0.0;
    T(k, k) = t22;
    T(k + 1, k + 1) = t11;
}

inline int numerical_rank(const CMat& A, double threshold) {
    if (A.size() == 0) return 0;
    Eigen::JacobiSVD<CMat> svd(A);
    int r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > threshold) ++r;
    return r;
}

inline CMat null_basis(const CMat& A, double threshold) {
    const Eigen::Index n = A.cols();
    Eigen::JacobiSVD<CMat> svd(A, Eigen::ComputeFullV);
    const int r = numerical_rank(A, threshold);
    return svd.matrixV().rightCols(n - r);
}

// Orthonormal basis of the column span of A, rank decided at threshold.
inline CMat range_basis(const CMat& A, double threshold) {
    if (A.cols() == 0) return CMat(A.rows(), 0);
    Eigen::JacobiSVD<CMat> svd(A, Eigen::ComputeFullU);
    const int r = numerical_rank(A, threshold);
    return svd.matrixU().leftCols(r);
}

// Jordan chains of a nilpotent m x m matrix N. Columns ordered so that N c_j = c_{j-1}.
inline std::pair<CMat, std::vector<int>> nilpotent_chains(const CMat& N, double threshold) {
    const Eigen::Index m = N.rows();
    std::vector<int> nullity{0};
    std::vector<CMat> kernels{CMat(m, 0)};
    CMat power = CMat::Identity(m, m);
    while (nullity.back() < m) {
        power = N * power;
        const double thr = threshold * std::max(1.0, std::pow(N.norm(), nullity.size() - 1.0));
        kernels.push_back(null_basis(power, thr));
        nullity.push_back(static_cast<int>(kernels.back().cols()));
        if (nullity.back() <= nullity[nullity.size() - 2]) {
            // numerical stagnation: treat remaining directions as the top level
            kernels.back() = CMat::Identity(m, m);
            nullity.back() = static_cast<int>(m);
        }
    }
    const int levels = static_cast<int>(nullity.size()) - 1;
    // tops[k] holds chain heads of length k
    std::vector<CMat> tops(levels + 2, CMat(m, 0));
    CMat chosenAtLevel(m, 0);
    CMat columns(m, 0);
    std::vector<int> sizes;
    std::vector<std::pair<CVec, int>> heads;
    for (int k = levels; k >= 1; --k) {
        // vectors at level k already covered by longer chains
        CMat covered(m, 0);
        for (const auto& [v, len] : heads) {
            CVec w = v;
            for (int s = len; s > k; --s) w = N * w;
            covered.conservativeResize(m, covered.cols() + 1);
            covered.col(covered.cols() - 1) = w;
        }
        const int fresh = (nullity[k] - nullity[k - 1]) - static_cast<int>(covered.cols());
        if (fresh <= 0) continue;
        CMat span(m, kernels[k - 1].cols() + covered.cols());
        span << kernels[k - 1], covered;
        const CMat Q = range_basis(span, 1e-10 * std::max(1.0, span.norm()));
        CMat proj = kernels[k] - Q * (Q.adjoint() * kernels[k]);
        Eigen::JacobiSVD<CMat> svd(proj, Eigen::ComputeFullU);
        for (int f = 0; f < fresh && f < svd.matrixU().cols(); ++f)
            heads.emplace_back(svd.matrixU().col(f), k);
    }
    for (const auto& [v, len] : heads) {
        std::vector<CVec> chain(len);
        chain[len - 1] = v;
        for (int s = len - 2; s >= 0; --s) chain[s] = N * chain[s + 1];
        for (const auto& c : chain) {
            columns.conservativeResize(m, columns.cols() + 1);
            columns.col(columns.cols() - 1) = c;
        }
        sizes.push_back(len);
    }
    return {columns, sizes};
}

}  // namespace detail

struct JordanOptions {
    double clusterTol = -1.0;  // absolute; negative selects 1e-7 * ||M||
    double rankTol = 1e-6;     // relative to max(sigma_max(M), sigma_max(M - lambda I))
    double maxCondition = 1e12;
};

/// Numerical Jordan decomposition M = S J S^-1.
inline JordanForm jordan_form(const CMat& M, JordanOptions opt = {}) {
    if (M.rows() != M.cols()) throw std::invalid_argument("jordan_form: matrix not square");
    require_finite(M);
    const Eigen::Index n = M.rows();
    const double norm = spectral_norm(M);
    const double ctol = opt.clusterTol >= 0 ? opt.clusterTol : 1e-7 * std::max(norm, 1e-300);

    Eigen::ComplexSchur<CMat> schur(M);
    if (schur.info() != Eigen::Success) throw NumericalError("jordan_form: Schur decomposition failed");
    const CVec diag = schur.matrixT().diagonal();
    auto clusters = cluster_values(diag, ctol);

    std::vector<cd> centers;
    for (const auto& c : clusters) {
        cd mean = 0.0;
        for (int i : c) mean += diag(i);
        centers.push_back(mean / static_cast<double>(c.size()));
    }
    for (size_t a = 0; a < centers.size(); ++a)
        for (size_t b = a + 1; b < centers.size(); ++b)
            if (std::abs(centers[a] - centers[b]) < 10.0 * ctol)
                throw TolClash("jordan_form: distinct clusters closer than 10x cluster tolerance");

    JordanForm jf;
    jf.clusterTolerance = ctol;
    jf.transform.resize(n, 0);
    for (size_t c = 0; c < clusters.size(); ++c) {
        CMat T = schur.matrixT();
        CMat U = schur.matrixU();
        std::vector<char> member(n, 0);
        for (int i : clusters[c]) member[i] = 1;
        // bubble cluster members to the leading positions
        Eigen::Index filled = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!member[i]) continue;
            for (Eigen::Index k = i; k > filled; --k) {
                detail::schur_swap(T, U, k - 1);
                std::swap(member[k], member[k - 1]);
            }
            ++filled;
        }
        const Eigen::Index m = static_cast<Eigen::Index>(clusters[c].size());
        const cd lam = centers[c];
        const CMat N = T.topLeftCorner(m, m) - lam * CMat::Identity(m, m);
        const double sigma = std::max(spectral_norm(M - lam * CMat::Identity(n, n)), norm);
        auto [chains, sizes] = detail::nilpotent_chains(N, opt.rankTol * std::max(sigma, 1e-300));
        if (chains.cols() != m) throw NumericalError("jordan_form: chain construction lost directions; adjust rankTol");
        const CMat cols = U.leftCols(m) * chains;
        const Eigen::Index at = jf.transform.cols();
        jf.transform.conservativeResize(n, at + cols.cols());
        jf.transform.rightCols(cols.cols()) = cols;
        for (int s : sizes) jf.blocks.push_back({lam, s});
    }
    jf.condition = condition_number(jf.transform);
    if (!(jf.condition <= opt.maxCondition))
        throw IllConditionedTransform("jordan_form: transform condition estimate " + std::to_string(jf.condition));
    const CMat J = jf.canonical();
    const CMat R = jf.transform * J * jf.transform.inverse() - M;
    jf.residual = spectral_norm(R) / std::max(norm, 1e-300);
    return jf;
}

/// Reads "dim" then dim*dim lines of "re im", row-major.
inline CMat read_matrix(std::istream& in) {
    std::string line;
    long dim = -1;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        if (!(ls >> dim) || dim <= 0) throw ParseError("line " + std::to_string(lineNo) + ": expected positive dimension");
        break;
    }
    if (dim <= 0) throw ParseError("empty matrix file");
    CMat M(dim, dim);
    long count = 0;
    while (count < dim * dim && std::getline(in, line)) {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        double re = 0, im = 0;
        std::string extra;
        if (!(ls >> re >> im) || (ls >> extra))
            throw ParseError("line " + std::to_string(lineNo) + ": expected \"re im\"");
        M(count / dim, count % dim) = cd(re, im);
        ++count;
    }
    if (count != dim * dim)
        throw ParseError("expected " + std::to_string(dim * dim) + " entries, found " + std::to_string(count));
    return M;
}

inline CMat read_matrix_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path);
    return read_matrix(f);
}

inline void write_matrix(std::ostream& out, const CMat& M) {
    out << M.rows() << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) out << M(i, j).real() << ' ' << M(i, j).imag() << '\n';
}

}  // namespace openphase
