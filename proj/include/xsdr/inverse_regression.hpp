#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "xsdr/core.hpp"
#include "xsdr/errors.hpp"
#include "xsdr/expectile.hpp"
#include "xsdr/rng.hpp"

namespace xsdr {

enum class Method { SIR, SAVE, DR };
enum class Flavor { Classical, Projective, PooledMarginal };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::SIR: return "sir";
        case Method::SAVE: return "save";
        default: return "dr";
    }
}

inline std::string flavor_prefix(Flavor f) {
    switch (f) {
        case Flavor::Classical: return "";
        case Flavor::Projective: return "ea-";
        default: return "mea-";
    }
}

struct SliceAssignment {
    int H = 1;
    Eigen::VectorXi labels;  // 1-based slice index per observation
    VectorXd proportions;
    VectorXd boundaries;  // H-1 interior cut values
};

// Equal-count slicing of the order statistics of v: sizes differ by at most
// one, larger slices first, ties broken by original index.
inline SliceAssignment slice_equal_count(const Eigen::Ref<const VectorXd>& v, int H) {
    const Index n = v.size();
    if (H < 1) throw InvalidOptions("slice_equal_count: H >= 1 required");
    if (H > n) throw TooManySlices();
    if (!v.allFinite()) throw NonFiniteInput();
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return v(a) < v(b) || (v(a) == v(b) && a < b);
    });
    SliceAssignment s;
    s.H = H;
    s.labels.resize(n);
    s.proportions.resize(H);
    s.boundaries.resize(H - 1);
    const Index base = n / H, extra = n % H;
    Index pos = 0;
    for (int h = 0; h < H; ++h) {
        const Index count = base + (h < extra ? 1 : 0);
        for (Index i = 0; i < count; ++i) s.labels(order[pos + i]) = h + 1;
        s.proportions(h) = static_cast<double>(count) / static_cast<double>(n);
        pos += count;
        if (h < H - 1) s.boundaries(h) = v(order[pos]);
    }
    return s;
}

struct SliceMoments {
    VectorXd proportions;               // p_h
    MatrixXd means;                     // H x p, row h = mu_h
    std::vector<MatrixXd> second_centrals;  // V_h = within-slice E[ZZ^T] - I
};

inline SliceMoments slice_moments(const Eigen::Ref<const MatrixXd>& Z,
                                  const SliceAssignment& slices) {
    const Index n = Z.rows(), p = Z.cols();
    const int H = slices.H;
    SliceMoments m;
    m.proportions.setZero(H);
    m.means.setZero(H, p);
    m.second_centrals.assign(H, MatrixXd::Zero(p, p));
    std::vector<Index> counts(H, 0);
    for (Index i = 0; i < n; ++i) {
        const int h = slices.labels(i) - 1;
        ++counts[h];
        m.means.row(h) += Z.row(i);
        m.second_centrals[h].noalias() += Z.row(i).transpose() * Z.row(i);
    }
    for (int h = 0; h < H; ++h) {
        if (counts[h] == 0) throw EmptySlice();
        const double nh = static_cast<double>(counts[h]);
        m.proportions(h) = nh / static_cast<double>(n);
        m.means.row(h) /= nh;
        m.second_centrals[h] /= nh;
        m.second_centrals[h] -= MatrixXd::Identity(p, p);
    }
    return m;
}

struct CandidateMatrix {
    MatrixXd matrix;  // p x p symmetric PSD, Z-scale
    Method method = Method::SIR;
    int H = 0;
    int N = 1;  // projections averaged
    std::string response;
};

// M = sum_h p_h mu_h mu_h^T
inline CandidateMatrix sir_matrix(const SliceMoments& m) {
    const Index p = m.means.cols();
    CandidateMatrix c;
    c.method = Method::SIR;
    c.H = static_cast<int>(m.proportions.size());
    c.matrix = m.means.transpose() * m.proportions.asDiagonal() * m.means;
    c.matrix = (0.5 * (c.matrix + c.matrix.transpose())).eval();
    (void)p;
    return c;
}

// G = sum_h p_h (V_h - mu_h mu_h^T)^2
inline CandidateMatrix save_matrix(const SliceMoments& m) {
    const Index p = m.means.cols();
    CandidateMatrix c;
    c.method = Method::SAVE;
    c.H = static_cast<int>(m.proportions.size());
    c.matrix = MatrixXd::Zero(p, p);
    for (int h = 0; h < c.H; ++h) {
        MatrixXd bracket = m.second_centrals[h] - m.means.row(h).transpose() * m.means.row(h);
        c.matrix.noalias() += m.proportions(h) * bracket * bracket;
    }
    c.matrix = (0.5 * (c.matrix + c.matrix.transpose())).eval();
    return c;
}

// F = 2 sum_h p_h V_h V_h + 2 (sum_h p_h mu_h mu_h^T)^2
//   + 2 (sum_h p_h mu_h^T mu_h) (sum_h p_h mu_h mu_h^T)
inline CandidateMatrix dr_matrix(const SliceMoments& m) {
    const Index p = m.means.cols();
    CandidateMatrix c;
    c.method = Method::DR;
    c.H = static_cast<int>(m.proportions.size());
    MatrixXd term1 = MatrixXd::Zero(p, p);
    double mean_sq = 0.0;
    for (int h = 0; h < c.H; ++h) {
        term1.noalias() += m.proportions(h) * m.second_centrals[h] * m.second_centrals[h];
        mean_sq += m.proportions(h) * m.means.row(h).squaredNorm();
    }
    MatrixXd meanOuter = m.means.transpose() * m.proportions.asDiagonal() * m.means;
    c.matrix = 2.0 * term1 + 2.0 * meanOuter * meanOuter + 2.0 * mean_sq * meanOuter;
    c.matrix = (0.5 * (c.matrix + c.matrix.transpose())).eval();
    return c;
}

inline CandidateMatrix candidate_from_moments(Method method, const SliceMoments& m) {
    switch (method) {
        case Method::SIR: return sir_matrix(m);
        case Method::SAVE: return save_matrix(m);
        default: return dr_matrix(m);
    }
}

// Candidate matrix from slicing the scalar variable s against whitened rows Z.
inline CandidateMatrix candidate_for_slicing(const Eigen::Ref<const MatrixXd>& Z,
                                             const Eigen::Ref<const VectorXd>& s, Method method,
                                             int H) {
    SliceAssignment slices = slice_equal_count(s, H);
    return candidate_from_moments(method, slice_moments(Z, slices));
}

// Classical single-response estimator: slice y directly.
inline CandidateMatrix univariate_candidate(const Eigen::Ref<const MatrixXd>& X,
                                            const Eigen::Ref<const VectorXd>& y, Method method,
                                            int H) {
    StandardizedSample s = standardize(X);
    CandidateMatrix c = candidate_for_slicing(s.whitened, y, method, H);
    c.response = "y";
    return c;
}

// Average of per-projection candidates over N unit-sphere draws in R^k.
// Projection j uses substream (seed, j), so the result does not depend on
// evaluation order.
inline CandidateMatrix projective_resampling(const ExpectileMatrix& xi,
                                             const Eigen::Ref<const MatrixXd>& Z, Method method,
                                             int H, int N, std::uint64_t seed) {
    if (N < 1) throw InvalidOptions("projective_resampling: N >= 1 required");
    const Index k = xi.values.cols(), p = Z.cols();
    if (k < 1) throw InvalidOptions("projective_resampling: empty expectile matrix");
    CandidateMatrix out;
    out.method = method;
    out.H = H;
    out.N = N;
    out.response = "xi^T t";
    out.matrix = MatrixXd::Zero(p, p);
    for (int j = 0; j < N; ++j) {
        std::mt19937_64 rng = substream(seed, static_cast<std::uint64_t>(j));
        VectorXd t = sample_unit_sphere(k, rng);
        VectorXd s = xi.values * t;
        out.matrix += candidate_for_slicing(Z, s, method, H).matrix;
    }
    out.matrix /= static_cast<double>(N);
    return out;
}

struct SdrEstimate {
    MatrixXd basis;       // p x d, X-scale
    VectorXd eigenvalues; // length p, descending (singular values for pooled marginal)
    Method method = Method::SIR;
    Flavor flavor = Flavor::Classical;
    int H = 0;
    int N = 1;
    int d = 0;
    bool rank_warning = false;  // fewer than d eigenvalues above 1e-12
};

// Map the d leading eigenvectors of a Z-scale candidate back to X-scale.
inline SdrEstimate estimate_directions(const CandidateMatrix& C,
                                       const Eigen::Ref<const MatrixXd>& whitener, int d) {
    const Index p = C.matrix.rows();
    if (d < 1 || d > p) throw InvalidOptions("estimate_directions: 1 <= d <= p required");
    SymmetricEigen eig = sym_eig(C.matrix);
    SdrEstimate est;
    est.method = C.method;
    est.H = C.H;
    est.N = C.N;
    est.d = d;
    est.eigenvalues = eig.values;
    est.basis = whitener * eig.vectors.leftCols(d);
    est.rank_warning = (eig.values.array() > 1e-12).count() < d;
    return est;
}

// Pooled marginal estimator: concatenate per-level candidates side by side
// and take the d leading left singular vectors.
inline SdrEstimate pooled_marginal(const ExpectileMatrix& xi,
                                   const Eigen::Ref<const MatrixXd>& Z,
                                   const Eigen::Ref<const MatrixXd>& whitener, Method method,
                                   int H, int d) {
    const Index p = Z.cols(), k = xi.values.cols();
    if (d < 1 || d > p) throw InvalidOptions("pooled_marginal: 1 <= d <= p required");
    MatrixXd pooled(p, p * k);
    for (Index l = 0; l < k; ++l)
        pooled.block(0, l * p, p, p) = candidate_for_slicing(Z, xi.values.col(l), method, H).matrix;
    Eigen::JacobiSVD<MatrixXd> svd(pooled, Eigen::ComputeThinU);
    SdrEstimate est;
    est.method = method;
    est.flavor = Flavor::PooledMarginal;
    est.H = H;
    est.N = 1;
    est.d = d;
    est.eigenvalues = svd.singularValues().head(p);
    MatrixXd U = svd.matrixU();
    for (Index j = 0; j < U.cols(); ++j) {  // same sign convention as sym_eig
        Index imax = 0;
        U.col(j).cwiseAbs().maxCoeff(&imax);
        if (U(imax, j) < 0.0) U.col(j) = -U.col(j);
    }
    est.basis = whitener * U.leftCols(d);
    est.rank_warning = (est.eigenvalues.array() > 1e-12).count() < d;
    return est;
}

struct SdrOptions {
    Method method = Method::DR;
    Flavor flavor = Flavor::Projective;
    int H = 5;
    int N = 1000;
    VectorXd levels = default_levels(9);
    double r = 0.0;  // 0 = bandwidth heuristic
    double lambda = 0.1;
    double jitter = 1e-8;
    int d = 2;
    std::uint64_t seed = 0;
    // Recompute the expectile matrix inside permutation replicates instead of
    // reusing the one fitted on the original data (order determination only).
    bool refit_expectiles_in_permutation = false;
};

inline KernelConfig resolve_kernel(const Eigen::Ref<const MatrixXd>& X, const SdrOptions& opt) {
    KernelConfig cfg;
    cfg.r = opt.r > 0.0 ? opt.r : bandwidth_heuristic(X);
    cfg.lambda = opt.lambda;
    cfg.jitter = opt.jitter;
    return cfg;
}

// Z-frame spectrum of the resolved pipeline: eigen pairs of the candidate
// matrix for classical/projective paths, singular pairs of the pooled block
// for the marginal path. Shared by fit_sdr and the permutation test.
inline SymmetricEigen candidate_spectrum(const Eigen::Ref<const MatrixXd>& Z,
                                         const Eigen::Ref<const VectorXd>& y,
                                         const ExpectileMatrix* xi, const SdrOptions& opt) {
    if (opt.flavor == Flavor::Classical) {
        CandidateMatrix c = candidate_for_slicing(Z, y, opt.method, opt.H);
        return sym_eig(c.matrix);
    }
    if (!xi) throw InvalidOptions("expectile-assisted path requires an expectile matrix");
    if (opt.flavor == Flavor::Projective) {
        CandidateMatrix c = projective_resampling(*xi, Z, opt.method, opt.H, opt.N, opt.seed);
        return sym_eig(c.matrix);
    }
    const Index p = Z.cols(), k = xi->values.cols();
    MatrixXd pooled(p, p * k);
    for (Index l = 0; l < k; ++l)
        pooled.block(0, l * p, p, p) =
            candidate_for_slicing(Z, xi->values.col(l), opt.method, opt.H).matrix;
    Eigen::JacobiSVD<MatrixXd> svd(pooled, Eigen::ComputeThinU);
    SymmetricEigen out;
    out.values = svd.singularValues().head(p);
    out.vectors = svd.matrixU();
    for (Index j = 0; j < out.vectors.cols(); ++j) {
        Index imax = 0;
        out.vectors.col(j).cwiseAbs().maxCoeff(&imax);
        if (out.vectors(imax, j) < 0.0) out.vectors.col(j) = -out.vectors.col(j);
    }
    return out;
}

// Full pipeline: standardize, (optionally) fit the expectile matrix, build
// the candidate spectrum, and map the leading directions back to X-scale.
inline SdrEstimate fit_sdr(const Eigen::Ref<const MatrixXd>& X,
                           const Eigen::Ref<const VectorXd>& y, const SdrOptions& opt) {
    if (X.rows() != y.size()) throw InvalidOptions("fit_sdr: X and y size mismatch");
    StandardizedSample s = standardize(X);
    ExpectileMatrix xi;
    const bool assisted = opt.flavor != Flavor::Classical;
    if (assisted) xi = expectile_matrix(X, y, opt.levels, resolve_kernel(X, opt));
    SymmetricEigen spec = candidate_spectrum(s.whitened, y, assisted ? &xi : nullptr, opt);
    SdrEstimate est;
    est.method = opt.method;
    est.flavor = opt.flavor;
    est.H = opt.H;
    est.N = opt.flavor == Flavor::Projective ? opt.N : 1;
    est.d = opt.d;
    est.eigenvalues = spec.values;
    est.basis = s.whitener * spec.vectors.leftCols(opt.d);
    est.rank_warning = (spec.values.array() > 1e-12).count() < opt.d;
    return est;
}

}  // namespace xsdr
