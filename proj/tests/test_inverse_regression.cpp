#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "xsdr/core.hpp"
#include "xsdr/inverse_regression.hpp"
#include "xsdr/rng.hpp"

using namespace xsdr;

namespace {

MatrixXd random_matrix(Index n, Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    MatrixXd X(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) X(i, j) = gauss(rng);
    return X;
}

// Naive slice-by-slice reimplementation of the three candidate matrices,
// straight from the displayed formulas, independent of SliceMoments.
struct NaiveCandidates {
    MatrixXd M, G, F;
};

NaiveCandidates naive_candidates(const MatrixXd& Z, const Eigen::VectorXi& labels, int H) {
    const Index n = Z.rows(), p = Z.cols();
    NaiveCandidates out{MatrixXd::Zero(p, p), MatrixXd::Zero(p, p), MatrixXd::Zero(p, p)};
    MatrixXd meanOuterSum = MatrixXd::Zero(p, p);
    double meanDotSum = 0.0;
    MatrixXd vvSum = MatrixXd::Zero(p, p);
    for (int h = 1; h <= H; ++h) {
        std::vector<Index> idx;
        for (Index i = 0; i < n; ++i)
            if (labels(i) == h) idx.push_back(i);
        const double ph = static_cast<double>(idx.size()) / n;
        VectorXd mu = VectorXd::Zero(p);
        for (Index i : idx) mu += Z.row(i).transpose();
        mu /= static_cast<double>(idx.size());
        MatrixXd V = MatrixXd::Zero(p, p);
        for (Index i : idx) V += Z.row(i).transpose() * Z.row(i);
        V /= static_cast<double>(idx.size());
        V -= MatrixXd::Identity(p, p);
        out.M += ph * mu * mu.transpose();
        MatrixXd bracket = V - mu * mu.transpose();
        out.G += ph * bracket * bracket;
        vvSum += ph * V * V;
        meanOuterSum += ph * mu * mu.transpose();
        meanDotSum += ph * mu.dot(mu);
    }
    out.F = 2.0 * vvSum + 2.0 * meanOuterSum * meanOuterSum + 2.0 * meanDotSum * meanOuterSum;
    return out;
}

}  // namespace

TEST_CASE("slice_equal_count sizes and ordering") {
    VectorXd v = random_matrix(10, 1, 1).col(0);
    SliceAssignment s = slice_equal_count(v, 5);
    for (int h = 0; h < 5; ++h) CHECK(s.proportions(h) == doctest::Approx(0.2));

    VectorXd v7 = random_matrix(7, 1, 2).col(0);
    SliceAssignment s7 = slice_equal_count(v7, 5);
    CHECK(s7.proportions(0) == doctest::Approx(2.0 / 7.0));
    CHECK(s7.proportions(1) == doctest::Approx(2.0 / 7.0));
    CHECK(s7.proportions(2) == doctest::Approx(1.0 / 7.0));
    CHECK(s7.proportions(4) == doctest::Approx(1.0 / 7.0));
    CHECK(s7.proportions.sum() == doctest::Approx(1.0).epsilon(1e-14));

    VectorXd inc(9);
    for (int i = 0; i < 9; ++i) inc(i) = i;
    SliceAssignment s2 = slice_equal_count(inc, 2);
    for (int i = 0; i < 5; ++i) CHECK(s2.labels(i) == 1);  // first ceil(n/2)
    for (int i = 5; i < 9; ++i) CHECK(s2.labels(i) == 2);

    CHECK_THROWS_AS(slice_equal_count(inc, 10), TooManySlices);
}

TEST_CASE("slice_equal_count is invariant to increasing transforms") {
    VectorXd v = random_matrix(37, 1, 3).col(0);
    VectorXd w = (v.array() * 3.0).exp().matrix();
    SliceAssignment a = slice_equal_count(v, 4), b = slice_equal_count(w, 4);
    CHECK((a.labels - b.labels).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("slice_moments hand-checked on 4 whitened rows") {
    MatrixXd X(4, 2);
    X << -1, 0, 1, 0, 0, -1, 0, 1;
    MatrixXd Z = std::sqrt(2.0) * X;  // whitened version of X
    VectorXd v = Z.col(0);
    SliceAssignment s = slice_equal_count(v, 2);
    SliceMoments m = slice_moments(Z, s);
    const double c = std::sqrt(2.0) / 2.0;
    CHECK(m.proportions(0) == doctest::Approx(0.5));
    CHECK(m.means(0, 0) == doctest::Approx(-c).epsilon(1e-12));
    CHECK(m.means(0, 1) == doctest::Approx(-c).epsilon(1e-12));
    CHECK(m.means(1, 0) == doctest::Approx(c).epsilon(1e-12));
    CHECK(m.means(1, 1) == doctest::Approx(c).epsilon(1e-12));
    CHECK(m.second_centrals[0].norm() < 1e-12);  // avg of ZZ^T is I within slices
    CHECK(m.second_centrals[1].norm() < 1e-12);

    // SIR matrix follows by hand: mu1 = -mu2, so M = mu2 mu2^T.
    CandidateMatrix M = sir_matrix(m);
    MatrixXd expect(2, 2);
    expect << 0.5, 0.5, 0.5, 0.5;
    CHECK((M.matrix - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("slice_moments: single slice and weighted-mean identity") {
    MatrixXd Z = standardize(random_matrix(50, 3, 4)).whitened;
    SliceMoments whole = slice_moments(Z, slice_equal_count(VectorXd::LinSpaced(50, 0, 1), 1));
    CHECK(whole.proportions(0) == doctest::Approx(1.0));
    CHECK(whole.means.row(0).norm() < 1e-10);

    SliceMoments m = slice_moments(Z, slice_equal_count(random_matrix(50, 1, 5).col(0), 7));
    VectorXd weighted = m.means.transpose() * m.proportions;
    CHECK(weighted.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("candidate matrices match the naive oracle entry-wise") {
    MatrixXd Z = standardize(random_matrix(30, 3, 6)).whitened;
    SliceAssignment s = slice_equal_count(random_matrix(30, 1, 7).col(0), 3);
    SliceMoments m = slice_moments(Z, s);
    NaiveCandidates naive = naive_candidates(Z, s.labels, 3);
    CHECK((sir_matrix(m).matrix - naive.M).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((save_matrix(m).matrix - naive.G).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dr_matrix(m).matrix - naive.F).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("candidate matrices: symmetry, PSD, SIR rank bound") {
    for (std::uint64_t seed : {10u, 11u, 12u}) {
        MatrixXd Z = standardize(random_matrix(60, 5, seed)).whitened;
        SliceAssignment s = slice_equal_count(random_matrix(60, 1, seed + 100).col(0), 4);
        SliceMoments m = slice_moments(Z, s);
        for (const CandidateMatrix& c : {sir_matrix(m), save_matrix(m), dr_matrix(m)}) {
            CHECK((c.matrix - c.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-10);
            CHECK(sym_eig(c.matrix).values.minCoeff() >= -1e-8);
        }
        // slice means of a zero-mean sample satisfy one linear constraint
        Eigen::JacobiSVD<MatrixXd> svd(sir_matrix(m).matrix);
        CHECK(svd.singularValues().tail(5 - (4 - 1)).maxCoeff() < 1e-10);
    }
}

TEST_CASE("save/dr degenerate collapses") {
    // One slice: mu = 0, so G = V^2 and F = 2 V V.
    MatrixXd Z = standardize(random_matrix(40, 3, 20)).whitened;
    SliceMoments m = slice_moments(Z, slice_equal_count(VectorXd::LinSpaced(40, 0, 1), 1));
    MatrixXd V = m.second_centrals[0];
    CHECK((save_matrix(m).matrix - V * V).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dr_matrix(m).matrix - 2.0 * V * V).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(V.norm() < 1e-10);  // sample second moment of whitened data is I

    // Single-slice SIR is exactly zero.
    CHECK(sir_matrix(m).matrix.norm() < 1e-12);
}

TEST_CASE("univariate_candidate recovers a noiseless linear direction") {
    MatrixXd X = random_matrix(500, 4, 30);
    VectorXd y = X.col(0);
    CandidateMatrix c = univariate_candidate(X, y, Method::SIR, 5);
    StandardizedSample s = standardize(X);
    SdrEstimate est = estimate_directions(c, s.whitener, 1);
    MatrixXd e1 = MatrixXd::Zero(4, 1);
    e1(0, 0) = 1.0;
    CHECK(subspace_distance(e1, est.basis) < 0.1);
}

TEST_CASE("univariate_candidate under independence has vanishing spectrum") {
    double topSum = 0.0;
    for (std::uint64_t seed : {40u, 41u, 42u, 43u, 44u}) {
        MatrixXd X = random_matrix(2000, 4, seed);
        VectorXd y = random_matrix(2000, 1, seed + 500).col(0);
        CandidateMatrix c = univariate_candidate(X, y, Method::SIR, 5);
        topSum += sym_eig(c.matrix).values(0);
    }
    CHECK(topSum / 5.0 < 0.15);
}

TEST_CASE("projective_resampling: k=1 equals the univariate path") {
    MatrixXd X = random_matrix(80, 3, 50);
    StandardizedSample s = standardize(X);
    ExpectileMatrix xi;
    xi.levels = VectorXd::Constant(1, 0.5);
    xi.values = random_matrix(80, 1, 51);  // any scalar pseudo-response
    CandidateMatrix proj = projective_resampling(xi, s.whitened, Method::SIR, 4, 17, 7);
    CandidateMatrix direct = candidate_for_slicing(s.whitened, xi.values.col(0), Method::SIR, 4);
    CHECK((proj.matrix - direct.matrix).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("projective_resampling: deterministic and PSD") {
    MatrixXd X = random_matrix(60, 4, 60);
    StandardizedSample s = standardize(X);
    ExpectileMatrix xi;
    xi.levels = default_levels(3);
    xi.values = random_matrix(60, 3, 61);
    CandidateMatrix a = projective_resampling(xi, s.whitened, Method::DR, 5, 50, 99);
    CandidateMatrix b = projective_resampling(xi, s.whitened, Method::DR, 5, 50, 99);
    CHECK((a.matrix - b.matrix).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sym_eig(a.matrix).values.minCoeff() >= -1e-8);
}

TEST_CASE("estimate_directions basics") {
    CandidateMatrix c;
    c.matrix = Eigen::Vector3d(3.0, 2.0, 1.0).asDiagonal();
    SdrEstimate est = estimate_directions(c, MatrixXd::Identity(3, 3), 2);
    CHECK(est.basis.col(0).isApprox(Eigen::Vector3d(1, 0, 0), 1e-12));
    CHECK(est.basis.col(1).isApprox(Eigen::Vector3d(0, 1, 0), 1e-12));
    CHECK(est.eigenvalues(0) == doctest::Approx(3.0));

    // d = p spans everything
    SdrEstimate full = estimate_directions(c, MatrixXd::Identity(3, 3), 3);
    CHECK(subspace_distance(random_matrix(3, 3, 70), full.basis) < 1e-10);

    // tied eigenvalues still give a deterministic result
    CandidateMatrix tie;
    tie.matrix = Eigen::Vector3d(2.0, 2.0, 1.0).asDiagonal();
    SdrEstimate t1 = estimate_directions(tie, MatrixXd::Identity(3, 3), 2);
    SdrEstimate t2 = estimate_directions(tie, MatrixXd::Identity(3, 3), 2);
    CHECK((t1.basis - t2.basis).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pooled_marginal: k=1 reduces to the single-level eigenbasis") {
    MatrixXd X = random_matrix(70, 3, 80);
    StandardizedSample s = standardize(X);
    ExpectileMatrix xi;
    xi.levels = VectorXd::Constant(1, 0.5);
    xi.values = random_matrix(70, 1, 81);
    SdrEstimate pooled = pooled_marginal(xi, s.whitened, s.whitener, Method::SIR, 4, 2);
    CandidateMatrix c = candidate_for_slicing(s.whitened, xi.values.col(0), Method::SIR, 4);
    SdrEstimate direct = estimate_directions(c, s.whitener, 2);
    CHECK(subspace_distance(pooled.basis, direct.basis) < 1e-8);
}

TEST_CASE("fit_sdr: classical dispatch equals the univariate path") {
    MatrixXd X = random_matrix(120, 4, 90);
    VectorXd y = (X.col(0).array() + X.col(1).array().square()).matrix();
    SdrOptions opt;
    opt.method = Method::SIR;
    opt.flavor = Flavor::Classical;
    opt.H = 5;
    opt.d = 2;
    SdrEstimate est = fit_sdr(X, y, opt);
    StandardizedSample s = standardize(X);
    SdrEstimate manual = estimate_directions(univariate_candidate(X, y, Method::SIR, 5), s.whitener, 2);
    CHECK((est.basis - manual.basis).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("fit_sdr: EA-SIR on a heteroscedastic toy model") {
    // Y = exp(X1) * eps: the mean function is zero but every non-central
    // expectile is monotone in X1, so slicing the fitted expectiles finds e1.
    double total = 0.0;
    MatrixXd e1 = MatrixXd::Zero(2, 1);
    e1(0, 0) = 1.0;
    for (int seedIdx = 0; seedIdx < 20; ++seedIdx) {
        std::mt19937_64 rng = substream(7, seedIdx);
        std::normal_distribution<double> gauss;
        MatrixXd X(100, 2);
        VectorXd y(100);
        for (Index i = 0; i < 100; ++i) {
            X(i, 0) = gauss(rng);
            X(i, 1) = gauss(rng);
            y(i) = std::exp(X(i, 0)) * gauss(rng);
        }
        SdrOptions opt;
        opt.method = Method::SIR;
        opt.flavor = Flavor::Projective;
        opt.H = 5;
        opt.N = 200;
        opt.d = 1;
        opt.lambda = 0.1;
        opt.seed = 1000 + seedIdx;
        SdrEstimate est = fit_sdr(X, y, opt);
        total += subspace_distance(e1, est.basis);
    }
    CHECK(total / 20.0 < 0.3);
}

TEST_CASE("univariate SIR is invariant under joint orthogonal transforms") {
    MatrixXd X = random_matrix(200, 3, 95);
    VectorXd y = X.col(0) + X.col(1);  // noiseless monotone
    MatrixXd B(3, 1);
    B << 1, 1, 0;
    SdrOptions opt;
    opt.method = Method::SIR;
    opt.flavor = Flavor::Classical;
    opt.H = 5;
    opt.d = 1;
    SdrEstimate est = fit_sdr(X, y, opt);

    Eigen::HouseholderQR<MatrixXd> qr(random_matrix(3, 3, 96));
    MatrixXd Q = qr.householderQ();
    SdrEstimate estQ = fit_sdr(X * Q.transpose(), y, opt);
    CHECK(std::abs(subspace_distance(B, est.basis) - subspace_distance(Q * B, estQ.basis)) < 1e-8);
}
