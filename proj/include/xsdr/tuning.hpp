#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "xsdr/errors.hpp"
#include "xsdr/inverse_regression.hpp"

namespace xsdr {

struct DcorResult {
    double dcov2 = 0.0;
    double dcor2 = 0.0;
    Index n = 0;
};

namespace detail {

// Double-centered pairwise Euclidean distance matrix.
inline MatrixXd centered_distances(const Eigen::Ref<const MatrixXd>& u) {
    const Index n = u.rows();
    MatrixXd A(n, n);
    for (Index i = 0; i < n; ++i) {
        A(i, i) = 0.0;
        for (Index j = i + 1; j < n; ++j) A(i, j) = A(j, i) = (u.row(i) - u.row(j)).norm();
    }
    VectorXd rowMean = A.rowwise().mean();
    const double grand = rowMean.mean();
    A.colwise() -= rowMean;
    A.rowwise() -= rowMean.transpose();
    A.array() += grand;
    return A;
}

}  // namespace detail

// Squared distance correlation, V-statistic version of Szekely-Rizzo-Bakirov.
// Defined as 0 whenever either marginal distance variance vanishes.
inline DcorResult dcor2(const Eigen::Ref<const MatrixXd>& u,
                        const Eigen::Ref<const MatrixXd>& v) {
    const Index n = u.rows();
    if (n < 2 || v.rows() != n) throw InvalidOptions("dcor2: need matching n >= 2");
    if (!u.allFinite() || !v.allFinite()) throw NonFiniteInput();
    MatrixXd A = detail::centered_distances(u);
    MatrixXd B = detail::centered_distances(v);
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    DcorResult res;
    res.n = n;
    res.dcov2 = (A.array() * B.array()).sum() / n2;
    const double vu = (A.array() * A.array()).sum() / n2;
    const double vv = (B.array() * B.array()).sum() / n2;
    const double denom = vu * vv;
    res.dcor2 = denom > 0.0 ? res.dcov2 / std::sqrt(denom) : 0.0;
    return res;
}

struct LambdaSelection {
    std::vector<double> grid;
    std::vector<double> scores;  // dcor^2(y, B_lambda^T X) per candidate
    double chosen = 0.0;
};

inline std::vector<double> default_lambda_grid() { return {0.001, 0.01, 0.1, 1.0, 10.0}; }

// Pick lambda maximizing the squared distance correlation between y and the
// reduced predictor. Ties go to the smallest lambda; a failed candidate
// scores -inf.
inline LambdaSelection select_lambda(const Eigen::Ref<const MatrixXd>& X,
                                     const Eigen::Ref<const VectorXd>& y, SdrOptions opt,
                                     const std::vector<double>& grid) {
    if (grid.empty()) throw InvalidOptions("select_lambda: empty grid");
    LambdaSelection sel;
    sel.grid = grid;
    double best = -std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        if (lambda < 0.0) throw InvalidOptions("select_lambda: lambda >= 0 required");
        double score = -std::numeric_limits<double>::infinity();
        try {
            opt.lambda = lambda;
            SdrEstimate est = fit_sdr(X, y, opt);
            score = dcor2(y, X * est.basis).dcor2;
        } catch (const Error&) {
            // candidate dropped
        }
        sel.scores.push_back(score);
        if (score > best) {
            best = score;
            sel.chosen = lambda;
        }
    }
    if (!std::isfinite(best)) throw SolveFailure("select_lambda: every candidate failed");
    return sel;
}

}  // namespace xsdr
