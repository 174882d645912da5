#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "xsdr/errors.hpp"

namespace xsdr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Relative eigenvalue floor used when inverting sample covariances.
inline constexpr double kEigFloorRel = 1e-10;
inline constexpr double kEigFloorAbs = 1e-12;

struct SymmetricEigen {
    VectorXd values;   // sorted descending
    MatrixXd vectors;  // orthonormal columns, matching order
};

// Eigendecomposition of (S + S^T)/2 with eigenvalues sorted descending and
// each eigenvector's largest-magnitude component made positive.
inline SymmetricEigen sym_eig(const Eigen::Ref<const MatrixXd>& S) {
    MatrixXd sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) throw SolveFailure("symmetric eigensolver failed");
    const Index p = sym.rows();
    SymmetricEigen out;
    out.values.resize(p);
    out.vectors.resize(p, p);
    for (Index j = 0; j < p; ++j) {
        out.values(j) = solver.eigenvalues()(p - 1 - j);
        VectorXd v = solver.eigenvectors().col(p - 1 - j);
        Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        out.vectors.col(j) = v;
    }
    return out;
}

// Symmetric R with R*S*R = I on the eigenspace above the floor. Eigenvalues
// below 1e-10 * lambda_max are clamped to the floor before inversion.
inline MatrixXd inv_sqrt_psd(const Eigen::Ref<const MatrixXd>& S) {
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw NotSymmetric();
    SymmetricEigen eig = sym_eig(S);
    const double top = eig.values(0);
    if (!(top > kEigFloorAbs)) throw AllEigenvaluesBelowFloor();
    const double floor = kEigFloorRel * top;
    VectorXd inv = eig.values.unaryExpr([floor](double lam) {
        return 1.0 / std::sqrt(std::max(lam, floor));
    });
    return eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
}

struct StandardizedSample {
    MatrixXd raw;         // n x p input
    VectorXd mean;        // column means
    MatrixXd covariance;  // (1/n) sum (x - mean)(x - mean)^T
    MatrixXd whitener;    // covariance^{-1/2}
    MatrixXd whitened;    // rows z_i = whitener * (x_i - mean)
};

inline StandardizedSample standardize(const Eigen::Ref<const MatrixXd>& X) {
    const Index n = X.rows(), p = X.cols();
    if (n < 2 || p < 1) throw InvalidOptions("standardize: need n >= 2 and p >= 1");
    if (!X.allFinite()) throw NonFiniteInput();
    StandardizedSample s;
    s.raw = X;
    s.mean = X.colwise().mean();
    MatrixXd centered = X.rowwise() - s.mean.transpose();
    s.covariance = (centered.transpose() * centered) / static_cast<double>(n);
    try {
        s.whitener = inv_sqrt_psd(s.covariance);
    } catch (const AllEigenvaluesBelowFloor&) {
        throw SingularCovariance();
    }
    s.whitened = centered * s.whitener;  // whitener is symmetric
    return s;
}

// Uniform draw from the unit sphere in R^k via normalized Gaussians.
inline VectorXd sample_unit_sphere(Index k, std::mt19937_64& rng) {
    if (k < 1) throw InvalidOptions("sample_unit_sphere: k >= 1 required");
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXd t(k);
    double norm = 0.0;
    do {
        for (Index i = 0; i < k; ++i) t(i) = gauss(rng);
        norm = t.norm();
    } while (norm == 0.0);
    return t / norm;
}

// Orthonormal basis of the column space; throws if the (column-normalized)
// matrix is numerically rank deficient.
inline MatrixXd orthonormalize(const Eigen::Ref<const MatrixXd>& B) {
    if (B.cols() < 1) throw RankDeficientBasis("empty basis");
    MatrixXd scaled = B;
    for (Index j = 0; j < scaled.cols(); ++j) {
        const double nrm = scaled.col(j).norm();
        if (nrm == 0.0) throw RankDeficientBasis();
        scaled.col(j) /= nrm;
    }
    Eigen::JacobiSVD<MatrixXd> svd(scaled, Eigen::ComputeThinU);
    if (svd.singularValues()(svd.singularValues().size() - 1) <= 1e-10)
        throw RankDeficientBasis();
    return svd.matrixU();
}

// Frobenius distance between the orthogonal projectors onto span(B) and
// span(Bhat); invariant to any change of basis within either span.
inline double subspace_distance(const Eigen::Ref<const MatrixXd>& B,
                                const Eigen::Ref<const MatrixXd>& Bhat) {
    if (B.rows() != Bhat.rows()) throw InvalidOptions("subspace_distance: row mismatch");
    MatrixXd Q1 = orthonormalize(B);
    MatrixXd Q2 = orthonormalize(Bhat);
    MatrixXd diff = Q1 * Q1.transpose() - Q2 * Q2.transpose();
    return diff.norm();
}

}  // namespace xsdr
