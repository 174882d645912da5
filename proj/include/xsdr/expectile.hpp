#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "xsdr/core.hpp"
#include "xsdr/errors.hpp"

namespace xsdr {

// Asymmetric squared loss: (1-tau) c^2 for c <= 0, tau c^2 for c > 0.
inline double phi_tau(double c, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw TauOutOfRange();
    return (c <= 0.0 ? (1.0 - tau) : tau) * c * c;
}

// Unique minimizer of sum_i phi_tau(v_i - a). The first-order condition is
// piecewise linear in a, so the weighted-mean update is exact Newton and
// terminates once the split of the data around a stabilizes.
inline double sample_expectile(const Eigen::Ref<const VectorXd>& values, double tau) {
    if (values.size() == 0) throw EmptyInput();
    if (!(tau > 0.0 && tau < 1.0)) throw TauOutOfRange();
    if (!values.allFinite()) throw NonFiniteInput();
    const Index n = values.size();
    double a = values.mean();
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    for (int iter = 0; iter < 200; ++iter) {
        double wsum = 0.0, wvsum = 0.0, grad = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double w = values(i) > a ? tau : 1.0 - tau;
            wsum += w;
            wvsum += w * values(i);
            grad += w * (values(i) - a);
        }
        if (std::abs(grad) < 1e-12 * scale * static_cast<double>(n)) break;
        a = wvsum / wsum;
    }
    return a;
}

// Gaussian RBF Gram matrix K(i,j) = exp(-r ||x_i - x_j||^2).
inline MatrixXd gram_matrix(const Eigen::Ref<const MatrixXd>& X, double r) {
    if (!(r > 0.0)) throw InvalidOptions("gram_matrix: r > 0 required");
    if (!X.allFinite()) throw NonFiniteInput();
    const Index n = X.rows();
    VectorXd sq = X.rowwise().squaredNorm();
    MatrixXd D2 = (-2.0 * X * X.transpose()).colwise() + sq;
    D2.rowwise() += sq.transpose();
    MatrixXd K = (-r * D2.cwiseMax(0.0)).array().exp();
    K = (0.5 * (K + K.transpose())).eval();  // eval: K aliases its transpose
    K.diagonal().setOnes();
    return K;
}

// r = 1/gamma^2 with gamma the mean pairwise Euclidean distance.
inline double bandwidth_heuristic(const Eigen::Ref<const MatrixXd>& X) {
    const Index n = X.rows();
    if (n < 2) throw InvalidOptions("bandwidth_heuristic: n >= 2 required");
    if (!X.allFinite()) throw NonFiniteInput();
    double total = 0.0;
    for (Index i = 0; i + 1 < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            total += (X.row(i) - X.row(j)).norm();
    const double gamma = total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
    if (gamma == 0.0) throw DegenerateSample();
    return 1.0 / (gamma * gamma);
}

struct KernelConfig {
    double r = 1.0;        // RBF scale
    double lambda = 0.1;   // ridge weight on alpha^T K alpha
    double jitter = 1e-8;  // added to the penalized diagonal block
};

struct ExpectileFit {
    double intercept = 0.0;
    VectorXd coefficients;
    MatrixXd train_points;
    double tau = 0.5;
    KernelConfig config;
    double final_objective = 0.0;
    int iterations = 0;
    bool converged = true;
    std::vector<double> objective_path;  // objective after each IRLS iterate
};

namespace detail {

inline double ker_objective(const MatrixXd& K, const VectorXd& y, double tau, double lambda,
                            double a0, const VectorXd& alpha) {
    VectorXd resid = y - VectorXd::Constant(y.size(), a0) - K * alpha;
    double obj = 0.0;
    for (Index i = 0; i < resid.size(); ++i)
        obj += (resid(i) <= 0.0 ? 1.0 - tau : tau) * resid(i) * resid(i);
    obj += lambda * alpha.dot(K * alpha);
    return obj;
}

}  // namespace detail

// Kernel expectile regression: minimizes
//   sum_i phi_tau(y_i - a0 - K_i alpha) + lambda alpha^T K alpha
// by iteratively reweighted least squares on the exact sign-pattern weights.
// The intercept is unpenalized. A precomputed Gram matrix may be supplied.
inline ExpectileFit fit_ker(const Eigen::Ref<const MatrixXd>& X,
                            const Eigen::Ref<const VectorXd>& y, double tau,
                            const KernelConfig& config, const MatrixXd* gram = nullptr) {
    const Index n = X.rows();
    if (n < 2) throw InvalidOptions("fit_ker: n >= 2 required");
    if (!(tau > 0.0 && tau < 1.0)) throw TauOutOfRange();
    if (!(config.r > 0.0) || config.lambda < 0.0) throw InvalidOptions("fit_ker: bad kernel config");
    if (!y.allFinite()) throw NonFiniteInput();
    MatrixXd Kown;
    if (!gram) Kown = gram_matrix(X, config.r);
    const MatrixXd& K = gram ? *gram : Kown;

    ExpectileFit fit;
    fit.train_points = X;
    fit.tau = tau;
    fit.config = config;
    fit.intercept = sample_expectile(y, tau);
    fit.coefficients = VectorXd::Zero(n);

    double obj = detail::ker_objective(K, y, tau, config.lambda, fit.intercept, fit.coefficients);
    fit.objective_path.push_back(obj);
    VectorXd signs_prev = VectorXd::Zero(n);
    MatrixXd M(n + 1, n + 1);
    VectorXd rhs(n + 1);

    int iter = 0;
    bool converged = false;
    for (; iter < 200; ++iter) {
        VectorXd resid = y - VectorXd::Constant(n, fit.intercept) - K * fit.coefficients;
        VectorXd w(n), signs(n);
        for (Index i = 0; i < n; ++i) {
            signs(i) = resid(i) > 0.0 ? 1.0 : -1.0;
            w(i) = resid(i) > 0.0 ? tau : 1.0 - tau;
        }
        if (iter > 0 && (signs - signs_prev).cwiseAbs().maxCoeff() == 0.0) {
            converged = true;
            break;
        }
        signs_prev = signs;

        // Weighted ridge normal equations for (a0, alpha) with design [1, K].
        MatrixXd WK = w.asDiagonal() * K;
        M(0, 0) = w.sum();
        M.block(0, 1, 1, n) = WK.colwise().sum();
        M.block(1, 0, n, 1) = M.block(0, 1, 1, n).transpose();
        M.block(1, 1, n, n) = K * WK + config.lambda * K;
        M.block(1, 1, n, n).diagonal().array() += config.jitter;
        rhs(0) = w.dot(y);
        rhs.segment(1, n) = K * (w.cwiseProduct(y));

        double jitter = config.jitter;
        VectorXd theta;
        for (int attempt = 0;; ++attempt) {
            Eigen::LDLT<MatrixXd> ldlt(M);
            theta = ldlt.solve(rhs);
            if (ldlt.info() == Eigen::Success && theta.allFinite()) break;
            if (attempt >= 3) throw SolveFailure("fit_ker: weighted system is singular");
            jitter = std::max(jitter, 1e-12) * 100.0;
            M.block(1, 1, n, n).diagonal().array() += jitter;
        }

        double a0_new = theta(0);
        VectorXd alpha_new = theta.segment(1, n);
        double obj_new = detail::ker_objective(K, y, tau, config.lambda, a0_new, alpha_new);
        // Backtrack toward the previous iterate if the full step overshoots;
        // the objective is convex along the segment.
        double step = 1.0;
        while (obj_new > obj && step > 1e-12) {
            step *= 0.5;
            a0_new = fit.intercept + step * (theta(0) - fit.intercept);
            alpha_new = fit.coefficients + step * (theta.segment(1, n) - fit.coefficients);
            obj_new = detail::ker_objective(K, y, tau, config.lambda, a0_new, alpha_new);
        }
        if (obj_new > obj) {  // no descent direction left
            converged = true;
            break;
        }
        fit.intercept = a0_new;
        fit.coefficients = alpha_new;
        const double rel = (obj - obj_new) / std::max(obj, 1e-300);
        obj = obj_new;
        fit.objective_path.push_back(obj);
        if (rel < 1e-10) {
            converged = true;
            ++iter;
            break;
        }
    }
    fit.final_objective = obj;
    fit.iterations = iter;
    fit.converged = converged;
    return fit;
}

// Evaluate the fitted expectile function at new points.
inline VectorXd predict(const ExpectileFit& fit, const Eigen::Ref<const MatrixXd>& Xnew) {
    const Index m = Xnew.rows(), n = fit.train_points.rows();
    VectorXd out = VectorXd::Constant(m, fit.intercept);
    for (Index i = 0; i < m; ++i) {
        double acc = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double d2 = (Xnew.row(i) - fit.train_points.row(j)).squaredNorm();
            acc += fit.coefficients(j) * std::exp(-fit.config.r * d2);
        }
        out(i) += acc;
    }
    return out;
}

struct ExpectileMatrix {
    MatrixXd values;  // n x k, column l = fitted tau_l expectile at the training rows
    VectorXd levels;  // strictly increasing in (0,1)
};

// Default expectile levels tau_l = l/10, l = 1..9.
inline VectorXd default_levels(int k = 9) {
    if (k < 1) throw InvalidOptions("default_levels: k >= 1 required");
    VectorXd levels(k);
    for (int l = 0; l < k; ++l) levels(l) = static_cast<double>(l + 1) / (k + 1);
    return levels;
}

// One kernel expectile fit per level; all fits share one Gram matrix.
inline ExpectileMatrix expectile_matrix(const Eigen::Ref<const MatrixXd>& X,
                                        const Eigen::Ref<const VectorXd>& y,
                                        const Eigen::Ref<const VectorXd>& levels,
                                        const KernelConfig& config) {
    const Index k = levels.size();
    if (k < 1) throw InvalidOptions("expectile_matrix: at least one level");
    for (Index l = 0; l < k; ++l) {
        if (!(levels(l) > 0.0 && levels(l) < 1.0)) throw TauOutOfRange();
        if (l > 0 && !(levels(l) > levels(l - 1)))
            throw InvalidOptions("expectile_matrix: levels must be strictly increasing");
    }
    MatrixXd K = gram_matrix(X, config.r);
    ExpectileMatrix xi;
    xi.levels = levels;
    xi.values.resize(X.rows(), k);
    for (Index l = 0; l < k; ++l) {
        ExpectileFit fit = fit_ker(X, y, levels(l), config, &K);
        xi.values.col(l) = VectorXd::Constant(X.rows(), fit.intercept) + K * fit.coefficients;
    }
    return xi;
}

}  // namespace xsdr
