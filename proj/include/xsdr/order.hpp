#pragma once

#include <Eigen/Dense>
#include <numeric>
#include <vector>

#include "xsdr/errors.hpp"
#include "xsdr/inverse_regression.hpp"
#include "xsdr/rng.hpp"

namespace xsdr {

// Lambda_m = n * sum_{j > m} eta_j
inline double lambda_stat(const Eigen::Ref<const VectorXd>& eigenvalues, int m, Index n) {
    const Index p = eigenvalues.size();
    if (m < 0 || m > p) throw InvalidOptions("lambda_stat: 0 <= m <= p required");
    return static_cast<double>(n) * eigenvalues.tail(p - m).sum();
}

struct SequentialTestStep {
    int m = 0;
    double statistic = 0.0;
    double pvalue = 1.0;
    bool rejected = false;
};

struct OrderEstimate {
    int d_hat = 0;
    std::vector<SequentialTestStep> steps;
    double alpha = 0.1;
    int B = 200;
};

namespace detail {

struct OrderContext {
    StandardizedSample sample;
    ExpectileMatrix xi;
    bool assisted = false;
    SymmetricEigen spectrum;  // Z-frame spectrum on the original data
};

inline OrderContext prepare_order_context(const Eigen::Ref<const MatrixXd>& X,
                                          const Eigen::Ref<const VectorXd>& y,
                                          const SdrOptions& opt) {
    OrderContext ctx;
    ctx.sample = standardize(X);
    ctx.assisted = opt.flavor != Flavor::Classical;
    if (ctx.assisted) ctx.xi = expectile_matrix(X, y, opt.levels, resolve_kernel(X, opt));
    ctx.spectrum = candidate_spectrum(ctx.sample.whitened, y, ctx.assisted ? &ctx.xi : nullptr, opt);
    return ctx;
}

inline SequentialTestStep permutation_step(const OrderContext& ctx,
                                           const Eigen::Ref<const VectorXd>& y,
                                           const SdrOptions& opt, int m, int B, double alpha,
                                           std::uint64_t seed) {
    const Index n = ctx.sample.whitened.rows(), p = ctx.sample.whitened.cols();
    if (m < 0 || m > p - 1) throw InvalidOptions("permutation_test: 0 <= m <= p-1 required");
    if (B < 1) throw InvalidOptions("permutation_test: B >= 1 required");

    SequentialTestStep step;
    step.m = m;
    step.statistic = lambda_stat(ctx.spectrum.values, m, n);

    MatrixXd U1 = ctx.spectrum.vectors.leftCols(m);
    MatrixXd U2 = ctx.spectrum.vectors.rightCols(p - m);
    MatrixXd W1 = ctx.sample.whitened * U1;  // n x m
    MatrixXd W2 = ctx.sample.whitened * U2;  // n x (p-m)
    MatrixXd base = W1 * U1.transpose();

    int exceed = 0;
    for (int b = 0; b < B; ++b) {
        std::mt19937_64 rng = substream(seed, static_cast<std::uint64_t>(b));
        std::vector<Index> perm(n);
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        MatrixXd W2p(n, p - m);
        for (Index i = 0; i < n; ++i) W2p.row(i) = W2.row(perm[i]);
        MatrixXd Zb = base + W2p * U2.transpose();
        const ExpectileMatrix* xi = ctx.assisted ? &ctx.xi : nullptr;
        ExpectileMatrix xi_refit;
        if (ctx.assisted && opt.refit_expectiles_in_permutation) {
            xi_refit = expectile_matrix(Zb, y, opt.levels, resolve_kernel(Zb, opt));
            xi = &xi_refit;
        }
        SymmetricEigen spec = candidate_spectrum(Zb, y, xi, opt);
        const double stat_b = lambda_stat(spec.values, m, n);
        if (stat_b > step.statistic) ++exceed;
    }
    step.pvalue = static_cast<double>(exceed) / static_cast<double>(B);
    step.rejected = step.pvalue < alpha;
    return step;
}

}  // namespace detail

// Single permutation test of H0: d = m against d > m.
inline SequentialTestStep permutation_test(const Eigen::Ref<const MatrixXd>& X,
                                           const Eigen::Ref<const VectorXd>& y,
                                           const SdrOptions& opt, int m, int B,
                                           std::uint64_t seed, double alpha = 0.1) {
    detail::OrderContext ctx = detail::prepare_order_context(X, y, opt);
    return detail::permutation_step(ctx, y, opt, m, B, alpha, seed);
}

// Sequential test: d_hat is the smallest m whose null is accepted, or p if
// every step rejects.
inline OrderEstimate estimate_order(const Eigen::Ref<const MatrixXd>& X,
                                    const Eigen::Ref<const VectorXd>& y, const SdrOptions& opt,
                                    double alpha, int B, std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidOptions("estimate_order: 0 < alpha < 1");
    const Index p = X.cols();
    detail::OrderContext ctx = detail::prepare_order_context(X, y, opt);
    OrderEstimate est;
    est.alpha = alpha;
    est.B = B;
    est.d_hat = static_cast<int>(p);
    for (int m = 0; m < p; ++m) {
        SequentialTestStep step =
            detail::permutation_step(ctx, y, opt, m, B, alpha, mix64(seed) + m);
        est.steps.push_back(step);
        if (!step.rejected) {
            est.d_hat = m;
            break;
        }
    }
    return est;
}

}  // namespace xsdr
