#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "xsdr/core.hpp"
#include "xsdr/errors.hpp"
#include "xsdr/inverse_regression.hpp"
#include "xsdr/rng.hpp"
#include "xsdr/tuning.hpp"

namespace xsdr {

enum class ModelId { I, II, III, IV, V };

inline std::string model_name(ModelId id) {
    switch (id) {
        case ModelId::I: return "I";
        case ModelId::II: return "II";
        case ModelId::III: return "III";
        case ModelId::IV: return "IV";
        default: return "V";
    }
}

inline ModelId parse_model(const std::string& s) {
    if (s == "I" || s == "1") return ModelId::I;
    if (s == "II" || s == "2") return ModelId::II;
    if (s == "III" || s == "3") return ModelId::III;
    if (s == "IV" || s == "4") return ModelId::IV;
    if (s == "V" || s == "5") return ModelId::V;
    throw InvalidOptions("unknown model: " + s);
}

struct SimModel {
    ModelId id = ModelId::I;
    VectorXd beta1;
    VectorXd beta2;
    double sigma = 0.2;
};

inline SimModel make_model(ModelId id, int p) {
    if (p < 6) throw InvalidOptions("make_model: p >= 6 required");
    SimModel m;
    m.id = id;
    m.beta1 = VectorXd::Zero(p);
    m.beta2 = VectorXd::Zero(p);
    m.beta1.head(3).setOnes();
    m.beta2(0) = 1.0;
    m.beta2(4) = 1.0;
    m.beta2(5) = 3.0;
    return m;
}

// True central-space basis: (beta1, beta2) for models I-IV, beta1 for V.
inline MatrixXd true_basis(const SimModel& m) {
    if (m.id == ModelId::V) return m.beta1;
    MatrixXd B(m.beta1.size(), 2);
    B.col(0) = m.beta1;
    B.col(1) = m.beta2;
    return B;
}

inline std::pair<MatrixXd, VectorXd> gen_model(const SimModel& model, Index n,
                                               std::mt19937_64& rng) {
    const Index p = model.beta1.size();
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd X(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) X(i, j) = gauss(rng);
    VectorXd eps(n);
    for (Index i = 0; i < n; ++i) eps(i) = gauss(rng);
    VectorXd u1 = X * model.beta1;
    VectorXd u2 = X * model.beta2;
    VectorXd y(n);
    const double sigma = model.sigma;
    switch (model.id) {
        case ModelId::I:
            y = 0.4 * u1.array().square() + 3.0 * (u2.array() / 4.0).sin() + sigma * eps.array();
            break;
        case ModelId::II:
            y = 3.0 * (u1.array() / 4.0).sin() + 3.0 * (u2.array() / 4.0).sin() +
                sigma * eps.array();
            break;
        case ModelId::III:
            y = 0.4 * u1.array().square() + u2.array().abs().sqrt() + sigma * eps.array();
            break;
        case ModelId::IV:
            y = 3.0 * (u2.array() / 4.0).sin() +
                (1.0 + u1.array().square()) * sigma * eps.array();
            break;
        default:
            y = u1.array() * eps.array();
            break;
    }
    return {std::move(X), std::move(y)};
}

struct MethodSpec {
    Method method = Method::DR;
    Flavor flavor = Flavor::Classical;
    std::string label() const { return flavor_prefix(flavor) + method_name(method); }
};

inline MethodSpec parse_method(const std::string& s) {
    MethodSpec spec;
    std::string rest = s;
    if (rest.rfind("mea-", 0) == 0) {
        spec.flavor = Flavor::PooledMarginal;
        rest = rest.substr(4);
    } else if (rest.rfind("ea-", 0) == 0) {
        spec.flavor = Flavor::Projective;
        rest = rest.substr(3);
    }
    if (rest == "sir") spec.method = Method::SIR;
    else if (rest == "save") spec.method = Method::SAVE;
    else if (rest == "dr") spec.method = Method::DR;
    else throw InvalidOptions("unknown method: " + s);
    return spec;
}

struct SimConfig {
    ModelId model = ModelId::I;
    int n = 100;
    int p = 6;
    int H = 5;
    int N = 1000;
    int k = 9;
    int d = 2;
    int reps = 100;
    std::uint64_t seed = 0;
    std::vector<MethodSpec> methods;
    double lambda = -1.0;  // < 0 means data-driven over lambda_grid
    std::vector<double> lambda_grid = default_lambda_grid();
    double r_multiplier = 1.0;  // scales the bandwidth-heuristic r
    double sigma = 0.2;
    int threads = 1;
};

struct BenchRow {
    std::string method;
    std::string flavor;
    double mean_delta = 0.0;
    double se_delta = 0.0;
    int reps = 0;
    int failures = 0;
    double seconds = 0.0;
};

namespace detail {

// Deterministic parallel loop: task i always computes the same value into
// slot i regardless of thread count.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

inline SdrOptions sim_sdr_options(const SimConfig& cfg, const MethodSpec& spec,
                                  std::uint64_t fit_seed) {
    SdrOptions opt;
    opt.method = spec.method;
    opt.flavor = spec.flavor;
    opt.H = cfg.H;
    opt.N = cfg.N;
    opt.levels = default_levels(cfg.k);
    opt.r = 0.0;
    opt.d = cfg.d;
    opt.seed = fit_seed;
    return opt;
}

// One Monte-Carlo table: per rep, generate data, fit every method, and score
// Delta against the true basis. Failed reps are dropped per method with a
// count. Deterministic for a fixed seed at any thread count.
inline std::vector<BenchRow> run_simulation(const SimConfig& cfg) {
    if (cfg.reps < 1) throw InvalidOptions("run_simulation: reps >= 1 required");
    if (cfg.methods.empty()) throw InvalidOptions("run_simulation: no methods given");
    SimModel model = make_model(cfg.model, cfg.p);
    model.sigma = cfg.sigma;
    const MatrixXd B = true_basis(model);
    const std::size_t nm = cfg.methods.size();

    std::vector<std::vector<double>> deltas(nm, std::vector<double>(cfg.reps,
                                            std::numeric_limits<double>::quiet_NaN()));
    std::vector<double> secs(nm, 0.0);
    std::mutex secs_mutex;

    detail::parallel_for(cfg.reps, cfg.threads, [&](int rep) {
        std::mt19937_64 data_rng = substream(cfg.seed, 2ULL * rep);
        const std::uint64_t fit_seed = mix64(cfg.seed) ^ mix64(2ULL * rep + 1);
        auto [X, y] = gen_model(model, cfg.n, data_rng);

        // Expectile matrices depend only on lambda within a rep; share them
        // across methods and across the selection grid.
        std::map<double, ExpectileMatrix> xi_cache;
        StandardizedSample std_sample;
        bool have_std = false;
        auto get_xi = [&](double lambda) -> const ExpectileMatrix& {
            auto it = xi_cache.find(lambda);
            if (it != xi_cache.end()) return it->second;
            KernelConfig kc;
            kc.r = cfg.r_multiplier * bandwidth_heuristic(X);
            kc.lambda = lambda;
            return xi_cache.emplace(lambda, expectile_matrix(X, y, default_levels(cfg.k), kc))
                .first->second;
        };

        for (std::size_t mi = 0; mi < nm; ++mi) {
            const MethodSpec& spec = cfg.methods[mi];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                SdrOptions opt = sim_sdr_options(cfg, spec, fit_seed);
                SdrEstimate est;
                if (spec.flavor == Flavor::Classical) {
                    est = fit_sdr(X, y, opt);
                } else {
                    if (!have_std) {
                        std_sample = standardize(X);
                        have_std = true;
                    }
                    auto fit_with_lambda = [&](double lambda) {
                        const ExpectileMatrix& xi = get_xi(lambda);
                        if (spec.flavor == Flavor::Projective) {
                            CandidateMatrix c = projective_resampling(xi, std_sample.whitened,
                                                                      spec.method, cfg.H, cfg.N,
                                                                      fit_seed);
                            return estimate_directions(c, std_sample.whitener, cfg.d);
                        }
                        return pooled_marginal(xi, std_sample.whitened, std_sample.whitener,
                                               spec.method, cfg.H, cfg.d);
                    };
                    if (cfg.lambda >= 0.0) {
                        est = fit_with_lambda(cfg.lambda);
                    } else {
                        double best = -1.0;
                        for (double lambda : cfg.lambda_grid) {
                            SdrEstimate cand = fit_with_lambda(lambda);
                            const double score =
                                dcor2(y, MatrixXd(X * cand.basis)).dcor2;
                            if (score > best) {
                                best = score;
                                est = cand;
                            }
                        }
                    }
                }
                // Published tables report the squared Frobenius projection
                // distance (values above the unsquared bound sqrt(d1+d2)
                // appear for p = 6 and p = 20), so score reps on that scale.
                const double dist = subspace_distance(B, est.basis);
                deltas[mi][rep] = dist * dist;
            } catch (const Error&) {
                // rep dropped for this method
            }
            const auto t1 = std::chrono::steady_clock::now();
            std::lock_guard<std::mutex> lock(secs_mutex);
            secs[mi] += std::chrono::duration<double>(t1 - t0).count();
        }
    });

    std::vector<BenchRow> rows;
    for (std::size_t mi = 0; mi < nm; ++mi) {
        BenchRow row;
        row.method = cfg.methods[mi].label();
        row.flavor = cfg.methods[mi].flavor == Flavor::Classical ? "classical"
                     : cfg.methods[mi].flavor == Flavor::Projective ? "projective"
                                                                    : "pooled-marginal";
        double sum = 0.0;
        std::vector<double> ok;
        for (double d : deltas[mi])
            if (std::isfinite(d)) {
                ok.push_back(d);
                sum += d;
            }
        row.reps = static_cast<int>(ok.size());
        row.failures = cfg.reps - row.reps;
        if (!ok.empty()) {
            row.mean_delta = sum / ok.size();
            double ss = 0.0;
            for (double d : ok) ss += (d - row.mean_delta) * (d - row.mean_delta);
            const double sd = ok.size() > 1 ? std::sqrt(ss / (ok.size() - 1)) : 0.0;
            row.se_delta = sd / std::sqrt(static_cast<double>(ok.size()));
        }
        row.seconds = secs[mi];
        rows.push_back(row);
    }
    return rows;
}

enum class SweepAxis { H, N, K, RMultiplier, Lambda };

inline SweepAxis parse_axis(const std::string& s) {
    if (s == "H") return SweepAxis::H;
    if (s == "N") return SweepAxis::N;
    if (s == "k") return SweepAxis::K;
    if (s == "r") return SweepAxis::RMultiplier;
    if (s == "lambda") return SweepAxis::Lambda;
    throw InvalidOptions("unknown sweep axis: " + s);
}

struct SweepRow {
    double axis_value = 0.0;
    BenchRow row;
};

// Repeat run_simulation along one tuning axis, all else fixed.
inline std::vector<SweepRow> run_sweep(SimConfig cfg, SweepAxis axis,
                                       const std::vector<double>& values) {
    if (values.empty()) throw InvalidOptions("run_sweep: no axis values");
    std::vector<SweepRow> out;
    for (double v : values) {
        switch (axis) {
            case SweepAxis::H: cfg.H = static_cast<int>(v); break;
            case SweepAxis::N: cfg.N = static_cast<int>(v); break;
            case SweepAxis::K: cfg.k = static_cast<int>(v); break;
            case SweepAxis::RMultiplier: cfg.r_multiplier = v; break;
            case SweepAxis::Lambda: cfg.lambda = v; break;
        }
        for (const BenchRow& row : run_simulation(cfg)) out.push_back({v, row});
    }
    return out;
}

// Leave-one-out average asymmetric loss: refit the SDR estimator without row
// i, regress y on the reduced predictor by kernel expectile regression, and
// score the held-out residual with phi_tau.
inline std::vector<double> loocv_delta_tau(const Eigen::Ref<const MatrixXd>& X,
                                           const Eigen::Ref<const VectorXd>& y,
                                           const SdrOptions& opt,
                                           const std::vector<double>& taus,
                                           double expectile_lambda = 0.1) {
    const Index n = X.rows();
    if (n < 3) throw InvalidOptions("loocv_delta_tau: n >= 3 required");
    std::vector<double> totals(taus.size(), 0.0);
    MatrixXd Xtrain(n - 1, X.cols());
    VectorXd ytrain(n - 1);
    for (Index i = 0; i < n; ++i) {
        Index r = 0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            Xtrain.row(r) = X.row(j);
            ytrain(r) = y(j);
            ++r;
        }
        SdrEstimate est = fit_sdr(Xtrain, ytrain, opt);
        MatrixXd Utrain = Xtrain * est.basis;
        MatrixXd Utest = X.row(i) * est.basis;
        KernelConfig kc;
        kc.r = bandwidth_heuristic(Utrain);
        kc.lambda = expectile_lambda;
        MatrixXd K = gram_matrix(Utrain, kc.r);
        for (std::size_t t = 0; t < taus.size(); ++t) {
            ExpectileFit fit = fit_ker(Utrain, ytrain, taus[t], kc, &K);
            const double pred = predict(fit, Utest)(0);
            totals[t] += phi_tau(y(i) - pred, taus[t]);
        }
    }
    for (double& v : totals) v /= static_cast<double>(n);
    return totals;
}

}  // namespace xsdr
