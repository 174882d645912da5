// Command-line front end: fit on CSV data, Monte-Carlo simulations and
// sweeps, order determination, LOOCV evaluation, and expectile-curve data.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "xsdr/benchmark.hpp"
#include "xsdr/csv.hpp"
#include "xsdr/order.hpp"
#include "xsdr/tuning.hpp"

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 2 input error, 3 estimator error, 4 config error.
constexpr int kExitInput = 2;
constexpr int kExitEstimator = 3;
constexpr int kExitConfig = 4;

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 1469598103934665603ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct FitFlags {
    std::string csv;
    std::string response = "y";
    std::string method = "ea-sir";
    int H = 5;
    int N = 1000;
    int k = 9;
    int d = 0;
    double r = 0.0;
    std::string lambda = "auto";
    std::uint64_t seed = 0;
    std::string out = "xsdr_";
};

void add_common_fit_flags(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("csv", f.csv, "input CSV file")->required();
    cmd->add_option("--response", f.response, "response column name or 0-based index");
    cmd->add_option("--method", f.method, "sir|save|dr with optional ea-/mea- prefix");
    cmd->add_option("--H", f.H, "number of slices");
    cmd->add_option("--N", f.N, "number of sphere projections");
    cmd->add_option("--k", f.k, "number of expectile levels");
    cmd->add_option("--r", f.r, "RBF scale (0 = pairwise-distance heuristic)");
    cmd->add_option("--lambda", f.lambda, "ridge weight, or 'auto' for data-driven selection");
    cmd->add_option("--seed", f.seed, "RNG seed")->envname("XSDR_SEED");
    cmd->add_option("--out", f.out, "output path prefix");
}

json options_json(const xsdr::SdrOptions& opt, const std::string& method_label,
                  const std::string& lambda_desc) {
    json j;
    j["method"] = method_label;
    j["H"] = opt.H;
    j["N"] = opt.N;
    j["k"] = opt.levels.size();
    std::vector<double> levels(opt.levels.data(), opt.levels.data() + opt.levels.size());
    j["levels"] = levels;
    j["r"] = opt.r;
    j["lambda"] = lambda_desc;
    j["d"] = opt.d;
    j["seed"] = opt.seed;
    return j;
}

void write_manifest(const std::string& path, json options, const std::string& input_digest) {
    json m;
    m["tool"] = "xsdr";
    m["version"] = kVersion;
    m["options"] = std::move(options);
    m["input_digest"] = input_digest;
    std::ofstream out(path);
    if (!out) throw xsdr::Error("cannot write file: " + path);
    out << m.dump(2) << "\n";
}

// Resolve lambda ("auto" selects by distance correlation) and fit.
xsdr::SdrEstimate resolve_and_fit(const xsdr::Dataset& data, xsdr::SdrOptions& opt,
                                  const std::string& lambda_flag, std::string& lambda_desc) {
    if (opt.flavor != xsdr::Flavor::Classical && lambda_flag == "auto") {
        xsdr::LambdaSelection sel =
            xsdr::select_lambda(data.predictors, data.response, opt, xsdr::default_lambda_grid());
        opt.lambda = sel.chosen;
        lambda_desc = "data-driven:" + xsdr::format_double(sel.chosen);
    } else if (lambda_flag == "auto") {
        lambda_desc = "n/a";
    } else {
        opt.lambda = std::stod(lambda_flag);
        lambda_desc = xsdr::format_double(opt.lambda);
    }
    return xsdr::fit_sdr(data.predictors, data.response, opt);
}

xsdr::SdrOptions options_from_flags(const FitFlags& f, const xsdr::MethodSpec& spec) {
    xsdr::SdrOptions opt;
    opt.method = spec.method;
    opt.flavor = spec.flavor;
    opt.H = f.H;
    opt.N = f.N;
    opt.levels = xsdr::default_levels(f.k);
    opt.r = f.r;
    opt.d = f.d;
    opt.seed = f.seed;
    return opt;
}

int cmd_fit(const FitFlags& f) {
    xsdr::Dataset data = xsdr::split_response(xsdr::read_csv(f.csv), f.response);
    xsdr::MethodSpec spec = xsdr::parse_method(f.method);
    if (f.d < 1) throw xsdr::InvalidOptions("fit requires --d >= 1");
    xsdr::SdrOptions opt = options_from_flags(f, spec);
    std::string lambda_desc;
    xsdr::SdrEstimate est = resolve_and_fit(data, opt, f.lambda, lambda_desc);

    std::vector<std::string> bcols;
    for (int j = 0; j < opt.d; ++j) bcols.push_back("b" + std::to_string(j + 1));
    xsdr::write_matrix_csv(f.out + "basis.csv", est.basis, bcols);
    xsdr::write_matrix_csv(f.out + "eigenvalues.csv", est.eigenvalues, {"eigenvalue"});
    xsdr::write_matrix_csv(f.out + "reduced.csv", data.predictors * est.basis, bcols);
    json options = options_json(opt, spec.label(), lambda_desc);
    options["response"] = data.response_name;
    options["rank_warning"] = est.rank_warning;
    write_manifest(f.out + "manifest.json", options, hex64(fnv1a_file(f.csv)));
    return 0;
}

struct SimulateFlags {
    std::string model = "I";
    int n = 100, p = 6, H = 5, N = 1000, k = 9, d = 2, reps = 100, threads = 1;
    std::string methods = "sir,save,dr";
    std::string lambda = "auto";
    std::uint64_t seed = 0;
    std::string sweep;
    std::string values;
    bool timing = false;
    std::string out = "xsdr_";
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

void write_bench_tables(const std::string& prefix, const xsdr::SimConfig& cfg,
                        const std::string& sweep_axis, const std::vector<xsdr::SweepRow>& rows,
                        bool timing) {
    std::ofstream csv(prefix + "table.csv");
    if (!csv) throw xsdr::Error("cannot write file: " + prefix + "table.csv");
    const bool sweeping = !sweep_axis.empty();
    if (sweeping) csv << sweep_axis << ",";
    csv << "model,method,flavor,n,p,H,N,k,d,mean_delta,se_delta,reps,seconds\n";
    json jrows = json::array();
    for (const auto& sr : rows) {
        const xsdr::BenchRow& r = sr.row;
        const double secs = timing ? r.seconds : 0.0;
        if (sweeping) csv << xsdr::format_double(sr.axis_value) << ",";
        csv << xsdr::model_name(cfg.model) << "," << r.method << "," << r.flavor << "," << cfg.n
            << "," << cfg.p << "," << cfg.H << "," << cfg.N << "," << cfg.k << "," << cfg.d << ","
            << xsdr::format_double(r.mean_delta) << "," << xsdr::format_double(r.se_delta) << ","
            << r.reps << "," << xsdr::format_double(secs) << "\n";
        json jr;
        if (sweeping) jr[sweep_axis] = sr.axis_value;
        jr["model"] = xsdr::model_name(cfg.model);
        jr["method"] = r.method;
        jr["flavor"] = r.flavor;
        jr["n"] = cfg.n;
        jr["p"] = cfg.p;
        jr["H"] = cfg.H;
        jr["N"] = cfg.N;
        jr["k"] = cfg.k;
        jr["d"] = cfg.d;
        jr["mean_delta"] = r.mean_delta;
        jr["se_delta"] = r.se_delta;
        jr["reps"] = r.reps;
        jr["failures"] = r.failures;
        jr["seconds"] = secs;
        jrows.push_back(jr);
    }
    std::ofstream js(prefix + "table.json");
    if (!js) throw xsdr::Error("cannot write file: " + prefix + "table.json");
    js << jrows.dump(2) << "\n";
}

int cmd_simulate(const SimulateFlags& f) {
    xsdr::SimConfig cfg;
    cfg.model = xsdr::parse_model(f.model);
    cfg.n = f.n;
    cfg.p = f.p;
    cfg.H = f.H;
    cfg.N = f.N;
    cfg.k = f.k;
    cfg.d = f.d;
    cfg.reps = f.reps;
    cfg.seed = f.seed;
    cfg.threads = f.threads;
    if (f.lambda == "auto")
        cfg.lambda = -1.0;
    else
        cfg.lambda = std::stod(f.lambda);
    for (const std::string& m : split_list(f.methods)) cfg.methods.push_back(xsdr::parse_method(m));
    if (cfg.methods.empty()) throw xsdr::InvalidOptions("no methods given");

    std::vector<xsdr::SweepRow> rows;
    if (!f.sweep.empty()) {
        std::vector<double> values;
        for (const std::string& v : split_list(f.values)) values.push_back(std::stod(v));
        rows = xsdr::run_sweep(cfg, xsdr::parse_axis(f.sweep), values);
    } else {
        for (const xsdr::BenchRow& r : xsdr::run_simulation(cfg)) rows.push_back({0.0, r});
    }
    write_bench_tables(f.out, cfg, f.sweep, rows, f.timing);

    json options;
    options["model"] = xsdr::model_name(cfg.model);
    options["n"] = cfg.n;
    options["p"] = cfg.p;
    options["H"] = cfg.H;
    options["N"] = cfg.N;
    options["k"] = cfg.k;
    options["d"] = cfg.d;
    options["reps"] = cfg.reps;
    options["methods"] = f.methods;
    options["lambda"] = f.lambda;
    options["seed"] = cfg.seed;
    if (!f.sweep.empty()) {
        options["sweep"] = f.sweep;
        options["values"] = f.values;
    }
    write_manifest(f.out + "manifest.json", options, "synthetic");
    return 0;
}

struct OrderFlags {
    FitFlags fit;
    double alpha = 0.1;
    int B = 200;
};

int cmd_order(const OrderFlags& f) {
    xsdr::Dataset data = xsdr::split_response(xsdr::read_csv(f.fit.csv), f.fit.response);
    xsdr::MethodSpec spec = xsdr::parse_method(f.fit.method);
    xsdr::SdrOptions opt = options_from_flags(f.fit, spec);
    opt.d = 1;  // unused by the sequential test
    std::string lambda_desc = "n/a";
    if (spec.flavor != xsdr::Flavor::Classical) {
        if (f.fit.lambda == "auto") {
            opt.d = std::max(1, std::min<int>(2, data.predictors.cols()));
            xsdr::LambdaSelection sel = xsdr::select_lambda(data.predictors, data.response, opt,
                                                            xsdr::default_lambda_grid());
            opt.lambda = sel.chosen;
            lambda_desc = "data-driven:" + xsdr::format_double(sel.chosen);
        } else {
            opt.lambda = std::stod(f.fit.lambda);
            lambda_desc = xsdr::format_double(opt.lambda);
        }
    }
    xsdr::OrderEstimate est =
        xsdr::estimate_order(data.predictors, data.response, opt, f.alpha, f.B, f.fit.seed);

    json report;
    report["d_hat"] = est.d_hat;
    report["alpha"] = est.alpha;
    report["B"] = est.B;
    json steps = json::array();
    for (const auto& s : est.steps) {
        json js;
        js["m"] = s.m;
        js["lambda_m"] = s.statistic;
        js["pvalue"] = s.pvalue;
        js["rejected"] = s.rejected;
        steps.push_back(js);
    }
    report["steps"] = steps;
    std::ofstream out(f.fit.out + "order.json");
    if (!out) throw xsdr::Error("cannot write file: " + f.fit.out + "order.json");
    out << report.dump(2) << "\n";

    json options = options_json(opt, spec.label(), lambda_desc);
    options["alpha"] = f.alpha;
    options["B"] = f.B;
    options["response"] = data.response_name;
    write_manifest(f.fit.out + "manifest.json", options, hex64(fnv1a_file(f.fit.csv)));
    return 0;
}

struct PlotFlags {
    FitFlags fit;
    std::string taus = "0.2,0.5,0.8";
    bool svg = false;
};

void write_svg_curves(const std::string& path, const xsdr::VectorXd& u, const xsdr::VectorXd& y,
                      const xsdr::MatrixXd& curves) {
    const double xmin = u.minCoeff(), xmax = u.maxCoeff();
    double ymin = std::min(y.minCoeff(), curves.minCoeff());
    double ymax = std::max(y.maxCoeff(), curves.maxCoeff());
    if (xmax == xmin || ymax == ymin) return;
    const double W = 640, Hh = 480, pad = 40;
    auto sx = [&](double v) { return pad + (v - xmin) / (xmax - xmin) * (W - 2 * pad); };
    auto sy = [&](double v) { return Hh - pad - (v - ymin) / (ymax - ymin) * (Hh - 2 * pad); };
    std::ofstream out(path);
    if (!out) throw xsdr::Error("cannot write file: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << Hh << "'>\n";
    for (Eigen::Index i = 0; i < u.size(); ++i)
        out << "<circle cx='" << sx(u(i)) << "' cy='" << sy(y(i)) << "' r='2' fill='#666'/>\n";
    const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
    for (Eigen::Index c = 0; c < curves.cols(); ++c) {
        out << "<polyline fill='none' stroke='" << colors[c % 5] << "' stroke-width='1.5' points='";
        for (Eigen::Index i = 0; i < u.size(); ++i)
            out << sx(u(i)) << "," << sy(curves(i, c)) << " ";
        out << "'/>\n";
    }
    out << "</svg>\n";
}

int cmd_plot_expectiles(const PlotFlags& f) {
    xsdr::Dataset data = xsdr::split_response(xsdr::read_csv(f.fit.csv), f.fit.response);
    xsdr::MethodSpec spec = xsdr::parse_method(f.fit.method);
    xsdr::SdrOptions opt = options_from_flags(f.fit, spec);
    if (opt.d < 1) opt.d = 1;
    std::string lambda_desc;
    xsdr::SdrEstimate est = resolve_and_fit(data, opt, f.fit.lambda, lambda_desc);

    xsdr::VectorXd u = data.predictors * est.basis.col(0);
    std::vector<double> taus;
    for (const std::string& t : split_list(f.taus)) taus.push_back(std::stod(t));
    if (taus.empty()) throw xsdr::InvalidOptions("no tau values given");

    xsdr::MatrixXd U = u;
    xsdr::KernelConfig kc;
    kc.r = xsdr::bandwidth_heuristic(U);
    kc.lambda = opt.lambda > 0.0 ? opt.lambda : 0.1;
    xsdr::MatrixXd K = xsdr::gram_matrix(U, kc.r);
    xsdr::MatrixXd curves(u.size(), taus.size());
    for (std::size_t t = 0; t < taus.size(); ++t) {
        xsdr::ExpectileFit fit = xsdr::fit_ker(U, data.response, taus[t], kc, &K);
        curves.col(t) = xsdr::VectorXd::Constant(u.size(), fit.intercept) + K * fit.coefficients;
    }

    std::vector<Eigen::Index> order(u.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return u(a) < u(b) || (u(a) == u(b) && a < b); });

    xsdr::MatrixXd tableM(u.size(), 3 + taus.size());
    for (Eigen::Index r = 0; r < u.size(); ++r) {
        const Eigen::Index i = order[r];
        tableM(r, 0) = static_cast<double>(i);
        tableM(r, 1) = u(i);
        tableM(r, 2) = data.response(i);
        for (std::size_t t = 0; t < taus.size(); ++t) tableM(r, 3 + t) = curves(i, t);
    }
    std::vector<std::string> cols = {"index", "btx", "y"};
    for (double t : taus) cols.push_back("f_tau_" + xsdr::format_double(t));
    xsdr::write_matrix_csv(f.fit.out + "curves.csv", tableM, cols);
    if (f.svg) {
        xsdr::VectorXd us(u.size()), ys(u.size());
        xsdr::MatrixXd cs(u.size(), curves.cols());
        for (Eigen::Index r = 0; r < u.size(); ++r) {
            us(r) = u(order[r]);
            ys(r) = data.response(order[r]);
            cs.row(r) = curves.row(order[r]);
        }
        write_svg_curves(f.fit.out + "curves.svg", us, ys, cs);
    }

    json options = options_json(opt, spec.label(), lambda_desc);
    options["taus"] = taus;
    options["response"] = data.response_name;
    write_manifest(f.fit.out + "manifest.json", options, hex64(fnv1a_file(f.fit.csv)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"expectile-assisted inverse regression for sufficient dimension reduction"};
    app.require_subcommand(1);

    FitFlags fitf;
    fitf.d = 0;
    CLI::App* fit = app.add_subcommand("fit", "estimate a central-subspace basis from CSV data");
    add_common_fit_flags(fit, fitf);
    fit->add_option("--d", fitf.d, "structural dimension")->required();

    SimulateFlags simf;
    CLI::App* sim = app.add_subcommand("simulate", "Monte-Carlo benchmark on models I-V");
    sim->add_option("--model", simf.model, "model id I..V");
    sim->add_option("--n", simf.n, "sample size");
    sim->add_option("--p", simf.p, "predictor dimension");
    sim->add_option("--H", simf.H, "number of slices");
    sim->add_option("--N", simf.N, "number of projections");
    sim->add_option("--k", simf.k, "number of expectile levels");
    sim->add_option("--d", simf.d, "fitted dimension");
    sim->add_option("--reps", simf.reps, "Monte-Carlo repetitions");
    sim->add_option("--methods", simf.methods, "comma-separated method labels");
    sim->add_option("--lambda", simf.lambda, "ridge weight, or 'auto'");
    sim->add_option("--seed", simf.seed, "RNG seed")->envname("XSDR_SEED");
    sim->add_option("--sweep", simf.sweep, "sweep axis: H|N|k|r|lambda");
    sim->add_option("--values", simf.values, "comma-separated sweep values");
    sim->add_option("--threads", simf.threads, "worker threads (does not affect results)");
    sim->add_flag("--timing", simf.timing, "emit wall-clock seconds (breaks byte determinism)");
    sim->add_option("--out", simf.out, "output path prefix");

    OrderFlags ordf;
    CLI::App* ord = app.add_subcommand("order", "permutation sequential test for the dimension");
    add_common_fit_flags(ord, ordf.fit);
    ord->add_option("--alpha", ordf.alpha, "significance level");
    ord->add_option("--B", ordf.B, "permutation count");

    PlotFlags plotf;
    CLI::App* plot = app.add_subcommand("plot-expectiles", "emit expectile-curve plot data");
    add_common_fit_flags(plot, plotf.fit);
    plot->add_option("--d", plotf.fit.d, "structural dimension");
    plot->add_option("--taus", plotf.taus, "comma-separated expectile levels");
    plot->add_flag("--svg", plotf.svg, "also render an SVG scatter with curves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (fit->parsed()) return cmd_fit(fitf);
        if (sim->parsed()) return cmd_simulate(simf);
        if (ord->parsed()) return cmd_order(ordf);
        if (plot->parsed()) return cmd_plot_expectiles(plotf);
    } catch (const xsdr::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const xsdr::InvalidOptions& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const xsdr::Error& e) {
        std::cerr << "estimator error: " << e.what() << "\n";
        return kExitEstimator;
    }
    return kExitConfig;
}
