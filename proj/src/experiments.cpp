//
// Harness runs, figure emission, exponential-sum certification.
//

#include "htsolve/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hts {

namespace {

SolveParams params_from_config(const ExperimentConfig& cfg)
{
    SolveParams p;
    p.eps = cfg.eps;
    p.alpha = cfg.alpha;
    p.beta1 = cfg.beta1;
    p.beta2 = cfg.beta2;
    p.rank_cap = cfg.rank_cap;
    p.supp_cap = cfg.supp_cap;
    p.tau_exact_budget = cfg.tau_exact_budget;
    return p;
}

ExperimentRun run_one(const LowRankOperator& op, const ExperimentConfig& cfg, int d,
                      const std::string& stem)
{
    ExperimentRun run;
    run.d = d;
    SolveParams p = params_from_config(cfg);
    const RhsProvider f = constant_one_rhs(d);
    if (cfg.eps_relative) {
        // derive eps0 the same way solve() does, then scale the target
        const double crude = 1e-2 * rhs_norm_upper(f, op);
        const RhsResult f0 = rhs_approx(f, crude, op);
        p.eps = cfg.eps * op.inv_norm_upper() * (norm(f0.f) + crude);
    }
    SolveResult res = solve(op, f, p);
    run.trace = std::move(res.trace);
    run.converged = !run.trace.aborted;
    std::filesystem::create_directories(cfg.out_dir);
    run.csv_path = cfg.out_dir + "/" + stem + "_d" + std::to_string(d) + ".csv";
    run.json_path = cfg.out_dir + "/" + stem + "_d" + std::to_string(d) + ".json";
    std::ofstream(run.csv_path) << run.trace.to_csv();
    std::ofstream(run.json_path) << run.trace.to_json() << "\n";
    return run;
}

}  // namespace

std::vector<ExperimentRun> run_poisson(const ExperimentConfig& cfg)
{
    std::vector<ExperimentRun> runs;
    for (int d : cfg.dims) {
        auto backend = std::make_shared<SineSpectralBackend>(1.0, cfg.max_level);
        const LowRankOperator op = build_laplacian(d, backend, cfg.delta);
        runs.push_back(run_one(op, cfg, d, "poisson"));
    }
    std::vector<std::string> paths, labels;
    for (const auto& r : runs) {
        paths.push_back(r.csv_path);
        labels.push_back("d=" + std::to_string(r.d));
    }
    emit_plots(paths, labels, cfg.out_dir, "poisson");
    return runs;
}

std::vector<ExperimentRun> run_tridiagonal(const ExperimentConfig& cfg)
{
    std::vector<ExperimentRun> runs;
    for (int d : cfg.dims) {
        auto backend = std::make_shared<SineSpectralBackend>(1.0, cfg.max_level_tridiag);
        const LowRankOperator op = build_tridiagonal(d, backend, cfg.delta);
        runs.push_back(run_one(op, cfg, d, "tridiag"));
    }
    std::vector<std::string> paths, labels;
    for (const auto& r : runs) {
        paths.push_back(r.csv_path);
        labels.push_back("d=" + std::to_string(r.d));
    }
    emit_plots(paths, labels, cfg.out_dir, "tridiag");
    return runs;
}

void emit_plots(const std::vector<std::string>& csv_paths, const std::vector<std::string>& labels,
                const std::string& out_dir, const std::string& stem)
{
    static const char* colors[] = {"#1f6fb2", "#b24a1f", "#3a9151", "#7a4ab2", "#b29a1f", "#666666"};
    std::vector<PlotSeries> res_series, rank_series, ops_series;
    for (std::size_t i = 0; i < csv_paths.size(); ++i) {
        std::ifstream in(csv_paths[i]);
        if (!in) throw io_error("emit_plots: cannot open " + csv_paths[i]);
        std::stringstream buf;
        buf << in.rdbuf();
        const auto rows = parse_trace_csv(buf.str());
        PlotSeries resid, bound, rank, ops;
        resid.label = labels[i] + " residual";
        resid.color = colors[i % 6];
        resid.line = false;
        bound.label = labels[i] + " bound";
        bound.color = colors[i % 6];
        bound.markers = false;
        rank.label = labels[i];
        rank.color = colors[i % 6];
        ops.label = labels[i];
        ops.color = colors[i % 6];
        double first_bound = rows.empty() ? 1.0 : rows.front().bound;
        for (std::size_t t = 0; t < rows.size(); ++t) {
            const auto& r = rows[t];
            resid.x.push_back(static_cast<double>(t + 1));
            resid.y.push_back(r.residual);
            bound.x.push_back(static_cast<double>(t + 1));
            bound.y.push_back(r.bound);
            rank.x.push_back(r.bound);
            rank.y.push_back(r.max_rank_iterate);
            ops.x.push_back(first_bound / r.bound);  // error estimate reduction
            ops.y.push_back(static_cast<double>(r.ops_cum));
        }
        res_series.push_back(std::move(resid));
        res_series.push_back(std::move(bound));
        rank_series.push_back(std::move(rank));
        ops_series.push_back(std::move(ops));
    }
    std::filesystem::create_directories(out_dir);
    PlotSpec rs{"residual estimates and error bounds", "total inner iterations", "norm", false, true};
    write_svg(out_dir + "/" + stem + "_residuals.svg", rs, res_series);
    PlotSpec ks{"iterate ranks vs error estimate", "error estimate", "max rank", true, false};
    write_svg(out_dir + "/" + stem + "_ranks.svg", ks, rank_series);
    PlotSpec os{"operation count vs error reduction", "error estimate reduction", "operations", true,
                true};
    write_svg(out_dir + "/" + stem + "_ops.svg", os, ops_series);
}

ExpSumCertification certify_expsum(double delta, double T, int grid_points, const std::string& csv_path)
{
    if (T <= 1.0) throw parameter_error("certify_expsum: T must exceed 1");
    if (grid_points < 2) throw parameter_error("certify_expsum: need at least 2 grid points");
    ExpSumCertification cert;
    cert.delta = delta;
    cert.T = T;
    const ExpSumParams p = choose_params(delta);
    cert.n = terms_baseline(T, p);
    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path);
        if (!csv) throw io_error("certify_expsum: cannot open " + csv_path);
        csv << "t,rel_err\n";
        csv.precision(17);
    }
    for (int gidx = 0; gidx < grid_points; ++gidx) {
        const double t = std::exp(std::log(T) * gidx / (grid_points - 1));
        const double rel = std::sqrt(t) * std::abs(1.0 / std::sqrt(t) - phi(p, cert.n, t));
        cert.max_rel_err = std::max(cert.max_rel_err, rel);
        if (csv.is_open()) csv << t << ',' << rel << "\n";
    }
    cert.pass = cert.max_rel_err <= delta;
    return cert;
}

std::map<std::string, std::string> parse_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw io_error("config: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw io_error("config: line " + std::to_string(lineno) + ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv)
{
    ExperimentConfig cfg;
    auto getd = [&](const char* k, double& v) {
        if (auto it = kv.find(k); it != kv.end()) v = std::stod(it->second);
    };
    auto geti = [&](const char* k, int& v) {
        if (auto it = kv.find(k); it != kv.end()) v = std::stoi(it->second);
    };
    if (auto it = kv.find("dims"); it != kv.end()) {
        cfg.dims.clear();
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.dims.push_back(std::stoi(tok));
    }
    getd("eps", cfg.eps);
    getd("delta", cfg.delta);
    getd("alpha", cfg.alpha);
    getd("beta1", cfg.beta1);
    getd("beta2", cfg.beta2);
    getd("tau_budget", cfg.tau_exact_budget);
    geti("max_level", cfg.max_level);
    geti("max_level_tridiag", cfg.max_level_tridiag);
    geti("rank_cap", cfg.rank_cap);
    if (auto it = kv.find("supp_cap"); it != kv.end()) cfg.supp_cap = std::stoll(it->second);
    if (auto it = kv.find("out"); it != kv.end()) cfg.out_dir = it->second;
    if (auto it = kv.find("eps_relative"); it != kv.end())
        cfg.eps_relative = it->second == "1" || it->second == "true";
    return cfg;
}

}  // namespace hts
