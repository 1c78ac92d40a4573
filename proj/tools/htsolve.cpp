//
// htsolve command line: experiment runs, exponential-sum certification,
// apply benchmarking, tensor utilities.
//
// Exit codes: 0 success, 2 certification failure, 3 resource limits.
//

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "htsolve/experiments.hpp"
#include "htsolve/ht_io.hpp"
#include "htsolve/reduction.hpp"

using namespace hts;

namespace {

int run_experiment(bool tridiag, std::vector<int> dims, double eps, const std::string& out,
                   const std::map<std::string, std::string>& overrides)
{
    ExperimentConfig cfg = config_from_map(overrides);
    if (!dims.empty()) cfg.dims = dims;
    if (eps > 0) cfg.eps = eps;
    if (!out.empty()) cfg.out_dir = out;
    const auto runs = tridiag ? run_tridiagonal(cfg) : run_poisson(cfg);
    bool all_ok = true;
    for (const auto& r : runs) {
        std::printf("d=%d  %s  rows=%zu  final_bound=%.3e  trace=%s\n", r.d,
                    r.converged ? "converged" : ("aborted: " + r.trace.abort_reason).c_str(),
                    r.trace.rows.size(),
                    r.trace.milestones.empty() ? 0.0 : r.trace.milestones.back().bound,
                    r.csv_path.c_str());
        all_ok = all_ok && r.converged;
    }
    // rank-cap aborts on the harder runs are reported, not fatal to the harness
    return all_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"adaptive low-rank tensor solver for high-dimensional elliptic problems"};
    app.require_subcommand(1);

    // solve --config FILE
    auto* sc_solve = app.add_subcommand("solve", "run the solver from a config file");
    std::string config_path;
    sc_solve->add_option("--config", config_path, "key = value configuration file")->required();

    // poisson / tridiag sweeps
    auto* sc_poisson = app.add_subcommand("poisson", "constant right-hand-side experiment sweep");
    auto* sc_tridiag = app.add_subcommand("tridiag", "tridiagonal diffusion experiment sweep");
    std::string dims_p = "2,4,8,16", dims_t = "2,3,4", out_dir = "out";
    double eps_p = 1e-3, eps_t = 1e-2;
    sc_poisson->add_option("--dims", dims_p, "comma separated tensor orders");
    sc_poisson->add_option("--eps", eps_p, "target accuracy");
    sc_poisson->add_option("--out", out_dir, "output directory");
    sc_tridiag->add_option("--dims", dims_t, "comma separated tensor orders");
    sc_tridiag->add_option("--eps", eps_t, "target accuracy");
    sc_tridiag->add_option("--out", out_dir, "output directory");

    // certify-expsum
    auto* sc_cert = app.add_subcommand("certify-expsum", "certify the t^{-1/2} exponential sum");
    double cert_delta = 0.1, cert_T = 1e8;
    int cert_grid = 1000;
    std::string cert_csv;
    sc_cert->add_option("--delta", cert_delta, "relative accuracy in (0,1)");
    sc_cert->add_option("--T", cert_T, "certified interval endpoint");
    sc_cert->add_option("--grid", cert_grid, "log-grid points");
    sc_cert->add_option("--csv", cert_csv, "optional CSV dump of (t, relative error)");

    // apply-bench
    auto* sc_bench = app.add_subcommand("apply-bench", "run apply on a saved tensor");
    std::string bench_tensor, bench_op = "laplacian";
    double bench_eta = 1e-4, bench_delta = 0.1;
    int bench_level = 9;
    sc_bench->add_option("--tensor", bench_tensor, "tensor container file")->required();
    sc_bench->add_option("--eta", bench_eta, "target tolerance");
    sc_bench->add_option("--operator", bench_op, "laplacian | tridiagonal");
    sc_bench->add_option("--delta", bench_delta, "scaling accuracy");
    sc_bench->add_option("--max-level", bench_level, "backend window level");

    // contractions export
    auto* sc_contr = app.add_subcommand("contractions", "export contractions of a saved tensor as CSV");
    std::string contr_tensor, contr_out = "contractions.csv";
    sc_contr->add_option("--tensor", contr_tensor, "tensor container file")->required();
    sc_contr->add_option("--out", contr_out, "CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_solve->parsed()) {
            const auto kv = parse_config_file(config_path);
            const bool tridiag = kv.count("operator") && kv.at("operator") == "tridiagonal";
            return run_experiment(tridiag, {}, -1.0, "", kv);
        }
        if (sc_poisson->parsed() || sc_tridiag->parsed()) {
            std::vector<int> dims;
            std::stringstream ss(sc_poisson->parsed() ? dims_p : dims_t);
            std::string tok;
            while (std::getline(ss, tok, ',')) dims.push_back(std::stoi(tok));
            return run_experiment(sc_tridiag->parsed(), dims, sc_poisson->parsed() ? eps_p : eps_t, out_dir, {});
        }
        if (sc_cert->parsed()) {
            const auto cert = certify_expsum(cert_delta, cert_T, cert_grid, cert_csv);
            std::printf("delta=%g T=%g n=%d max_rel_err=%.6e verdict=%s\n", cert.delta, cert.T,
                        cert.n, cert.max_rel_err, cert.pass ? "PASS" : "FAIL");
            return cert.pass ? 0 : 2;
        }
        if (sc_bench->parsed()) {
            const HTTensor v = load_httensor(bench_tensor);
            auto backend = std::make_shared<SineSpectralBackend>(1.0, bench_level);
            const LowRankOperator op = bench_op == "tridiagonal"
                                           ? build_tridiagonal(v.order(), backend, bench_delta)
                                           : build_laplacian(v.order(), backend, bench_delta);
            auto [w, rep] = apply(op, v, bench_eta);
            std::cout << rep.to_json() << "\n";
            return 0;
        }
        if (sc_contr->parsed()) {
            const HTTensor v = load_httensor(contr_tensor);
            const ContractionSet c = contractions(v);
            std::ofstream out(contr_out);
            if (!out) throw io_error("contractions: cannot open " + contr_out);
            out << "i,nu,value\n";
            out.precision(17);
            for (int m = 0; m < c.d; ++m)
                for (const auto& [nu, val] : c.pi[static_cast<std::size_t>(m)])
                    out << (m + 1) << ',' << nu << ',' << val << "\n";
            return 0;
        }
    } catch (const resource_error& e) {
        std::fprintf(stderr, "resource error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
