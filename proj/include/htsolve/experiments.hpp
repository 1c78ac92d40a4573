#pragma once
//
// Experiment harness: configured solver runs with trace/figure emission.
//

#include <map>
#include <string>
#include <vector>

#include "htsolve/solver.hpp"
#include "htsolve/svg_plot.hpp"

namespace hts {

struct ExperimentConfig {
    std::vector<int> dims = {2, 4, 8, 16};
    double eps = 1e-3;
    bool eps_relative = false;  // if set, target eps * eps0 per dimension
    double delta = 0.1;
    double alpha = 1.0;
    // the iterate is recompressed inside the inner loop with beta1*eta; a
    // positive default keeps intermediate ranks bounded at desk scale
    double beta1 = 0.25;
    double beta2 = 0.5;
    int max_level = 18;          // backend window for diagonal operators
    int max_level_tridiag = 9;   // window for the banded cross terms
    int rank_cap = 500;
    long long supp_cap = 1 << 22;
    double tau_exact_budget = 4e9;
    std::string out_dir = "out";
};

struct ExperimentRun {
    int d = 0;
    SolveTrace trace;
    std::string csv_path, json_path;
    bool converged = false;
};

std::vector<ExperimentRun> run_poisson(const ExperimentConfig& cfg);
std::vector<ExperimentRun> run_tridiagonal(const ExperimentConfig& cfg);

// read trace CSVs back and render the residual/rank/ops figures
void emit_plots(const std::vector<std::string>& csv_paths, const std::vector<std::string>& labels,
                const std::string& out_dir, const std::string& stem);

struct ExpSumCertification {
    double delta = 0;
    double T = 0;
    int n = 0;
    double max_rel_err = 0;
    bool pass = false;
};

// sup over a log grid of sqrt(t)|t^{-1/2} - phi_{h,n}(t)|, optionally dumped as CSV
ExpSumCertification certify_expsum(double delta, double T, int grid_points,
                                   const std::string& csv_path = "");

// flat key=value configuration files ('#' comments)
std::map<std::string, std::string> parse_config_file(const std::string& path);
ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv);

}  // namespace hts
