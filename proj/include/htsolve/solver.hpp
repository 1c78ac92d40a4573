#pragma once
//
// The perturbed Richardson solver: right-hand-side approximation with
// certified tolerance, the inner/outer iteration with recompression and
// coarsening, and residual-based stopping.
//

#include <functional>
#include <vector>

#include "htsolve/operator.hpp"
#include "htsolve/trace.hpp"

namespace hts {

struct RhsFactor {
    std::function<double(Index)> value;
    // envelope |g(nu)| <= env_A * nu^{-env_p}, env_p > 1/2; drives tail certificates
    double env_A = 0.0;
    double env_p = 1.0;
};

// finite-rank coefficient data g = sum of rank-one terms
struct RhsProvider {
    std::vector<std::vector<RhsFactor>> terms;
    double t_excess = 0.5;
};

// coefficients of f == 1 in the sine basis: sqrt(2)(1 - (-1)^nu)/(pi nu)
RhsProvider constant_one_rhs(int d);

double rhs_norm_upper(const RhsProvider& g, const LowRankOperator& op);

struct RhsResult {
    HTTensor f;
    int n_scaling = 0;   // negative-side scaling terms used
    int rank_bound = 0;  // terms * (1 + n+ + n_scaling)
    int level_cutoff = 0;
};

// f_eta with ||f - f_eta|| <= eta
RhsResult rhs_approx(const RhsProvider& g, double eta, const LowRankOperator& op);

struct SolveParams {
    double eps = 1e-3;
    double alpha = 1.0;
    double beta1 = 0.0;
    double beta2 = 0.5;
    // zero means: derive from the operator's estimated spectrum
    double omega = 0.0, rho = 0.0, c_A = 0.0, eps0 = 0.0;
    int rank_cap = 500;
    long long supp_cap = 1 << 22;
    double tau_exact_budget = 4e9;
    int max_outer = 60;
    bool deterministic = true;  // kept for configuration surface; execution is sequential
};

struct SolveResult {
    HTTensor u;
    SolveTrace trace;
    double final_bound = 0.0;
};

// the inner-loop stopping quantity c_A rho ||r|| + (c_A rho + omega + b1 + b2) eta
double residual_bound(double c_A, double rho, double omega, double beta1, double beta2,
                      double residual_norm, double eta);

SolveResult solve(const LowRankOperator& op, const RhsProvider& f, SolveParams params);

}  // namespace hts
