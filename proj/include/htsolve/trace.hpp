#pragma once
//
// Per-iteration solve traces, CSV/JSON emission, CSV round-trip parsing.
//

#include <string>
#include <vector>

#include "htsolve/common.hpp"

namespace hts {

struct TraceRow {
    int k = 0, j = 0;
    double eta = 0.0;
    double residual = 0.0;
    double bound = 0.0;
    int max_rank_iterate = 0;
    int max_rank_intermediate = 0;
    long long supp_total = 0;
    unsigned long long ops_cum = 0;
    // audited tolerances (not part of the CSV schema)
    double tol_apply = 0.0, tol_rhs = 0.0, tol_recompress = 0.0, tol_coarsen = 0.0;
};

struct Milestone {
    int k = 0;
    double eps_k = 0.0;  // 2^{-k} eps0
    double bound = 0.0;  // certified error bound at u_k
    bool certified = false;
    int max_rank = 0;
    unsigned long long ops_cum = 0;
};

struct SolveTrace {
    std::vector<TraceRow> rows;
    std::vector<Milestone> milestones;
    double eps = 0.0, eps0 = 0.0;
    double omega = 0.0, rho = 0.0, c_A = 0.0;
    double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;
    double alpha = 0.0, beta1 = 0.0, beta2 = 0.0;
    int inner_cap = 0;
    unsigned long long ops_setup = 0, ops_total = 0;
    bool aborted = false;
    std::string abort_reason;

    std::string to_csv() const;
    std::string to_json() const;
};

inline constexpr const char* kTraceCsvHeader =
    "k,j,residual,bound,max_rank_iterate,max_rank_intermediate,supp_total,ops_cum";

// parse rows written by to_csv(); throws io_error naming the offending line
std::vector<TraceRow> parse_trace_csv(const std::string& text);

}  // namespace hts
