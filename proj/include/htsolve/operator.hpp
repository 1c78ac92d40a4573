#pragma once
//
// Low-rank second-order operators in rescaled form and their adaptive
// compressed application.
//
// An operator bundles: the diffusion matrix (a_ij), its Tucker components
// T_1..T_4 supplied by per-mode backends, the hierarchical core matrices
// C^(node,t), and the exponential-sum scaling configuration (delta, h, n+,
// omega_min). apply() realizes w = S_out^-1 T_J S_in^-1 v with a certified
// output error, using the tau-sorted summation with per-step recompression.
//

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "htsolve/basis.hpp"
#include "htsolve/ht_tensor.hpp"
#include "htsolve/oracle.hpp"
#include "htsolve/reduction.hpp"
#include "htsolve/scaling.hpp"

namespace hts {

// one Tucker-sum term: component kind per mode (1 = identity) and a coefficient
struct TuckerTerm {
    std::vector<int> kinds;
    double coeff = 0.0;
};

class LowRankOperator {
public:
    LowRankOperator() = default;

    const DimensionTree& tree() const { return tree_; }
    int order() const { return tree_.order(); }
    const BackendSet& backends() const { return backends_; }
    const Eigen::MatrixXd& diffusion() const { return a_; }
    int component_count() const { return R_; }
    int core_rank(int node) const { return static_cast<int>(core_[static_cast<std::size_t>(node)].size()); }
    const std::vector<Eigen::MatrixXd>& core(int node) const
    {
        return core_[static_cast<std::size_t>(node)];
    }
    const std::vector<TuckerTerm>& terms() const { return terms_; }
    const ExpSumParams& expsum() const { return params_; }
    double delta() const { return params_.delta; }
    double omega_min() const { return omega_min_; }

    bool diagonal_structure() const;  // kinds {1,2} only, diagonal T2 backends

    // contraction of the hierarchical core to the coefficient c_n (dense oracle)
    double coefficient(const std::vector<int>& n) const;

    // certified spectral data of the rescaled operator on a default box
    double norm_upper() const;
    double inv_norm_upper() const;
    std::pair<double, double> spectral_interval() const;

    // internal constructors use this
    static LowRankOperator make(DimensionTree tree, Eigen::MatrixXd a, int R,
                                std::vector<std::vector<Eigen::MatrixXd>> core,
                                std::vector<TuckerTerm> terms, BackendSet backends, double delta);

private:
    void estimate_spectrum() const;

    DimensionTree tree_;
    Eigen::MatrixXd a_;
    int R_ = 0;
    std::vector<std::vector<Eigen::MatrixXd>> core_;  // per non-leaf node
    std::vector<TuckerTerm> terms_;
    BackendSet backends_;
    ExpSumParams params_;
    double omega_min_ = 0.0;
    mutable bool spectrum_ready_ = false;
    mutable double lam_min_ = 0.0, lam_max_ = 0.0;
};

LowRankOperator build_laplacian(int d, std::shared_ptr<const UnivariateBackend> backend,
                                double delta = 0.1);
LowRankOperator build_diagonal(const std::vector<double>& a_diag, BackendSet backends,
                               double delta = 0.1);
LowRankOperator build_tridiagonal(int d, std::shared_ptr<const UnivariateBackend> backend,
                                  double delta = 0.1);

// computable compression-error bound e_J(v); nonincreasing in J for fixed v
double a_posteriori_error(const LowRankOperator& op, const HTTensor& v, int J);
double a_posteriori_error(const LowRankOperator& op, const ContractionSet& c, int J);

struct ApplyParams {
    bool zero_shortcircuit = false;
    int J = 0;
    double T = 1.0;
    int m = 0;
};

ApplyParams choose_apply_params(const LowRankOperator& op, const HTTensor& v, double eta);

struct ApplyOptions {
    int rank_cap = 500;
    long long supp_cap = 1 << 22;
    // flop allowance for exact pair norms; certified bounds are used beyond it
    double tau_exact_budget = 4e9;
};

struct ApplyReport {
    double eta = 0.0;
    bool zero_output = false;
    int J = -1;
    double e_J = 0.0;
    double T_input = 1.0, T_output = 1.0, T_sym = 1.0;
    int m_input = 0, m_output = 0, m_sym = 0;
    int mhat_input = 0, mhat_output = 0, mhat_sym = 0;
    int pairs_total = 0, pairs_kept = 0, pairs_exact = 0;
    double discarded_mass = 0.0;
    double recompress_budget_used = 0.0;
    int max_rank_intermediate = 0;
    int max_rank_output = 0;
    long long supp_total_output = 0;
    bool rank_audit_ok = true;
    unsigned long long ops = 0;

    std::string to_json() const;
};

std::pair<HTTensor, ApplyReport> apply(const LowRankOperator& op, const HTTensor& v, double eta,
                                       const ApplyOptions& opts = {});

// dense assembly of the rescaled operator action on a box; *truncation_bound
// receives a certified bound on what the box cuts off
DenseBox apply_dense_reference(const LowRankOperator& op, const HTTensor& v,
                               const std::vector<Index>& box_dims,
                               double* truncation_bound = nullptr);

struct ConditionEstimate {
    double lam_min = 0.0;
    double lam_max = 0.0;
    bool converged = true;
};

ConditionEstimate estimate_condition(const LowRankOperator& op, int box_level);

}  // namespace hts
