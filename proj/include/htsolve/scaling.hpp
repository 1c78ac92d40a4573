#pragma once
//
// Sinc-quadrature exponential sums for t^{-1/2}, the canonical scaling
// weights, and finite separable inverse scalings.
//
// phi_{h,n}(t) = sum_{k=-n}^{n+} h w(kh) exp(-a(kh) t) with
// a(x) = ln^2(1+e^x), w(x) = 2 pi^{-1/2} (1+e^{-x})^{-1}; the finite inverse
// scaling acts entrywise as nu -> omega_min^{-1} phi_{h,n}((omega_nu/omega_min)^2),
// which factorizes over coordinates term by term.
//

#include <vector>

#include "htsolve/basis.hpp"
#include "htsolve/common.hpp"
#include "htsolve/ht_tensor.hpp"

namespace hts {

struct ExpSumParams {
    double delta = 0.1;
    double h = 0.0;
    int n_plus = 0;
};

// h at the maximal admissible value, n+ per the quadrature tail bound
ExpSumParams choose_params(double delta);

double quad_exponent(double x);  // ln^2(1+e^x)
double quad_weight(double x);    // 2 pi^{-1/2} / (1+e^{-x})

// the finite quadrature sum; t must be >= 1
double phi(const ExpSumParams& p, int n, double t);

// M(eta;T): negative-side term count certifying relative accuracy eta on [1,T]
int terms_required(double eta, double T, const ExpSumParams& p);
inline int terms_baseline(double T, const ExpSumParams& p) { return terms_required(p.delta / 2, T, p); }

// omega_nu = sqrt(sum_i omega_hat_i(nu_i)^2)
double canonical_weight(const std::vector<Index>& nu, const BackendSet& backends);
// omega_min is fixed once per problem instance at nu = (1,...,1)
double omega_min_of(const BackendSet& backends);

// smallest T with supp(v) inside Lambda_T, from the product hull of supports
double lambda_T_bound(const HTTensor& v, const BackendSet& backends);
double lambda_T_of_hull(const std::vector<Index>& max_per_mode, const BackendSet& backends);

struct ScalingTerm {
    int k = 0;          // quadrature node index
    double weight = 0;  // h w(kh) / omega_min
    double exponent = 0;  // a(kh) / omega_min^2
};

// finite separable expansion of the inverse scaling with 1 + n+ + n terms
struct ScalingExpansion {
    ExpSumParams params;
    int n = 0;
    double omega_min = 0.0;
    std::vector<ScalingTerm> terms;  // k = 0..n+, then -1..-n (refinement appends)

    int term_count() const { return static_cast<int>(terms.size()); }
    // entrywise inverse weight for a squared canonical weight
    double inverse_weight(double omega_sq) const;
    // the separable factor of term l at mode m (evaluated on demand)
    SeparableDiagonal term_diagonal(int l, const BackendSet& backends) const;
    // largest factor product over a support hull given per-mode minimal weights
    double term_sup_on_hull(int l, double omega_sq_min_hull) const;
};

ScalingExpansion build_inverse_scaling(int n, const ExpSumParams& p, double omega_min);

// exact application: sum of term-wise separable diagonal scalings
HTTensor apply_inverse_scaling(const ScalingExpansion& e, const BackendSet& backends,
                               const HTTensor& v);

}  // namespace hts
