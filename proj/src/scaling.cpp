//
// Exponential-sum scaling machinery.
//

#include "htsolve/scaling.hpp"

#include <algorithm>
#include <cmath>

namespace hts {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrtPi = 0.56418958354775628695;  // pi^{-1/2}
}  // namespace

double quad_exponent(double x)
{
    // ln(1+e^x) evaluated stably on both tails
    const double l = x > 30.0 ? x + std::exp(-x) : std::log1p(std::exp(x));
    return l * l;
}

double quad_weight(double x) { return 2.0 * kInvSqrtPi / (1.0 + std::exp(-x)); }

ExpSumParams choose_params(double delta)
{
    if (!(delta > 0.0 && delta < 1.0)) throw parameter_error("choose_params: delta must be in (0,1)");
    ExpSumParams p;
    p.delta = delta;
    p.h = kPi * kPi / (5.0 * (std::abs(std::log(delta / 2.0)) + 4.0));
    p.n_plus = static_cast<int>(
        std::ceil(std::max(4.0 * kInvSqrtPi, std::sqrt(std::abs(std::log(delta / 2.0)))) / p.h));
    return p;
}

double phi(const ExpSumParams& p, int n, double t)
{
    if (t < 1.0) throw parameter_error("phi: certified interval starts at t = 1");
    if (n < 0) throw parameter_error("phi: n must be >= 0");
    double s = 0.0;
    for (int k = -n; k <= p.n_plus; ++k) {
        const double x = k * p.h;
        s += p.h * quad_weight(x) * std::exp(-quad_exponent(x) * t);
    }
    count_vec(static_cast<std::size_t>(n + p.n_plus + 1));
    return s;
}

int terms_required(double eta, double T, const ExpSumParams& p)
{
    if (eta <= 0.0) throw parameter_error("terms_required: eta must be positive");
    if (T < 1.0) throw parameter_error("terms_required: T must be >= 1");
    const double arg = std::log(2.0 * kInvSqrtPi) + std::abs(std::log(std::min(p.delta / 2.0, eta))) +
                       0.5 * std::log(T);
    return std::max(0, static_cast<int>(std::ceil(arg / p.h)));
}

double canonical_weight(const std::vector<Index>& nu, const BackendSet& backends)
{
    if (static_cast<int>(nu.size()) != backends.order())
        throw structural_error("canonical_weight: index length != order");
    double s = 0.0;
    for (int m = 0; m < backends.order(); ++m) {
        const double w = backends.mode(m).weight(nu[static_cast<std::size_t>(m)]);
        s += w * w;
    }
    return std::sqrt(s);
}

double omega_min_of(const BackendSet& backends)
{
    std::vector<Index> ones(static_cast<std::size_t>(backends.order()), 1);
    return canonical_weight(ones, backends);
}

double lambda_T_of_hull(const std::vector<Index>& max_per_mode, const BackendSet& backends)
{
    double s = 0.0;
    for (int m = 0; m < backends.order(); ++m) {
        const double w = backends.mode(m).weight(max_per_mode[static_cast<std::size_t>(m)]);
        s += w * w;
    }
    const double om = omega_min_of(backends);
    return std::max(1.0, s / (om * om));
}

double lambda_T_bound(const HTTensor& v, const BackendSet& backends)
{
    if (v.is_zero()) return 1.0;
    std::vector<Index> hull(static_cast<std::size_t>(v.order()), 1);
    for (int m = 0; m < v.order(); ++m) {
        if (v.supp[static_cast<std::size_t>(m)].empty()) return 1.0;
        hull[static_cast<std::size_t>(m)] = v.supp[static_cast<std::size_t>(m)].back();
    }
    return lambda_T_of_hull(hull, backends);
}

ScalingExpansion build_inverse_scaling(int n, const ExpSumParams& p, double omega_min)
{
    if (n < 0) throw parameter_error("build_inverse_scaling: n must be >= 0");
    if (omega_min <= 0.0) throw parameter_error("build_inverse_scaling: omega_min must be positive");
    ScalingExpansion e;
    e.params = p;
    e.n = n;
    e.omega_min = omega_min;
    e.terms.reserve(static_cast<std::size_t>(1 + p.n_plus + n));
    auto push = [&](int k) {
        const double x = k * p.h;
        e.terms.push_back({k, p.h * quad_weight(x) / omega_min,
                           quad_exponent(x) / (omega_min * omega_min)});
    };
    for (int k = 0; k <= p.n_plus; ++k) push(k);
    for (int k = -1; k >= -n; --k) push(k);
    return e;
}

double ScalingExpansion::inverse_weight(double omega_sq) const
{
    double s = 0.0;
    for (const auto& t : terms) s += t.weight * std::exp(-t.exponent * omega_sq);
    count_vec(terms.size());
    return s;
}

SeparableDiagonal ScalingExpansion::term_diagonal(int l, const BackendSet& backends) const
{
    if (l < 0 || l >= term_count()) throw parameter_error("term_diagonal: term index out of range");
    const auto& t = terms[static_cast<std::size_t>(l)];
    SeparableDiagonal D;
    D.label = l;
    const int d = backends.order();
    const double wroot = std::pow(t.weight, 1.0 / d);
    for (int m = 0; m < d; ++m) {
        const auto* be = backends.modes[static_cast<std::size_t>(m)].get();
        const double ex = t.exponent;
        D.factors.emplace_back([be, ex, wroot](Index nu) {
            const double w = be->weight(nu);
            return wroot * std::exp(-ex * w * w);
        });
    }
    return D;
}

double ScalingExpansion::term_sup_on_hull(int l, double omega_sq_min_hull) const
{
    const auto& t = terms[static_cast<std::size_t>(l)];
    return t.weight * std::exp(-t.exponent * omega_sq_min_hull);
}

HTTensor apply_inverse_scaling(const ScalingExpansion& e, const BackendSet& backends,
                               const HTTensor& v)
{
    if (v.is_zero()) return v;
    HTTensor acc = zero_tensor(v.tree);
    for (int l = 0; l < e.term_count(); ++l)
        acc = add(acc, apply_separable_diagonal(e.term_diagonal(l, backends), v));
    return acc;
}

}  // namespace hts
