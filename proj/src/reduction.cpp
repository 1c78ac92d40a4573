//
// Contraction-based coarsening.
//

#include "htsolve/reduction.hpp"

#include <algorithm>
#include <cmath>

namespace hts {

ContractionSet contractions(const HTTensor& v)
{
    ContractionSet c;
    c.d = v.order();
    c.pi.resize(static_cast<std::size_t>(c.d));
    if (v.is_zero()) return c;
    const HTTensor w = v.hsvd_standard ? v : hsvd(v);
    c.tensor_norm = w.sigma[0](0);
    for (int m = 0; m < c.d; ++m) {
        const int leaf = w.tree.leaf_node(m + 1);
        const auto& s = w.sigma[static_cast<std::size_t>(leaf)];
        const auto& U = w.frame[static_cast<std::size_t>(m)];
        for (std::size_t i = 0; i < w.supp[static_cast<std::size_t>(m)].size(); ++i) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < U.cols(); ++k) {
                const double x = U(static_cast<Eigen::Index>(i), k) * s(k);
                acc += x * x;
            }
            if (acc > 0.0)
                c.pi[static_cast<std::size_t>(m)].emplace_back(w.supp[static_cast<std::size_t>(m)][i],
                                                               std::sqrt(acc));
        }
        count_vec(w.supp[static_cast<std::size_t>(m)].size() * static_cast<std::size_t>(U.cols()));
    }
    return c;
}

namespace {

struct Item {
    double value;
    int mode;
    Index nu;
};

// nonincreasing rearrangement; ties broken by (smaller mode, smaller index)
std::vector<Item> sorted_items(const ContractionSet& c)
{
    std::vector<Item> items;
    for (int m = 0; m < c.d; ++m)
        for (const auto& [nu, val] : c.pi[static_cast<std::size_t>(m)]) items.push_back({val, m, nu});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.mode != b.mode) return a.mode < b.mode;
        return a.nu < b.nu;
    });
    return items;
}

}  // namespace

std::vector<double> coarsening_profile(const ContractionSet& c)
{
    const auto items = sorted_items(c);
    std::vector<double> mu(items.size() + 1, 0.0);
    for (std::size_t i = items.size(); i-- > 0;)
        mu[i] = mu[i + 1] + items[i].value * items[i].value;
    for (auto& x : mu) x = std::sqrt(std::max(0.0, x));
    return mu;
}

DimBins dim_bins(const ContractionSet& c, long long N)
{
    if (N < 0) throw parameter_error("dim_bins: N must be >= 0");
    const auto items = sorted_items(c);
    DimBins out;
    out.bins.resize(static_cast<std::size_t>(c.d));
    double tail_sq = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (static_cast<long long>(i) < N)
            out.bins[static_cast<std::size_t>(items[i].mode)].push_back(items[i].nu);
        else
            tail_sq += items[i].value * items[i].value;
    }
    for (auto& b : out.bins) std::sort(b.begin(), b.end());
    out.mu = std::sqrt(tail_sq);
    out.used = static_cast<int>(std::min<long long>(N, static_cast<long long>(items.size())));
    return out;
}

DimBins dim_bins(const HTTensor& v, long long N) { return dim_bins(contractions(v), N); }

HTTensor coarsen_to_tolerance(const HTTensor& v, double eta)
{
    if (eta <= 0.0) throw tolerance_error("coarsen_to_tolerance: tolerance must be positive");
    if (v.is_zero()) return v;
    const ContractionSet c = contractions(v);
    const auto mu = coarsening_profile(c);
    long long N = 0;
    while (mu[static_cast<std::size_t>(N)] > eta) ++N;  // mu.back() == 0, so this terminates
    const DimBins bins = dim_bins(c, N);
    for (const auto& b : bins.bins)
        if (b.empty()) return zero_tensor(v.tree);
    return restrict_to_product(v, bins.bins);
}

HTTensor combined_reduce(const HTTensor& v, double eta, double alpha)
{
    if (eta <= 0.0) throw tolerance_error("combined_reduce: tolerance must be positive");
    if (alpha <= 0.0) throw parameter_error("combined_reduce: alpha must be positive");
    if (v.is_zero()) return v;
    const int d = v.order();
    const double kp = kappa_recompress(d), kc = kappa_coarsen(d);
    const HTTensor w = recompress(v, kp * (1.0 + alpha) * eta);
    if (w.is_zero()) return w;
    return coarsen_to_tolerance(w, kc * (kp + 1.0) * (1.0 + alpha) * eta);
}

}  // namespace hts
