#pragma once
//
// Shared helpers for the test suites: seeded random tensors and dense
// comparison utilities.
//

#include <random>
#include <vector>

#include "htsolve/oracle.hpp"

namespace hts::testutil {

// random hierarchical tensor with the given per-node ranks and support sizes
inline HTTensor random_tensor(std::mt19937& rng, int d, int max_rank, int supp_size,
                              Index index_range)
{
    std::normal_distribution<double> dist;
    DimensionTree tree(d);
    HTTensor v(tree);
    std::uniform_int_distribution<Index> pick(1, index_range);
    std::uniform_int_distribution<int> rpick(1, max_rank);
    std::vector<int> rank(static_cast<std::size_t>(tree.node_count()), 1);
    for (int p = 1; p < tree.node_count(); ++p) rank[static_cast<std::size_t>(p)] = rpick(rng);
    for (int m = 0; m < d; ++m) {
        std::vector<Index> supp;
        while (static_cast<int>(supp.size()) < supp_size) {
            const Index cand = pick(rng);
            bool dup = false;
            for (Index s : supp) dup = dup || s == cand;
            if (!dup) supp.push_back(cand);
        }
        std::sort(supp.begin(), supp.end());
        v.supp[static_cast<std::size_t>(m)] = supp;
        const int r = rank[static_cast<std::size_t>(tree.leaf_node(m + 1))];
        v.frame[static_cast<std::size_t>(m)].resize(supp_size, r);
        for (int i = 0; i < supp_size; ++i)
            for (int k = 0; k < r; ++k) v.frame[static_cast<std::size_t>(m)](i, k) = dist(rng);
    }
    for (int p = 0; p < tree.nonleaf_count(); ++p) {
        auto [c1, c2] = tree.children(p);
        const int rp = p == 0 ? 1 : rank[static_cast<std::size_t>(p)];
        v.transfer[static_cast<std::size_t>(p)].clear();
        for (int k = 0; k < rp; ++k) {
            Eigen::MatrixXd B(rank[static_cast<std::size_t>(c1)], rank[static_cast<std::size_t>(c2)]);
            for (Eigen::Index i = 0; i < B.size(); ++i) B(i) = dist(rng);
            v.transfer[static_cast<std::size_t>(p)].push_back(std::move(B));
        }
    }
    return v;
}

inline std::vector<Index> box_of(const HTTensor& v, Index at_least = 1)
{
    std::vector<Index> dims(static_cast<std::size_t>(v.order()), at_least);
    if (v.is_zero()) return dims;
    for (int m = 0; m < v.order(); ++m)
        if (!v.supp[static_cast<std::size_t>(m)].empty())
            dims[static_cast<std::size_t>(m)] =
                std::max(at_least, v.supp[static_cast<std::size_t>(m)].back());
    return dims;
}

inline double dense_distance(const DenseBox& a, const DenseBox& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double q = a.data[i] - b.data[i];
        s += q * q;
    }
    return std::sqrt(s);
}

inline double dense_distance(const HTTensor& a, const HTTensor& b, const std::vector<Index>& dims)
{
    return dense_distance(densify(a, dims), densify(b, dims));
}

}  // namespace hts::testutil
