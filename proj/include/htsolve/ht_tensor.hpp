#pragma once
//
// Hierarchical tensor representation on the linear dimension tree.
//
// A tensor on the index universe (positive integers)^d is stored as
//   - per leaf mode i: a sorted support list supp[i] and a mode frame
//     U^(i) of shape (#supp[i] x r_i), rows aligned with supp[i];
//   - per non-leaf node p: transfer matrices B^(p,k), k < r_p, each of
//     shape r_c1 x r_c2; the root has r_root = 1.
// The zero tensor has all ranks 0 and empty frames; every operation
// accepts it.
//

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "htsolve/common.hpp"
#include "htsolve/dimension_tree.hpp"

namespace hts {

// one separable diagonal term: entries are multiplied by prod_i factors[i](nu_i)
struct SeparableDiagonal {
    std::vector<std::function<double(Index)>> factors;
    int label = 0;
};

class HTTensor {
public:
    HTTensor() = default;
    explicit HTTensor(DimensionTree t)
        : tree(std::move(t)),
          supp(tree.order()),
          frame(tree.order()),
          transfer(tree.nonleaf_count())
    {
        for (auto& f : frame) f.resize(0, 0);
    }

    DimensionTree tree;
    std::vector<std::vector<Index>> supp;             // per mode, sorted ascending
    std::vector<Eigen::MatrixXd> frame;               // per mode
    std::vector<std::vector<Eigen::MatrixXd>> transfer;  // per non-leaf node id
    // singular values per node id (index 0 holds {norm}); present after hsvd
    std::vector<Eigen::VectorXd> sigma;
    bool hsvd_standard = false;

    int order() const { return tree.order(); }
    bool is_zero() const
    {
        return tree.order() == 0 || transfer.empty() || transfer[0].empty();
    }

    int rank(int node) const
    {
        if (tree.is_leaf(node)) return static_cast<int>(frame[tree.leaf_mode(node) - 1].cols());
        if (node == 0) return transfer[0].empty() ? 0 : 1;
        return static_cast<int>(transfer[node].size());
    }

    // rank vector over the non-root nodes, indexed by node id - 1
    std::vector<int> rank_vector() const
    {
        std::vector<int> r(tree.node_count() - 1);
        for (int p = 1; p < tree.node_count(); ++p) r[p - 1] = rank(p);
        return r;
    }

    int max_rank() const
    {
        int r = 0;
        for (int p = 1; p < tree.node_count(); ++p) r = std::max(r, rank(p));
        return r;
    }

    long long total_support() const
    {
        long long s = 0;
        for (const auto& sp : supp) s += static_cast<long long>(sp.size());
        return s;
    }

    void clear_sigma()
    {
        sigma.clear();
        hsvd_standard = false;
    }

    void check_consistent() const;  // throws structural_error on malformed data
};

HTTensor zero_tensor(const DimensionTree& tree);

// rank-one tensor from per-mode sparse factors; a zero factor yields the
// zero tensor (all ranks 0)
HTTensor from_rank_one(const DimensionTree& tree,
                       const std::vector<std::vector<std::pair<Index, double>>>& factors);

HTTensor add(const HTTensor& a, const HTTensor& b);
HTTensor scale(const HTTensor& a, double c);

HTTensor apply_separable_diagonal(const SeparableDiagonal& D, const HTTensor& v);

double inner_product(const HTTensor& a, const HTTensor& b);
double norm(const HTTensor& a);

double evaluate_entry(const HTTensor& v, const std::vector<Index>& nu);

HTTensor orthogonalize(const HTTensor& v);

// hierarchical SVD: orthogonalizes and rotates all node bases into
// singular-vector form; the result carries node-wise singular values
HTTensor hsvd(const HTTensor& v);

// truncation of an hsvd-standard tensor to the rank vector r (indexed by
// node id - 1); returns the truncated tensor and the error certificate
// lambda_r = sqrt(sum over discarded sigma^2)
std::pair<HTTensor, double> truncate_to_rank(const HTTensor& v, const std::vector<int>& r);

// near-minimal-max-rank truncation with ||v - result|| <= eta; requires
// hsvd-standard input, eta > 0
HTTensor truncate_to_tolerance(const HTTensor& v, double eta);

// hsvd + truncate; eta = 0 drops only numerically zero singular values
HTTensor recompress(const HTTensor& v, double eta);

// restrict to a product set: keep only rows with index in keep[i] (sorted)
HTTensor restrict_to_product(const HTTensor& v, const std::vector<std::vector<Index>>& keep);

}  // namespace hts
