#pragma once
//
// Linear binary dimension tree over modes {1..d}.
//
// Node ids: 0 is the root {1..d}; node p for p = 1..d-2 is {p+1,..,d};
// node d-1+m-1 is the leaf {m}, m = 1..d. Every non-leaf node p spans the
// interval [p+1-?]: node p (p <= d-2) spans [p+1, d]; its children are the
// leaf {p+1} and, for p < d-2, the node p+1, while node d-2 has the two
// leaves {d-1} and {d} as children.
//

#include <utility>
#include <vector>

#include "htsolve/common.hpp"

namespace hts {

class DimensionTree {
public:
    DimensionTree() = default;
    explicit DimensionTree(int d) : d_(d)
    {
        if (d < 2) throw parameter_error("DimensionTree: order must be >= 2");
    }

    int order() const { return d_; }
    int node_count() const { return 2 * d_ - 1; }
    int interior_count() const { return d_ - 2; }
    int nonleaf_count() const { return d_ - 1; }

    bool is_leaf(int node) const { return node >= d_ - 1; }
    int leaf_mode(int node) const { return node - d_ + 2; }  // 1-based mode
    int leaf_node(int mode) const { return d_ - 2 + mode; }

    // inclusive 1-based mode interval covered by a node
    std::pair<int, int> span(int node) const
    {
        if (is_leaf(node)) {
            int m = leaf_mode(node);
            return {m, m};
        }
        return {node + 1, d_};
    }

    std::vector<int> node_modes(int node) const
    {
        auto [lo, hi] = span(node);
        std::vector<int> out;
        for (int m = lo; m <= hi; ++m) out.push_back(m);
        return out;
    }

    // children of a non-leaf node; first child is always a leaf
    std::pair<int, int> children(int node) const
    {
        if (is_leaf(node)) throw structural_error("children: leaf node");
        if (node == d_ - 2) return {leaf_node(d_ - 1), leaf_node(d_)};
        return {leaf_node(node + 1), node + 1};
    }

    int parent(int node) const
    {
        if (node == 0) throw structural_error("parent: root");
        if (!is_leaf(node)) return node - 1;
        int m = leaf_mode(node);
        return m <= d_ - 1 ? m - 1 : d_ - 2;
    }

    bool is_first_child(int node) const
    {
        int p = parent(node);
        return children(p).first == node;
    }

    bool operator==(const DimensionTree& o) const { return d_ == o.d_; }
    bool operator!=(const DimensionTree& o) const { return d_ != o.d_; }

private:
    int d_ = 0;
};

// build_linear_tree(d): the 2d-1 node tree {1..d},{2..d},...,{d-1,d},{1},...,{d}
inline DimensionTree build_linear_tree(int d) { return DimensionTree(d); }

}  // namespace hts
