#pragma once
//
// Dense brute-force references: dense expansion of hierarchical tensors on
// index boxes, dense matricizations, exhaustive best-product-restriction
// search, and a dense solver for box-truncated systems.
//

#include <Eigen/Dense>
#include <vector>

#include "htsolve/ht_tensor.hpp"

namespace hts {

class LowRankOperator;

inline constexpr std::size_t kDenseBoxCap = 1'000'000;

// dense tensor on the box [1, dims[0]] x ... x [1, dims[d-1]], row-major
// with the last mode fastest
struct DenseBox {
    std::vector<Index> dims;
    std::vector<double> data;

    DenseBox() = default;
    explicit DenseBox(std::vector<Index> dims_, std::size_t cap = kDenseBoxCap);

    int order() const { return static_cast<int>(dims.size()); }
    std::size_t size() const { return data.size(); }

    std::size_t flat(const std::vector<Index>& nu) const
    {
        std::size_t idx = 0;
        for (std::size_t m = 0; m < dims.size(); ++m) {
            if (nu[m] < 1 || nu[m] > dims[m]) throw index_error("DenseBox: index outside box");
            idx = idx * static_cast<std::size_t>(dims[m]) + static_cast<std::size_t>(nu[m] - 1);
        }
        return idx;
    }
    double& at(const std::vector<Index>& nu) { return data[flat(nu)]; }
    double at(const std::vector<Index>& nu) const { return data[flat(nu)]; }

    double norm() const;
};

DenseBox densify(const HTTensor& v, const std::vector<Index>& dims,
                 std::size_t cap = kDenseBoxCap);

// matricization of a dense tensor at a tree node: rows indexed by the modes
// in the node, columns by the complement (test oracle)
Eigen::MatrixXd dense_matricization(const DenseBox& t, const DimensionTree& tree, int node);

// min over all product sets with per-mode budgets summing to <= N of the
// restriction error ||v - R v||; profile[N] gives the value for each N
std::vector<double> best_restriction_profile(const DenseBox& v, int max_budget);
double best_restriction_error(const DenseBox& v, int budget);

// direct solve of the box-truncated rescaled system (SPD checked)
DenseBox dense_solve(const LowRankOperator& op, const DenseBox& f);

}  // namespace hts
