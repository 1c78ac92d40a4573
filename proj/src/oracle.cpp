//
// Dense reference computations (densify, matricizations, exhaustive
// best-restriction search). dense_solve lives in operator.cpp next to the
// dense operator assembly.
//

#include "htsolve/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hts {

DenseBox::DenseBox(std::vector<Index> dims_, std::size_t cap) : dims(std::move(dims_))
{
    std::size_t total = 1;
    for (Index n : dims) {
        if (n < 1) throw parameter_error("DenseBox: dims must be positive");
        total *= static_cast<std::size_t>(n);
        if (total > cap) throw resource_error("DenseBox: box exceeds entry cap");
    }
    data.assign(total, 0.0);
}

double DenseBox::norm() const
{
    double s = 0.0;
    for (double x : data) s += x * x;
    return std::sqrt(s);
}

DenseBox densify(const HTTensor& v, const std::vector<Index>& dims, std::size_t cap)
{
    const int d = v.order();
    if (static_cast<int>(dims.size()) != d) throw structural_error("densify: dims length != order");
    DenseBox out(dims, cap);
    if (v.is_zero()) return out;
    // dense leaf frames on the box
    std::vector<Eigen::MatrixXd> leaf(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m) {
        const auto& sp = v.supp[static_cast<std::size_t>(m)];
        if (!sp.empty() && sp.back() > dims[static_cast<std::size_t>(m)])
            throw structural_error("densify: support escapes the box");
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(dims[static_cast<std::size_t>(m)],
                                                  v.frame[static_cast<std::size_t>(m)].cols());
        for (std::size_t i = 0; i < sp.size(); ++i)
            L.row(sp[i] - 1) = v.frame[static_cast<std::size_t>(m)].row(static_cast<Eigen::Index>(i));
        leaf[static_cast<std::size_t>(m)] = std::move(L);
    }
    // contract the chain from the deepest node upward; D holds the dense
    // factor of the current second child (modes p+2..d)
    Eigen::MatrixXd D;
    for (int p = d - 2; p >= 0; --p) {
        const auto [c1, c2] = v.tree.children(p);
        const Eigen::MatrixXd& L = leaf[static_cast<std::size_t>(v.tree.leaf_mode(c1) - 1)];
        const Eigen::MatrixXd& Rm = v.tree.is_leaf(c2) ? leaf[static_cast<std::size_t>(v.tree.leaf_mode(c2) - 1)] : D;
        const int rp = v.rank(p);
        Eigen::MatrixXd Dn(L.rows() * Rm.rows(), rp);
        for (int k = 0; k < rp; ++k) {
            // column k of the node factor: vec over (i, rest) with rest fastest
            const Eigen::MatrixXd X = L * v.transfer[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] *
                                      Rm.transpose();  // (i x rest)
            const Eigen::MatrixXd Xt = X.transpose();
            Dn.col(k) = Eigen::Map<const Eigen::VectorXd>(Xt.data(), Xt.size());
        }
        D = std::move(Dn);
    }
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = D(static_cast<Eigen::Index>(i), 0);
    return out;
}

Eigen::MatrixXd dense_matricization(const DenseBox& t, const DimensionTree& tree, int node)
{
    const int d = tree.order();
    const auto modes = tree.node_modes(node);
    std::vector<bool> in_node(static_cast<std::size_t>(d) + 1, false);
    for (int m : modes) in_node[static_cast<std::size_t>(m)] = true;
    std::size_t rows = 1, cols = 1;
    for (int m = 1; m <= d; ++m)
        (in_node[static_cast<std::size_t>(m)] ? rows : cols) *=
            static_cast<std::size_t>(t.dims[static_cast<std::size_t>(m - 1)]);
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<Index> nu(static_cast<std::size_t>(d), 1);
    for (std::size_t flat = 0; flat < t.data.size(); ++flat) {
        std::size_t rem = flat;
        for (int m = d; m >= 1; --m) {
            nu[static_cast<std::size_t>(m - 1)] =
                static_cast<Index>(rem % static_cast<std::size_t>(t.dims[static_cast<std::size_t>(m - 1)])) + 1;
            rem /= static_cast<std::size_t>(t.dims[static_cast<std::size_t>(m - 1)]);
        }
        std::size_t r = 0, c = 0;
        for (int m = 1; m <= d; ++m) {
            if (in_node[static_cast<std::size_t>(m)])
                r = r * static_cast<std::size_t>(t.dims[static_cast<std::size_t>(m - 1)]) +
                    static_cast<std::size_t>(nu[static_cast<std::size_t>(m - 1)] - 1);
            else
                c = c * static_cast<std::size_t>(t.dims[static_cast<std::size_t>(m - 1)]) +
                    static_cast<std::size_t>(nu[static_cast<std::size_t>(m - 1)] - 1);
        }
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.data[flat];
    }
    return M;
}

std::vector<double> best_restriction_profile(const DenseBox& v, int max_budget)
{
    const int d = v.order();
    if (d < 2) throw parameter_error("best_restriction_profile: order must be >= 2");
    std::size_t total_supp = 0;
    for (Index n : v.dims) total_supp += static_cast<std::size_t>(n);
    if (total_supp > 20) throw resource_error("best_restriction_profile: support too large for exhaustion");
    const double nsq = [&] {
        double s = 0.0;
        for (double x : v.data) s += x * x;
        return s;
    }();
    std::vector<double> best_err_sq(static_cast<std::size_t>(max_budget) + 1, nsq);

    const Index n1 = v.dims[0];
    std::size_t tail_size = 1;
    for (int m = 1; m < d; ++m) tail_size *= static_cast<std::size_t>(v.dims[static_cast<std::size_t>(m)]);

    // enumerate subsets of the modes 2..d jointly as one mask per mode;
    // for mode 1 the optimal choice given the rest is a top-n prefix
    std::vector<std::uint32_t> mask(static_cast<std::size_t>(d), 0);
    std::vector<double> s1(static_cast<std::size_t>(n1));
    while (true) {
        int mask_card = 0;
        for (int m = 1; m < d; ++m) mask_card += __builtin_popcount(mask[static_cast<std::size_t>(m)]);
        if (mask_card <= max_budget) {
            std::fill(s1.begin(), s1.end(), 0.0);
            for (std::size_t t = 0; t < tail_size; ++t) {
                std::size_t rem = t;
                bool inside = true;
                for (int m = d - 1; m >= 1; --m) {
                    const auto nm = static_cast<std::size_t>(v.dims[static_cast<std::size_t>(m)]);
                    const std::size_t im = rem % nm;
                    rem /= nm;
                    if (!((mask[static_cast<std::size_t>(m)] >> im) & 1u)) {
                        inside = false;
                        break;
                    }
                }
                if (!inside) continue;
                for (Index i1 = 0; i1 < n1; ++i1) {
                    const double x = v.data[static_cast<std::size_t>(i1) * tail_size + t];
                    s1[static_cast<std::size_t>(i1)] += x * x;
                }
            }
            std::sort(s1.begin(), s1.end(), std::greater<double>());
            double captured = 0.0;
            for (Index k = 0; k <= n1; ++k) {
                if (k > 0) captured += s1[static_cast<std::size_t>(k - 1)];
                const int budget = mask_card + static_cast<int>(k);
                if (budget > max_budget) break;
                best_err_sq[static_cast<std::size_t>(budget)] =
                    std::min(best_err_sq[static_cast<std::size_t>(budget)], nsq - captured);
            }
        }
        // next mask combination
        int m = 1;
        while (m < d) {
            if (++mask[static_cast<std::size_t>(m)] <
                (1u << static_cast<unsigned>(v.dims[static_cast<std::size_t>(m)])))
                break;
            mask[static_cast<std::size_t>(m)] = 0;
            ++m;
        }
        if (m == d) break;
    }
    std::vector<double> out(static_cast<std::size_t>(max_budget) + 1);
    double run = nsq;
    for (int b = 0; b <= max_budget; ++b) {
        run = std::min(run, best_err_sq[static_cast<std::size_t>(b)]);
        out[static_cast<std::size_t>(b)] = std::sqrt(std::max(0.0, run));
    }
    return out;
}

double best_restriction_error(const DenseBox& v, int budget)
{
    return best_restriction_profile(v, budget).back();
}

}  // namespace hts
