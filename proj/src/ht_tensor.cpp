//
// Hierarchical tensor arithmetic, orthogonalization, HSVD, truncation.
//

#include "htsolve/ht_tensor.hpp"

#include <Eigen/QR>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace hts {

OpsCounters& ops_counters()
{
    static OpsCounters c;
    return c;
}

void HTTensor::check_consistent() const
{
    if (tree.order() == 0) return;
    const int d = tree.order();
    if (static_cast<int>(supp.size()) != d || static_cast<int>(frame.size()) != d ||
        static_cast<int>(transfer.size()) != tree.nonleaf_count())
        throw structural_error("HTTensor: container sizes do not match tree");
    if (is_zero()) return;
    for (int m = 1; m <= d; ++m) {
        if (frame[m - 1].rows() != static_cast<Eigen::Index>(supp[m - 1].size()))
            throw structural_error("HTTensor: frame rows != support size");
        if (!std::is_sorted(supp[m - 1].begin(), supp[m - 1].end()))
            throw structural_error("HTTensor: support not sorted");
    }
    for (int p = 0; p < tree.nonleaf_count(); ++p) {
        auto [c1, c2] = tree.children(p);
        const int r1 = rank(c1), r2 = rank(c2);
        if (p == 0 && transfer[0].size() != 1)
            throw structural_error("HTTensor: root rank must be 1");
        for (const auto& B : transfer[p])
            if (B.rows() != r1 || B.cols() != r2)
                throw structural_error("HTTensor: transfer shape mismatch");
    }
}

HTTensor zero_tensor(const DimensionTree& tree) { return HTTensor(tree); }

HTTensor from_rank_one(const DimensionTree& tree,
                       const std::vector<std::vector<std::pair<Index, double>>>& factors)
{
    const int d = tree.order();
    if (static_cast<int>(factors.size()) != d)
        throw structural_error("from_rank_one: need one factor per mode");
    HTTensor v(tree);
    for (int m = 0; m < d; ++m) {
        std::vector<std::pair<Index, double>> f;
        for (const auto& [idx, val] : factors[m]) {
            if (idx < 1) throw index_error("from_rank_one: indices must be >= 1");
            if (val != 0.0) f.emplace_back(idx, val);
        }
        if (f.empty()) return zero_tensor(tree);  // zero factor -> zero tensor
        std::sort(f.begin(), f.end());
        for (std::size_t i = 1; i < f.size(); ++i)
            if (f[i].first == f[i - 1].first)
                throw structural_error("from_rank_one: duplicate index in factor");
        v.supp[m].resize(f.size());
        v.frame[m].resize(static_cast<Eigen::Index>(f.size()), 1);
        for (std::size_t i = 0; i < f.size(); ++i) {
            v.supp[m][i] = f[i].first;
            v.frame[m](static_cast<Eigen::Index>(i), 0) = f[i].second;
        }
    }
    for (int p = 0; p < tree.nonleaf_count(); ++p)
        v.transfer[p] = {Eigen::MatrixXd::Ones(1, 1)};
    return v;
}

namespace {

std::vector<Index> merge_supports(const std::vector<Index>& a, const std::vector<Index>& b)
{
    std::vector<Index> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// rows of `sub` (aligned with subsupp) scattered into the merged support
Eigen::MatrixXd scatter_rows(const std::vector<Index>& merged, const std::vector<Index>& subsupp,
                             const Eigen::MatrixXd& sub)
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(merged.size()), sub.cols());
    std::size_t j = 0;
    for (std::size_t i = 0; i < merged.size() && j < subsupp.size(); ++i) {
        if (merged[i] == subsupp[j]) {
            out.row(static_cast<Eigen::Index>(i)) = sub.row(static_cast<Eigen::Index>(j));
            ++j;
        }
    }
    return out;
}

}  // namespace

HTTensor add(const HTTensor& a, const HTTensor& b)
{
    if (a.tree != b.tree) throw structural_error("add: dimension trees differ");
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const int d = a.order();
    HTTensor out(a.tree);
    for (int m = 0; m < d; ++m) {
        out.supp[m] = merge_supports(a.supp[m], b.supp[m]);
        const auto fa = scatter_rows(out.supp[m], a.supp[m], a.frame[m]);
        const auto fb = scatter_rows(out.supp[m], b.supp[m], b.frame[m]);
        out.frame[m].resize(fa.rows(), fa.cols() + fb.cols());
        out.frame[m] << fa, fb;
    }
    for (int p = 0; p < a.tree.nonleaf_count(); ++p) {
        auto [c1, c2] = a.tree.children(p);
        const int a1 = a.rank(c1), a2 = a.rank(c2);
        const int b1 = b.rank(c1), b2 = b.rank(c2);
        if (p == 0) {
            Eigen::MatrixXd B = Eigen::MatrixXd::Zero(a1 + b1, a2 + b2);
            B.topLeftCorner(a1, a2) = a.transfer[0][0];
            B.bottomRightCorner(b1, b2) = b.transfer[0][0];
            out.transfer[0] = {std::move(B)};
        } else {
            out.transfer[p].clear();
            out.transfer[p].reserve(a.transfer[p].size() + b.transfer[p].size());
            for (const auto& Ba : a.transfer[p]) {
                Eigen::MatrixXd B = Eigen::MatrixXd::Zero(a1 + b1, a2 + b2);
                B.topLeftCorner(a1, a2) = Ba;
                out.transfer[p].push_back(std::move(B));
            }
            for (const auto& Bb : b.transfer[p]) {
                Eigen::MatrixXd B = Eigen::MatrixXd::Zero(a1 + b1, a2 + b2);
                B.bottomRightCorner(b1, b2) = Bb;
                out.transfer[p].push_back(std::move(B));
            }
        }
    }
    count_vec(static_cast<std::size_t>(out.total_support()));
    return out;
}

HTTensor scale(const HTTensor& a, double c)
{
    if (a.is_zero() || c == 0.0) return a.is_zero() ? a : zero_tensor(a.tree);
    HTTensor out = a;
    out.transfer[0][0] *= c;
    out.clear_sigma();
    return out;
}

HTTensor apply_separable_diagonal(const SeparableDiagonal& D, const HTTensor& v)
{
    const int d = v.order();
    if (static_cast<int>(D.factors.size()) != d)
        throw structural_error("apply_separable_diagonal: factor count != order");
    if (v.is_zero()) return v;
    HTTensor out = v;
    for (int m = 0; m < d; ++m) {
        for (std::size_t i = 0; i < out.supp[m].size(); ++i)
            out.frame[m].row(static_cast<Eigen::Index>(i)) *= D.factors[m](out.supp[m][i]);
        count_diag(out.supp[m].size() * static_cast<std::size_t>(out.frame[m].cols()));
    }
    out.clear_sigma();
    return out;
}

double inner_product(const HTTensor& a, const HTTensor& b)
{
    if (a.tree != b.tree) throw structural_error("inner_product: dimension trees differ");
    if (a.is_zero() || b.is_zero()) return 0.0;
    const int d = a.order();
    // leaf Gram matrices over the common support
    std::vector<Eigen::MatrixXd> leafG(d);
    for (int m = 0; m < d; ++m) {
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(a.frame[m].cols(), b.frame[m].cols());
        std::size_t i = 0, j = 0;
        while (i < a.supp[m].size() && j < b.supp[m].size()) {
            if (a.supp[m][i] < b.supp[m][j])
                ++i;
            else if (a.supp[m][i] > b.supp[m][j])
                ++j;
            else {
                G.noalias() += a.frame[m].row(static_cast<Eigen::Index>(i)).transpose() *
                               b.frame[m].row(static_cast<Eigen::Index>(j));
                ++i;
                ++j;
            }
        }
        count_gemm(static_cast<std::size_t>(G.rows()), static_cast<std::size_t>(G.cols()),
                   std::min(a.supp[m].size(), b.supp[m].size()));
        leafG[m] = std::move(G);
    }
    // sweep the chain from the deepest node up to the root
    auto node_gram = [&](int node) -> const Eigen::MatrixXd& { return leafG[a.tree.leaf_mode(node) - 1]; };
    Eigen::MatrixXd M2;  // Gram at child-2 of the current node
    for (int p = a.tree.nonleaf_count() - 1; p >= 0; --p) {
        auto [c1, c2] = a.tree.children(p);
        const Eigen::MatrixXd& M1 = node_gram(c1);
        const Eigen::MatrixXd& Mc2 = a.tree.is_leaf(c2) ? node_gram(c2) : M2;
        Eigen::MatrixXd Mp(a.rank(p), b.rank(p));
        for (int l = 0; l < b.rank(p); ++l) {
            Eigen::MatrixXd X = M1 * b.transfer[p][static_cast<std::size_t>(l)] * Mc2.transpose();
            count_gemm(static_cast<std::size_t>(M1.rows()), static_cast<std::size_t>(X.cols()),
                       static_cast<std::size_t>(M1.cols()) + static_cast<std::size_t>(Mc2.cols()));
            for (int k = 0; k < a.rank(p); ++k)
                Mp(k, l) = (a.transfer[p][static_cast<std::size_t>(k)].array() * X.array()).sum();
        }
        M2 = std::move(Mp);
    }
    return M2(0, 0);
}

namespace {

// thin QR; returns {Q (rows x k), R (k x cols)} with k = min(rows, cols)
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> thin_qr(const Eigen::MatrixXd& M)
{
    const Eigen::Index k = std::min(M.rows(), M.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), k);
    Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    count_qr(static_cast<std::size_t>(M.rows()), static_cast<std::size_t>(M.cols()));
    return {std::move(Q), std::move(R)};
}

// push the R factor of a child's QR into the parent transfer
void push_into_parent(HTTensor& w, int parent, bool first_child, const Eigen::MatrixXd& R)
{
    for (auto& B : w.transfer[parent]) {
        if (first_child)
            B = R * B;
        else
            B = B * R.transpose();
        count_gemm(static_cast<std::size_t>(B.rows()), static_cast<std::size_t>(B.cols()),
                   static_cast<std::size_t>(R.cols()));
    }
}

}  // namespace

HTTensor orthogonalize(const HTTensor& v)
{
    if (v.is_zero()) return v;
    for (int p = 1; p < v.tree.node_count(); ++p)
        if (v.rank(p) == 0) return zero_tensor(v.tree);
    HTTensor w = v;
    w.clear_sigma();
    const int d = w.order();
    // leaves first
    for (int m = 1; m <= d; ++m) {
        auto [Q, R] = thin_qr(w.frame[m - 1]);
        w.frame[m - 1] = std::move(Q);
        const int leaf = w.tree.leaf_node(m);
        push_into_parent(w, w.tree.parent(leaf), w.tree.is_first_child(leaf), R);
    }
    // interior nodes bottom-up; each pushes into its parent as second child
    for (int p = d - 2; p >= 1; --p) {
        const auto [c1, c2] = w.tree.children(p);
        const int r1 = w.rank(c1), r2 = w.rank(c2);
        const int rp = w.rank(p);
        Eigen::MatrixXd M(static_cast<Eigen::Index>(r1) * r2, rp);
        for (int k = 0; k < rp; ++k)
            M.col(k) = Eigen::Map<const Eigen::VectorXd>(w.transfer[p][static_cast<std::size_t>(k)].data(),
                                                         static_cast<Eigen::Index>(r1) * r2);
        auto [Q, R] = thin_qr(M);
        const int rnew = static_cast<int>(Q.cols());
        w.transfer[p].assign(static_cast<std::size_t>(rnew), Eigen::MatrixXd());
        for (int k = 0; k < rnew; ++k)
            w.transfer[p][static_cast<std::size_t>(k)] =
                Eigen::Map<const Eigen::MatrixXd>(Q.col(k).data(), r1, r2);
        push_into_parent(w, p - 1, false, R);
    }
    return w;
}

namespace {

// descending eigendecomposition of a symmetric PSD matrix, eigenvalues clipped at 0
std::pair<Eigen::MatrixXd, Eigen::VectorXd> psd_eig(const Eigen::MatrixXd& G)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
    count_eig(static_cast<std::size_t>(G.rows()));
    const Eigen::Index n = G.rows();
    Eigen::MatrixXd V(n, n);
    Eigen::VectorXd lam(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        lam(i) = std::max(0.0, es.eigenvalues()(n - 1 - i));
        V.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return {std::move(V), std::move(lam)};
}

// rotate the basis of a non-root node by the orthogonal matrix V and
// adjust the parent transfer so entries are preserved
void rotate_node(HTTensor& w, int node, const Eigen::MatrixXd& V)
{
    if (w.tree.is_leaf(node)) {
        auto& U = w.frame[w.tree.leaf_mode(node) - 1];
        U = U * V;
        count_gemm(static_cast<std::size_t>(U.rows()), static_cast<std::size_t>(V.cols()),
                   static_cast<std::size_t>(V.rows()));
    } else {
        const int r = w.rank(node);
        std::vector<Eigen::MatrixXd> nb(static_cast<std::size_t>(r));
        for (int l = 0; l < r; ++l) {
            Eigen::MatrixXd B = Eigen::MatrixXd::Zero(w.transfer[node][0].rows(),
                                                      w.transfer[node][0].cols());
            for (int k = 0; k < r; ++k) B += V(k, l) * w.transfer[node][static_cast<std::size_t>(k)];
            nb[static_cast<std::size_t>(l)] = std::move(B);
        }
        w.transfer[node] = std::move(nb);
    }
    const int par = w.tree.parent(node);
    for (auto& B : w.transfer[par]) {
        if (w.tree.is_first_child(node))
            B = V.transpose() * B;
        else
            B = B * V;
        count_gemm(static_cast<std::size_t>(B.rows()), static_cast<std::size_t>(B.cols()),
                   static_cast<std::size_t>(V.rows()));
    }
}

}  // namespace

HTTensor hsvd(const HTTensor& v)
{
    HTTensor w = orthogonalize(v);
    w.sigma.assign(static_cast<std::size_t>(w.tree.node_count()), Eigen::VectorXd());
    if (w.is_zero()) {
        w.hsvd_standard = true;
        return w;
    }
    const int d = w.order();
    std::vector<Eigen::VectorXd> lam(static_cast<std::size_t>(w.tree.node_count()));
    w.sigma[0] = Eigen::VectorXd::Constant(1, w.transfer[0][0].norm());
    for (int p = 0; p < d - 1; ++p) {
        const auto [c1, c2] = w.tree.children(p);
        Eigen::MatrixXd G1, G2;
        if (p == 0) {
            const Eigen::MatrixXd& B = w.transfer[0][0];
            G1 = B * B.transpose();
            G2 = B.transpose() * B;
        } else {
            const auto& Bs = w.transfer[p];
            G1 = Eigen::MatrixXd::Zero(Bs[0].rows(), Bs[0].rows());
            G2 = Eigen::MatrixXd::Zero(Bs[0].cols(), Bs[0].cols());
            const Eigen::VectorXd& lp = lam[static_cast<std::size_t>(p)];
            for (std::size_t k = 0; k < Bs.size(); ++k) {
                G1.noalias() += lp(static_cast<Eigen::Index>(k)) * Bs[k] * Bs[k].transpose();
                G2.noalias() += lp(static_cast<Eigen::Index>(k)) * Bs[k].transpose() * Bs[k];
                count_gemm(static_cast<std::size_t>(Bs[k].rows()), static_cast<std::size_t>(Bs[k].rows()),
                           static_cast<std::size_t>(Bs[k].cols()) * 2);
            }
        }
        for (const auto& [child, G] : {std::pair<int, Eigen::MatrixXd*>{c1, &G1}, {c2, &G2}}) {
            auto [V, l] = psd_eig(*G);
            rotate_node(w, child, V);
            lam[static_cast<std::size_t>(child)] = l;
            w.sigma[static_cast<std::size_t>(child)] = l.array().sqrt().matrix();
        }
    }
    w.hsvd_standard = true;
    return w;
}

std::pair<HTTensor, double> truncate_to_rank(const HTTensor& v, const std::vector<int>& r)
{
    if (!v.hsvd_standard)
        throw structural_error("truncate_to_rank: input must carry singular values (run hsvd first)");
    const int nn = v.tree.node_count();
    if (static_cast<int>(r.size()) != nn - 1)
        throw rank_error("truncate_to_rank: rank vector must cover all non-root nodes");
    if (v.is_zero()) return {v, 0.0};
    double lam_sq = 0.0;
    bool any_zero = false;
    for (int p = 1; p < nn; ++p) {
        const int rp = r[static_cast<std::size_t>(p - 1)];
        if (rp < 0 || rp > v.rank(p)) throw rank_error("truncate_to_rank: inadmissible rank vector");
        if (rp == 0) any_zero = true;
        const auto& s = v.sigma[static_cast<std::size_t>(p)];
        for (Eigen::Index k = rp; k < s.size(); ++k) lam_sq += s(k) * s(k);
    }
    const double lam = std::sqrt(lam_sq);
    if (any_zero) return {zero_tensor(v.tree), lam};

    HTTensor out(v.tree);
    const int d = v.order();
    for (int m = 1; m <= d; ++m) {
        const int rp = r[static_cast<std::size_t>(v.tree.leaf_node(m) - 1)];
        out.supp[m - 1] = v.supp[m - 1];
        out.frame[m - 1] = v.frame[m - 1].leftCols(rp);
    }
    for (int p = 0; p < v.tree.nonleaf_count(); ++p) {
        auto [c1, c2] = v.tree.children(p);
        const int r1 = r[static_cast<std::size_t>(c1 - 1)];
        const int r2 = r[static_cast<std::size_t>(c2 - 1)];
        const int rp = p == 0 ? 1 : r[static_cast<std::size_t>(p - 1)];
        out.transfer[p].clear();
        for (int k = 0; k < rp; ++k)
            out.transfer[p].push_back(v.transfer[p][static_cast<std::size_t>(k)].topLeftCorner(r1, r2));
    }
    return {std::move(out), lam};
}

HTTensor truncate_to_tolerance(const HTTensor& v, double eta)
{
    if (eta <= 0.0) throw tolerance_error("truncate_to_tolerance: tolerance must be positive");
    if (!v.hsvd_standard)
        throw structural_error("truncate_to_tolerance: input must carry singular values");
    if (v.is_zero()) return v;
    const double nrm = v.sigma[0](0);
    if (eta >= nrm) return zero_tensor(v.tree);

    const int nn = v.tree.node_count();
    double sig_max = 0.0;
    for (int p = 1; p < nn; ++p)
        if (v.sigma[static_cast<std::size_t>(p)].size() > 0)
            sig_max = std::max(sig_max, v.sigma[static_cast<std::size_t>(p)](0));
    // suffix sums of sigma^2 and the numerically effective rank per node
    std::vector<std::vector<double>> suffix(static_cast<std::size_t>(nn));
    std::vector<int> eff(static_cast<std::size_t>(nn), 0);
    for (int p = 1; p < nn; ++p) {
        const auto& s = v.sigma[static_cast<std::size_t>(p)];
        auto& suf = suffix[static_cast<std::size_t>(p)];
        suf.assign(static_cast<std::size_t>(s.size()) + 1, 0.0);
        for (Eigen::Index k = s.size() - 1; k >= 0; --k)
            suf[static_cast<std::size_t>(k)] = suf[static_cast<std::size_t>(k) + 1] + s(k) * s(k);
        int e = 0;
        while (e < s.size() && s(e) > kSigmaFloor * sig_max) ++e;
        eff[static_cast<std::size_t>(p)] = e;
    }
    const double eta_sq = eta * eta;
    auto lambda_sq_at = [&](int cap) {
        double t = 0.0;
        for (int p = 1; p < nn; ++p)
            t += suffix[static_cast<std::size_t>(p)][static_cast<std::size_t>(
                std::min(eff[static_cast<std::size_t>(p)], cap))];
        return t;
    };
    int hi = 0;
    for (int p = 1; p < nn; ++p) hi = std::max(hi, eff[static_cast<std::size_t>(p)]);
    if (lambda_sq_at(hi) > eta_sq) return v;  // even dropping only floor noise misses eta
    // bisection on the uniform max rank
    int lo = 0;
    while (hi - lo > 0) {
        const int mid = (lo + hi) / 2;
        if (lambda_sq_at(mid) <= eta_sq)
            hi = mid;
        else
            lo = mid + 1;
    }
    std::vector<int> r(static_cast<std::size_t>(nn - 1));
    double lam_sq = 0.0;
    for (int p = 1; p < nn; ++p) {
        r[static_cast<std::size_t>(p - 1)] = std::min(eff[static_cast<std::size_t>(p)], hi);
        lam_sq += suffix[static_cast<std::size_t>(p)][static_cast<std::size_t>(r[static_cast<std::size_t>(p - 1)])];
    }
    // greedy per-node decrease, node order breaks ties
    for (int p = 1; p < nn; ++p) {
        auto& rp = r[static_cast<std::size_t>(p - 1)];
        const auto& suf = suffix[static_cast<std::size_t>(p)];
        while (rp > 0 && lam_sq - suf[static_cast<std::size_t>(rp)] + suf[static_cast<std::size_t>(rp - 1)] <= eta_sq) {
            lam_sq += suf[static_cast<std::size_t>(rp - 1)] - suf[static_cast<std::size_t>(rp)];
            --rp;
        }
    }
    return truncate_to_rank(v, r).first;
}

HTTensor recompress(const HTTensor& v, double eta)
{
    HTTensor w = v.hsvd_standard ? v : hsvd(v);
    if (w.is_zero()) return w;
    if (eta > 0.0) return truncate_to_tolerance(w, eta);
    // eta == 0: drop only numerically zero singular values
    const int nn = w.tree.node_count();
    double sig_max = 0.0;
    for (int p = 1; p < nn; ++p)
        if (w.sigma[static_cast<std::size_t>(p)].size() > 0)
            sig_max = std::max(sig_max, w.sigma[static_cast<std::size_t>(p)](0));
    std::vector<int> r(static_cast<std::size_t>(nn - 1));
    for (int p = 1; p < nn; ++p) {
        const auto& s = w.sigma[static_cast<std::size_t>(p)];
        int e = 0;
        while (e < s.size() && s(e) > kSigmaFloor * sig_max) ++e;
        r[static_cast<std::size_t>(p - 1)] = e;
    }
    return truncate_to_rank(w, r).first;
}

double norm(const HTTensor& a)
{
    if (a.is_zero()) return 0.0;
    if (a.hsvd_standard) return a.sigma[0](0);
    HTTensor w = orthogonalize(a);
    if (w.is_zero()) return 0.0;
    return w.transfer[0][0].norm();
}

double evaluate_entry(const HTTensor& v, const std::vector<Index>& nu)
{
    const int d = v.order();
    if (static_cast<int>(nu.size()) != d) throw index_error("evaluate_entry: index length != order");
    if (v.is_zero()) return 0.0;
    std::vector<Eigen::VectorXd> x(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m) {
        if (nu[static_cast<std::size_t>(m)] < 1) throw index_error("evaluate_entry: index must be >= 1");
        const auto& sp = v.supp[static_cast<std::size_t>(m)];
        auto it = std::lower_bound(sp.begin(), sp.end(), nu[static_cast<std::size_t>(m)]);
        if (it == sp.end() || *it != nu[static_cast<std::size_t>(m)]) return 0.0;
        x[static_cast<std::size_t>(m)] =
            v.frame[static_cast<std::size_t>(m)].row(static_cast<Eigen::Index>(it - sp.begin()));
    }
    if (d == 2) return x[0].dot(v.transfer[0][0] * x[1]);
    const int last = d - 2;
    Eigen::VectorXd y(v.rank(last));
    for (int k = 0; k < y.size(); ++k)
        y(k) = x[static_cast<std::size_t>(d - 2)].dot(v.transfer[static_cast<std::size_t>(last)][static_cast<std::size_t>(k)] *
                                                      x[static_cast<std::size_t>(d - 1)]);
    for (int p = last - 1; p >= 1; --p) {
        Eigen::VectorXd yn(v.rank(p));
        for (int k = 0; k < yn.size(); ++k)
            yn(k) = x[static_cast<std::size_t>(p)].dot(v.transfer[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] * y);
        y = std::move(yn);
    }
    return x[0].dot(v.transfer[0][0] * y);
}

HTTensor restrict_to_product(const HTTensor& v, const std::vector<std::vector<Index>>& keep)
{
    if (v.is_zero()) return v;
    const int d = v.order();
    if (static_cast<int>(keep.size()) != d)
        throw structural_error("restrict_to_product: need one index set per mode");
    HTTensor out = v;
    out.clear_sigma();
    for (int m = 0; m < d; ++m) {
        std::vector<Index> common;
        std::set_intersection(v.supp[static_cast<std::size_t>(m)].begin(), v.supp[static_cast<std::size_t>(m)].end(),
                              keep[static_cast<std::size_t>(m)].begin(), keep[static_cast<std::size_t>(m)].end(),
                              std::back_inserter(common));
        if (common.empty()) return zero_tensor(v.tree);
        Eigen::MatrixXd F(static_cast<Eigen::Index>(common.size()), v.frame[static_cast<std::size_t>(m)].cols());
        std::size_t j = 0;
        for (std::size_t i = 0; i < v.supp[static_cast<std::size_t>(m)].size() && j < common.size(); ++i)
            if (v.supp[static_cast<std::size_t>(m)][i] == common[j]) {
                F.row(static_cast<Eigen::Index>(j)) = v.frame[static_cast<std::size_t>(m)].row(static_cast<Eigen::Index>(i));
                ++j;
            }
        out.supp[static_cast<std::size_t>(m)] = std::move(common);
        out.frame[static_cast<std::size_t>(m)] = std::move(F);
    }
    return out;
}

}  // namespace hts
