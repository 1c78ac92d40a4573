//
// Rescaled low-rank operators and their adaptive compressed application.
//

#include "htsolve/operator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hts {

namespace {
constexpr double kInvSqrtPi = 0.56418958354775628695;
}

LowRankOperator LowRankOperator::make(DimensionTree tree, Eigen::MatrixXd a, int R,
                                      std::vector<std::vector<Eigen::MatrixXd>> core,
                                      std::vector<TuckerTerm> terms, BackendSet backends,
                                      double delta)
{
    LowRankOperator op;
    op.tree_ = std::move(tree);
    op.a_ = std::move(a);
    op.R_ = R;
    op.core_ = std::move(core);
    op.terms_ = std::move(terms);
    op.backends_ = std::move(backends);
    op.params_ = choose_params(delta);
    op.omega_min_ = omega_min_of(op.backends_);
    return op;
}

bool LowRankOperator::diagonal_structure() const
{
    for (const auto& t : terms_)
        for (int m = 0; m < order(); ++m) {
            const int k = t.kinds[static_cast<std::size_t>(m)];
            if (k > 2 || !backends_.mode(m).diagonal_kind(k)) return false;
        }
    return true;
}

double LowRankOperator::coefficient(const std::vector<int>& n) const
{
    const int d = order();
    if (static_cast<int>(n.size()) != d) throw parameter_error("coefficient: index length != order");
    for (int k : n)
        if (k < 1 || k > R_) throw parameter_error("coefficient: component index out of range");
    if (d == 2) return core_[0][0](n[0] - 1, n[1] - 1);
    const auto& last = core_[static_cast<std::size_t>(d - 2)];
    Eigen::VectorXd val(static_cast<Eigen::Index>(last.size()));
    for (std::size_t t = 0; t < last.size(); ++t)
        val(static_cast<Eigen::Index>(t)) = last[t](n[static_cast<std::size_t>(d - 2)] - 1,
                                                    n[static_cast<std::size_t>(d - 1)] - 1);
    for (int p = d - 3; p >= 1; --p) {
        const auto& cp = core_[static_cast<std::size_t>(p)];
        Eigen::VectorXd nv(static_cast<Eigen::Index>(cp.size()));
        for (std::size_t t = 0; t < cp.size(); ++t)
            nv(static_cast<Eigen::Index>(t)) = cp[t].row(n[static_cast<std::size_t>(p)] - 1).dot(val);
        val = std::move(nv);
    }
    return core_[0][0].row(n[0] - 1).dot(val);
}

namespace {

// max / min of entry2(nu,nu) / weight(nu)^2 over the window (probed dyadically)
std::pair<double, double> stiffness_weight_ratio(const UnivariateBackend& b)
{
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    const Index N = b.max_index();
    for (Index nu = 1; nu <= N; nu = nu < 64 ? nu + 1 : nu * 2 - nu / 3) {
        const double w = b.weight(nu);
        const double r = b.entry(2, nu, nu) / (w * w);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return {lo, hi};
}

}  // namespace

double LowRankOperator::norm_upper() const
{
    const double dl = delta();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_);
    const bool diag_a = a_.isDiagonal(0.0);
    double bound = 0.0;
    if (diag_a) {
        for (int i = 0; i < order(); ++i)
            bound = std::max(bound, a_(i, i) * stiffness_weight_ratio(backends_.mode(i)).second);
    } else {
        double rmax = 0.0;
        for (int i = 0; i < order(); ++i)
            rmax = std::max(rmax, stiffness_weight_ratio(backends_.mode(i)).second);
        bound = es.eigenvalues().maxCoeff() * rmax;
    }
    return (1.0 + dl) * (1.0 + dl) * bound;
}

double LowRankOperator::inv_norm_upper() const
{
    const double dl = delta();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_);
    const bool diag_a = a_.isDiagonal(0.0);
    double bound = std::numeric_limits<double>::infinity();
    if (diag_a) {
        for (int i = 0; i < order(); ++i)
            bound = std::min(bound, a_(i, i) * stiffness_weight_ratio(backends_.mode(i)).first);
    } else {
        double rmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < order(); ++i)
            rmin = std::min(rmin, stiffness_weight_ratio(backends_.mode(i)).first);
        bound = es.eigenvalues().minCoeff() * rmin;
    }
    if (bound <= 0.0) throw parameter_error("inv_norm_upper: operator not coercive");
    return 1.0 / ((1.0 - dl) * (1.0 - dl) * bound);
}

std::pair<double, double> LowRankOperator::spectral_interval() const
{
    if (!spectrum_ready_) estimate_spectrum();
    return {lam_min_, lam_max_};
}

void LowRankOperator::estimate_spectrum() const
{
    int level = 0;
    double total = 1.0;
    while (level + 1 <= backends_.mode(0).max_level()) {
        double t = 1.0;
        for (int m = 0; m < order(); ++m)
            t *= static_cast<double>(std::min(level_end(level + 1), backends_.mode(m).max_index()));
        if (t > 2e5 && !diagonal_structure()) break;
        level += 1;
        total = t;
        if (diagonal_structure() && level >= backends_.mode(0).max_level()) break;
    }
    (void)total;
    const auto est = estimate_condition(*this, level);
    lam_min_ = est.lam_min;
    lam_max_ = est.lam_max;
    spectrum_ready_ = true;
}

LowRankOperator build_diagonal(const std::vector<double>& a_diag, BackendSet backends, double delta)
{
    const int d = static_cast<int>(a_diag.size());
    if (d < 2) throw parameter_error("build_diagonal: order must be >= 2");
    if (backends.order() != d) throw parameter_error("build_diagonal: backends/order mismatch");
    for (double a : a_diag)
        if (a <= 0.0) throw parameter_error("build_diagonal: diagonal entries must be positive");
    DimensionTree tree(d);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) a(i, i) = a_diag[static_cast<std::size_t>(i)];
    std::vector<std::vector<Eigen::MatrixXd>> core(static_cast<std::size_t>(d - 1));
    if (d == 2) {
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2, 2);
        C(1, 0) = a_diag[0];
        C(0, 1) = a_diag[1];
        core[0] = {C};
    } else {
        Eigen::MatrixXd Croot = Eigen::MatrixXd::Zero(2, 2);
        Croot(1, 0) = a_diag[0];  // stiffness at mode 1, rest identity
        Croot(0, 1) = 1.0;        // identity at mode 1, stiffness somewhere below
        core[0] = {Croot};
        for (int p = 1; p <= d - 3; ++p) {
            Eigen::MatrixXd C1 = Eigen::MatrixXd::Zero(2, 2), C2 = Eigen::MatrixXd::Zero(2, 2);
            C1(0, 0) = 1.0;
            C2(0, 1) = 1.0;
            C2(1, 0) = a_diag[static_cast<std::size_t>(p)];
            core[static_cast<std::size_t>(p)] = {C1, C2};
        }
        Eigen::MatrixXd C1 = Eigen::MatrixXd::Zero(2, 2), C2 = Eigen::MatrixXd::Zero(2, 2);
        C1(0, 0) = 1.0;
        C2(0, 1) = a_diag[static_cast<std::size_t>(d - 1)];
        C2(1, 0) = a_diag[static_cast<std::size_t>(d - 2)];
        core[static_cast<std::size_t>(d - 2)] = {C1, C2};
    }
    std::vector<TuckerTerm> terms;
    for (int i = 0; i < d; ++i) {
        TuckerTerm t;
        t.kinds.assign(static_cast<std::size_t>(d), 1);
        t.kinds[static_cast<std::size_t>(i)] = 2;
        t.coeff = a_diag[static_cast<std::size_t>(i)];
        terms.push_back(std::move(t));
    }
    return LowRankOperator::make(tree, std::move(a), 2, std::move(core), std::move(terms),
                                 std::move(backends), delta);
}

LowRankOperator build_laplacian(int d, std::shared_ptr<const UnivariateBackend> backend, double delta)
{
    if (d < 2) throw parameter_error("build_laplacian: order must be >= 2");
    return build_diagonal(std::vector<double>(static_cast<std::size_t>(d), 1.0),
                          uniform_backends(d, std::move(backend)), delta);
}

LowRankOperator build_tridiagonal(int d, std::shared_ptr<const UnivariateBackend> backend, double delta)
{
    if (d < 2) throw parameter_error("build_tridiagonal: order must be >= 2");
    DimensionTree tree(d);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        a(i, i) = 2.0;
        if (i + 1 < d) a(i, i + 1) = a(i + 1, i) = -1.0;
    }
    std::vector<std::vector<Eigen::MatrixXd>> core(static_cast<std::size_t>(d - 1));
    if (d == 2) {
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(4, 4);
        C(0, 1) = 2.0;
        C(1, 0) = 2.0;
        C(2, 3) = -1.0;
        C(3, 2) = -1.0;
        core[0] = {C};
    } else {
        Eigen::MatrixXd Croot = Eigen::MatrixXd::Zero(4, 5);
        Croot(0, 1) = 2.0;
        Croot(1, 0) = 2.0;
        Croot(2, 3) = -1.0;
        Croot(3, 2) = -1.0;
        Croot(0, 4) = -1.0;
        core[0] = {Croot};
        auto interior = [&](int cols) {
            std::vector<Eigen::MatrixXd> Cs(5, Eigen::MatrixXd::Zero(4, cols));
            Cs[0](0, 0) = 1.0;
            Cs[1](0, 1) = 1.0;
            Cs[1](1, 0) = 1.0;
            Cs[2](2, 0) = 1.0;
            Cs[3](3, 0) = 1.0;
            Cs[4](2, 3) = 1.0;
            Cs[4](3, 2) = 1.0;
            if (cols == 5) Cs[4](0, 4) = 1.0;
            return Cs;
        };
        for (int p = 1; p <= d - 3; ++p) core[static_cast<std::size_t>(p)] = interior(5);
        core[static_cast<std::size_t>(d - 2)] = interior(4);
    }
    std::vector<TuckerTerm> terms;
    for (int i = 0; i < d; ++i) {
        TuckerTerm t;
        t.kinds.assign(static_cast<std::size_t>(d), 1);
        t.kinds[static_cast<std::size_t>(i)] = 2;
        t.coeff = 2.0;
        terms.push_back(std::move(t));
    }
    for (int i = 0; i + 1 < d; ++i) {
        for (const auto& [ki, kj] : {std::pair<int, int>{3, 4}, {4, 3}}) {
            TuckerTerm t;
            t.kinds.assign(static_cast<std::size_t>(d), 1);
            t.kinds[static_cast<std::size_t>(i)] = ki;
            t.kinds[static_cast<std::size_t>(i + 1)] = kj;
            t.coeff = -1.0;
            terms.push_back(std::move(t));
        }
    }
    return LowRankOperator::make(tree, std::move(a), 4, std::move(core), std::move(terms),
                                 uniform_backends(d, std::move(backend)), delta);
}

// ---------------------------------------------------------------------------
// a-posteriori compression error

namespace {

// per-mode nonincreasing rearrangement of the contraction values
struct SortedPi {
    std::vector<double> values;  // sorted descending
    std::vector<Index> indices;  // matching support indices
};

SortedPi sorted_pi(const ContractionSet& c, int m)
{
    SortedPi s;
    const auto& pi = c.pi[static_cast<std::size_t>(m)];
    std::vector<std::size_t> ord(pi.size());
    std::iota(ord.begin(), ord.end(), std::size_t{0});
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
        if (pi[a].second != pi[b].second) return pi[a].second > pi[b].second;
        return pi[a].first < pi[b].first;
    });
    for (std::size_t i : ord) {
        s.values.push_back(pi[i].second);
        s.indices.push_back(pi[i].first);
    }
    return s;
}

// l2 norm of the slice [2^{p-1}, 2^p) of the rearrangement (p = 0: first entry)
double partition_norm(const SortedPi& s, int p)
{
    const std::size_t lo = p == 0 ? 0 : (std::size_t{1} << (p - 1));
    const std::size_t hi = std::min(s.values.size(), std::size_t{1} << p);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi && i < s.values.size(); ++i) acc += s.values[i] * s.values[i];
    return std::sqrt(acc);
}

double tail_norm(const SortedPi& s, int J)
{
    const std::size_t lo = std::size_t{1} << J;
    double acc = 0.0;
    for (std::size_t i = lo; i < s.values.size(); ++i) acc += s.values[i] * s.values[i];
    return std::sqrt(acc);
}

double coefficient_frame_bound(const LowRankOperator& op, int i)
{
    // C_A^(i) = max{|a_ii|, 2 sum_{j != i} |a_ij| ||A_3^(j)||, same with A_4}
    const auto& a = op.diffusion();
    double cross3 = 0.0, cross4 = 0.0;
    for (int j = 0; j < op.order(); ++j) {
        if (j == i) continue;
        cross3 += std::abs(a(i, j)) * op.backends().mode(j).component_norm(3);
        cross4 += std::abs(a(i, j)) * op.backends().mode(j).component_norm(4);
    }
    return std::max({std::abs(a(i, i)), 2.0 * cross3, 2.0 * cross4});
}

}  // namespace

double a_posteriori_error(const LowRankOperator& op, const ContractionSet& c, int J)
{
    if (J < 0) throw parameter_error("a_posteriori_error: J must be >= 0");
    const int d = op.order();
    double e = 0.0;
    for (int i = 0; i < d; ++i) {
        const auto& be = op.backends().mode(i);
        const double s = be.s_decay();
        const SortedPi sp = sorted_pi(c, i);
        double kind_norm_sum = 0.0;
        double inner = 0.0;
        for (int p = 0; p <= J; ++p) {
            double beta_sum = 0.0;
            for (int n = 2; n <= op.component_count(); ++n) beta_sum += be.beta(n, J - p);
            if (beta_sum == 0.0) continue;
            inner += beta_sum * std::exp2(-s * (J - p)) * partition_norm(sp, p);
        }
        for (int n = 2; n <= op.component_count(); ++n) kind_norm_sum += be.component_norm(n);
        inner += kind_norm_sum * tail_norm(sp, J);
        e += coefficient_frame_bound(op, i) * inner;
    }
    return e;
}

double a_posteriori_error(const LowRankOperator& op, const HTTensor& v, int J)
{
    return a_posteriori_error(op, contractions(v), J);
}

namespace {

int certified_band_depth(const LowRankOperator& op, const ContractionSet& c, double target)
{
    // smallest J with (1+delta)^2 e_J <= target; bounded because the window
    // betas vanish beyond the backend level range
    const double f = (1.0 + op.delta()) * (1.0 + op.delta());
    int jmax = 4;
    long long ts = 1;
    for (const auto& pi : c.pi) ts += static_cast<long long>(pi.size());
    while ((1ll << jmax) < ts) ++jmax;
    for (int m = 0; m < op.order(); ++m) jmax = std::max(jmax, op.backends().mode(m).max_level());
    jmax = 2 * jmax + 4;
    for (int J = 0; J <= jmax; ++J)
        if (f * a_posteriori_error(op, c, J) <= target) return J;
    throw resource_error("apply: cannot certify the requested tolerance on this window");
}

}  // namespace

ApplyParams choose_apply_params(const LowRankOperator& op, const HTTensor& v, double eta)
{
    if (eta <= 0.0) throw tolerance_error("choose_apply_params: tolerance must be positive");
    ApplyParams out;
    if (v.is_zero()) {
        out.zero_shortcircuit = true;
        return out;
    }
    const double nv = norm(v);
    if (eta > 2.0 * op.norm_upper() * nv) {
        out.zero_shortcircuit = true;
        return out;
    }
    const ContractionSet c = contractions(v);
    out.J = certified_band_depth(op, c, eta / 4.0);
    // pattern-level support hull: input support union the banded image levels
    std::vector<Index> hull(static_cast<std::size_t>(op.order()), 1);
    for (int m = 0; m < op.order(); ++m) {
        const auto& be = op.backends().mode(m);
        Index h = v.supp[static_cast<std::size_t>(m)].empty() ? 1 : v.supp[static_cast<std::size_t>(m)].back();
        bool nondiag = false;
        for (int n = 2; n <= op.component_count(); ++n) nondiag = nondiag || !be.diagonal_kind(n);
        if (nondiag) {
            const int lev = std::min(be.max_level(), level_of(h) + out.J);
            h = std::min(be.max_index(), level_end(lev));
        }
        hull[static_cast<std::size_t>(m)] = h;
    }
    out.T = lambda_T_of_hull(hull, op.backends());
    const double cz = eta * (1.0 - op.delta()) / (4.0 * op.norm_upper() * nv);
    out.m = terms_required(cz, out.T, op.expsum());
    return out;
}

// ---------------------------------------------------------------------------
// apply

namespace {

struct KindColumns {
    std::vector<std::size_t> colptr;  // size #supp+1
    std::vector<int> outpos;
    std::vector<double> vals;
};

struct ModeAssembly {
    std::vector<Index> out_rows;
    std::vector<int> out_levels;          // cached levels of out_rows
    std::vector<double> theta_cache_in;   // scratch per l0
    std::vector<KindColumns> kinds;       // index 0 unused
    std::vector<std::vector<double>> col_sq;  // per kind: column squared norms
};

}  // namespace

std::pair<HTTensor, ApplyReport> apply(const LowRankOperator& op, const HTTensor& v, double eta,
                                       const ApplyOptions& opts)
{
    ApplyReport rep;
    rep.eta = eta;
    const auto ops0 = ops_counters().total();
    if (eta <= 0.0) throw tolerance_error("apply: tolerance must be positive");
    const int d = op.order();
    if (v.tree != op.tree()) throw structural_error("apply: tensor order does not match operator");
    auto finish = [&](HTTensor w) {
        rep.max_rank_output = w.max_rank();
        rep.supp_total_output = w.total_support();
        rep.ops = ops_counters().total() - ops0;
        return std::make_pair(std::move(w), rep);
    };
    if (v.is_zero()) {
        rep.zero_output = true;
        return finish(zero_tensor(op.tree()));
    }
    const HTTensor vh = v.hsvd_standard ? v : hsvd(v);
    const double nv = vh.sigma[0](0);
    const double norm_up = op.norm_upper();
    if (eta > 2.0 * norm_up * nv) {
        rep.zero_output = true;
        return finish(zero_tensor(op.tree()));
    }

    const double eta_struct = eta / 2.0;
    const ContractionSet contr = contractions(vh);
    const int J = certified_band_depth(op, contr, eta_struct / 4.0);
    rep.J = J;
    rep.e_J = a_posteriori_error(op, contr, J);

    const int R = op.component_count();
    // per-mode partition index of each support position (-1: outside best 2^J set)
    std::vector<std::vector<int>> part(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m) {
        const SortedPi sp = sorted_pi(contr, m);
        auto& pm = part[static_cast<std::size_t>(m)];
        pm.assign(vh.supp[static_cast<std::size_t>(m)].size(), -1);
        const std::size_t keep = std::min(sp.indices.size(), std::size_t{1} << J);
        for (std::size_t i = 0; i < keep; ++i) {
            int p = 0;
            while ((std::size_t{1} << p) <= i) ++p;
            const auto& sup = vh.supp[static_cast<std::size_t>(m)];
            const auto it = std::lower_bound(sup.begin(), sup.end(), sp.indices[i]);
            pm[static_cast<std::size_t>(it - sup.begin())] = p;
        }
    }

    // assemble the banded operator columns per mode and kind
    std::vector<ModeAssembly> mode(static_cast<std::size_t>(d));
    long long supp_total = 0;
    for (int m = 0; m < d; ++m) {
        auto& ma = mode[static_cast<std::size_t>(m)];
        const auto& be = op.backends().mode(m);
        const auto& sup = vh.supp[static_cast<std::size_t>(m)];
        std::vector<Index> rows_all;
        std::vector<std::vector<std::pair<Index, double>>> tmp(static_cast<std::size_t>(R) *
                                                               sup.size());
        std::vector<Index> rbuf;
        std::vector<double> vbuf;
        for (int n = 1; n <= R; ++n) {
            for (std::size_t cpos = 0; cpos < sup.size(); ++cpos) {
                const int p = part[static_cast<std::size_t>(m)][cpos];
                auto& cell = tmp[static_cast<std::size_t>(n - 1) * sup.size() + cpos];
                if (n == 1) {
                    // identity components are kept whole
                    cell.emplace_back(sup[cpos], 1.0);
                    rows_all.push_back(sup[cpos]);
                    continue;
                }
                if (p < 0) continue;
                be.compressed_column(n, J - p, sup[cpos], rbuf, vbuf);
                cell.reserve(rbuf.size());
                for (std::size_t i = 0; i < rbuf.size(); ++i) {
                    cell.emplace_back(rbuf[i], vbuf[i]);
                    rows_all.push_back(rbuf[i]);
                }
            }
        }
        std::sort(rows_all.begin(), rows_all.end());
        rows_all.erase(std::unique(rows_all.begin(), rows_all.end()), rows_all.end());
        supp_total += static_cast<long long>(rows_all.size());
        if (supp_total > opts.supp_cap)
            throw resource_error("apply: output support exceeds the configured cap");
        ma.out_rows = std::move(rows_all);
        ma.out_levels.resize(ma.out_rows.size());
        for (std::size_t i = 0; i < ma.out_rows.size(); ++i)
            ma.out_levels[i] = level_of(ma.out_rows[i]);
        ma.kinds.resize(static_cast<std::size_t>(R) + 1);
        ma.col_sq.assign(static_cast<std::size_t>(R) + 1,
                         std::vector<double>(sup.size(), 0.0));
        for (int n = 1; n <= R; ++n) {
            auto& kc = ma.kinds[static_cast<std::size_t>(n)];
            kc.colptr.assign(sup.size() + 1, 0);
            for (std::size_t cpos = 0; cpos < sup.size(); ++cpos) {
                const auto& cell = tmp[static_cast<std::size_t>(n - 1) * sup.size() + cpos];
                kc.colptr[cpos + 1] = kc.colptr[cpos] + cell.size();
                for (const auto& [row, val] : cell) {
                    const auto it = std::lower_bound(ma.out_rows.begin(), ma.out_rows.end(), row);
                    kc.outpos.push_back(static_cast<int>(it - ma.out_rows.begin()));
                    kc.vals.push_back(val);
                    ma.col_sq[static_cast<std::size_t>(n)][cpos] += val * val;
                }
            }
        }
    }

    // scaling ranks: input side from the support hull of v, output side from
    // the image hull; the symmetric value drives the rank audit
    std::vector<Index> hull_in(static_cast<std::size_t>(d), 1), hull_out(hull_in), hull_sym(hull_in);
    for (int m = 0; m < d; ++m) {
        hull_in[static_cast<std::size_t>(m)] = vh.supp[static_cast<std::size_t>(m)].back();
        hull_out[static_cast<std::size_t>(m)] =
            mode[static_cast<std::size_t>(m)].out_rows.empty() ? 1 : mode[static_cast<std::size_t>(m)].out_rows.back();
        hull_sym[static_cast<std::size_t>(m)] =
            std::max(hull_in[static_cast<std::size_t>(m)], hull_out[static_cast<std::size_t>(m)]);
    }
    rep.T_input = lambda_T_of_hull(hull_in, op.backends());
    rep.T_output = lambda_T_of_hull(hull_out, op.backends());
    rep.T_sym = lambda_T_of_hull(hull_sym, op.backends());
    const double cz = eta_struct * (1.0 - op.delta()) / (4.0 * norm_up * nv);
    rep.m_input = terms_required(cz, rep.T_input, op.expsum());
    rep.m_output = terms_required(cz, rep.T_output, op.expsum());
    rep.m_sym = terms_required(cz, rep.T_sym, op.expsum());
    const int np = op.expsum().n_plus;
    rep.mhat_input = 1 + np + rep.m_input;
    rep.mhat_output = 1 + np + rep.m_output;
    rep.mhat_sym = 1 + np + rep.m_sym;
    const ScalingExpansion Ein = build_inverse_scaling(rep.m_input, op.expsum(), op.omega_min());
    const ScalingExpansion Eout = build_inverse_scaling(rep.m_output, op.expsum(), op.omega_min());

    // shared transfer tensors of the operator image (Kronecker of core and input)
    std::vector<std::vector<Eigen::MatrixXd>> yt(static_cast<std::size_t>(d - 1));
    for (int p = 0; p < d - 1; ++p) {
        const auto [c1, c2] = op.tree().children(p);
        const int r1 = vh.rank(c1), r2 = vh.rank(c2);
        const int R2 = op.tree().is_leaf(c2) ? R : op.core_rank(c2);
        const int rp = vh.rank(p);
        const auto& cp = op.core(p);
        yt[static_cast<std::size_t>(p)].reserve(cp.size() * static_cast<std::size_t>(rp));
        for (std::size_t t = 0; t < cp.size(); ++t) {
            for (int mm = 0; mm < rp; ++mm) {
                Eigen::MatrixXd B(static_cast<Eigen::Index>(R) * r1, static_cast<Eigen::Index>(R2) * r2);
                for (int n = 0; n < R; ++n)
                    for (int t2 = 0; t2 < R2; ++t2)
                        B.block(static_cast<Eigen::Index>(n) * r1, static_cast<Eigen::Index>(t2) * r2, r1, r2) =
                            cp[t](n, t2) * vh.transfer[static_cast<std::size_t>(p)][static_cast<std::size_t>(mm)];
                yt[static_cast<std::size_t>(p)].push_back(std::move(B));
            }
        }
    }
    count_gemm(static_cast<std::size_t>(d), 16, static_cast<std::size_t>(vh.max_rank() + 1) *
                                                    static_cast<std::size_t>(vh.max_rank() + 1));

    // per-mode squared omega_hat on input support and output rows
    std::vector<std::vector<double>> wsq_in(static_cast<std::size_t>(d)), wsq_out(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m) {
        const auto& be = op.backends().mode(m);
        for (Index nu : vh.supp[static_cast<std::size_t>(m)]) {
            const double w = be.weight(nu);
            wsq_in[static_cast<std::size_t>(m)].push_back(w * w);
        }
        for (Index nu : mode[static_cast<std::size_t>(m)].out_rows) {
            const double w = be.weight(nu);
            wsq_out[static_cast<std::size_t>(m)].push_back(w * w);
        }
    }
    double o2min_out = 0.0;
    for (int m = 0; m < d; ++m)
        o2min_out += wsq_out[static_cast<std::size_t>(m)].empty()
                         ? op.backends().mode(m).weight(1) * op.backends().mode(m).weight(1)
                         : *std::min_element(wsq_out[static_cast<std::size_t>(m)].begin(),
                                             wsq_out[static_cast<std::size_t>(m)].end());

    // the image frame for one input-side scaling term
    auto build_frames = [&](int l0, std::vector<Eigen::MatrixXd>& frames) {
        const auto& term = Ein.terms[static_cast<std::size_t>(l0)];
        for (int m = 0; m < d; ++m) {
            const auto& ma = mode[static_cast<std::size_t>(m)];
            const auto& U = vh.frame[static_cast<std::size_t>(m)];
            const int r = static_cast<int>(U.cols());
            const double wroot = std::pow(term.weight, 1.0 / d);
            Eigen::MatrixXd F = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ma.out_rows.size()),
                                                      static_cast<Eigen::Index>(R) * r);
            for (int n = 1; n <= R; ++n) {
                const auto& kc = ma.kinds[static_cast<std::size_t>(n)];
                for (std::size_t c = 0; c < vh.supp[static_cast<std::size_t>(m)].size(); ++c) {
                    const double th = wroot * std::exp(-term.exponent * wsq_in[static_cast<std::size_t>(m)][c]);
                    for (std::size_t e = kc.colptr[c]; e < kc.colptr[c + 1]; ++e) {
                        const double w = kc.vals[e] * th;
                        for (int k = 0; k < r; ++k)
                            F(kc.outpos[e], static_cast<Eigen::Index>(n - 1) * r + k) +=
                                w * U(static_cast<Eigen::Index>(c), k);
                    }
                }
                count_gemm(kc.vals.size(), static_cast<std::size_t>(r), 1);
            }
            frames[static_cast<std::size_t>(m)] = std::move(F);
        }
    };

    auto make_y = [&](const std::vector<Eigen::MatrixXd>& frames, int l1) {
        HTTensor y(op.tree());
        const auto& t1 = Eout.terms[static_cast<std::size_t>(l1)];
        const double wroot = std::pow(t1.weight, 1.0 / d);
        for (int m = 0; m < d; ++m) {
            y.supp[static_cast<std::size_t>(m)] = mode[static_cast<std::size_t>(m)].out_rows;
            Eigen::MatrixXd F = frames[static_cast<std::size_t>(m)];
            for (Eigen::Index i = 0; i < F.rows(); ++i)
                F.row(i) *= wroot * std::exp(-t1.exponent *
                                             wsq_out[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)]);
            count_diag(static_cast<std::size_t>(F.size()));
            y.frame[static_cast<std::size_t>(m)] = std::move(F);
        }
        y.transfer = yt;
        return y;
    };

    auto gram_norm = [&](const HTTensor& y) { return std::sqrt(std::max(0.0, inner_product(y, y))); };

    // certified factorized bound for ||T_J Theta_{l0} v||
    auto z_norm_bound = [&](int l0) {
        const auto& term = Ein.terms[static_cast<std::size_t>(l0)];
        double total = 0.0;
        for (const auto& tt : op.terms()) {
            double f = std::abs(tt.coeff);
            for (int m = 0; m < d && f > 0.0; ++m) {
                const int n = tt.kinds[static_cast<std::size_t>(m)];
                const auto& ma = mode[static_cast<std::size_t>(m)];
                const auto& sup = vh.supp[static_cast<std::size_t>(m)];
                const double wroot = std::pow(term.weight, 1.0 / d);
                double fm = 0.0;
                if (op.backends().mode(m).diagonal_kind(n)) {
                    for (std::size_t c = 0; c < sup.size(); ++c) {
                        const double th = wroot * std::exp(-term.exponent * wsq_in[static_cast<std::size_t>(m)][c]);
                        const double cs = std::sqrt(ma.col_sq[static_cast<std::size_t>(n)][c]);
                        fm = std::max(fm, std::abs(th) * cs);
                    }
                } else {
                    for (std::size_t c = 0; c < sup.size(); ++c) {
                        const double th = wroot * std::exp(-term.exponent * wsq_in[static_cast<std::size_t>(m)][c]);
                        fm += th * th * ma.col_sq[static_cast<std::size_t>(n)][c];
                    }
                    fm = std::sqrt(fm);
                }
                f *= fm;
            }
            total += f;
        }
        return total * nv;
    };

    // pair bounds, exact norms within the flop budget, then the tau-sorted plan
    const int M0 = Ein.term_count(), M1 = Eout.term_count();
    rep.pairs_total = M0 * M1;
    const double pair_flops = [&] {
        double fl = 0.0;
        for (int m = 0; m < d; ++m)
            fl += 2.0 * static_cast<double>(mode[static_cast<std::size_t>(m)].out_rows.size()) *
                  static_cast<double>(R * vh.rank(op.tree().leaf_node(m + 1))) *
                  static_cast<double>(R * vh.rank(op.tree().leaf_node(m + 1)));
        const double rr = static_cast<double>(R * std::max(1, vh.max_rank()));
        fl += 2.0 * (d - 1) * rr * rr * rr * rr;
        return fl;
    }();
    std::vector<double> znorm(static_cast<std::size_t>(M0), -1.0);
    std::vector<Eigen::MatrixXd> frames(static_cast<std::size_t>(d));
    struct Pair {
        double tau;
        int l0, l1;
        bool exact;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(M0) * static_cast<std::size_t>(M1));
    double flops_used = 0.0;
    for (int l0 = 0; l0 < M0; ++l0) {
        const bool build = flops_used + pair_flops * (1 + M1 / 4) <= opts.tau_exact_budget;
        double zb;
        if (build) {
            build_frames(l0, frames);
            HTTensor z = make_y(frames, 0);  // l1 = 0 placeholder; undo its scaling
            const auto& t1 = Eout.terms[0];
            const double wroot = std::pow(t1.weight, 1.0 / d);
            for (int m = 0; m < d; ++m) {
                Eigen::MatrixXd& F = z.frame[static_cast<std::size_t>(m)];
                for (Eigen::Index i = 0; i < F.rows(); ++i)
                    F.row(i) /= wroot * std::exp(-t1.exponent *
                                                 wsq_out[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)]);
            }
            zb = gram_norm(z);
            flops_used += pair_flops;
            znorm[static_cast<std::size_t>(l0)] = zb;
        } else {
            zb = z_norm_bound(l0);
        }
        for (int l1 = 0; l1 < M1; ++l1) {
            const double sup1 = Eout.term_sup_on_hull(l1, o2min_out);
            double tau = zb * sup1;
            bool exact = false;
            if (build && tau > 0.0 && flops_used + pair_flops <= opts.tau_exact_budget) {
                tau = std::min(tau, gram_norm(make_y(frames, l1)));
                flops_used += pair_flops;
                exact = true;
            }
            pairs.push_back({tau, l0, l1, exact});
            if (exact) ++rep.pairs_exact;
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.tau != b.tau) return a.tau < b.tau;
        if (a.l0 != b.l0) return a.l0 < b.l0;
        return a.l1 < b.l1;
    });
    // discard the largest prefix with total bound <= eta/4
    std::size_t q1 = 0;
    double discarded = 0.0;
    while (q1 < pairs.size() && discarded + pairs[q1].tau <= eta / 4.0) {
        discarded += pairs[q1].tau;
        ++q1;
    }
    rep.discarded_mass = discarded;
    rep.pairs_kept = static_cast<int>(pairs.size() - q1);

    // summation smallest-first with per-step recompression tolerances
    const std::size_t K = pairs.size() - q1;
    double denom = 0.0;
    for (std::size_t p = 0; p < K; ++p) denom += static_cast<double>(K - p) * pairs[q1 + p].tau;
    std::vector<int> audit_bound(static_cast<std::size_t>(op.tree().node_count()), 0);
    for (int nd = 1; nd < op.tree().node_count(); ++nd) {
        const int Ra = op.tree().is_leaf(nd) ? R : op.core_rank(nd);
        audit_bound[static_cast<std::size_t>(nd)] = rep.mhat_sym * rep.mhat_sym * Ra * vh.rank(nd);
    }
    HTTensor acc = zero_tensor(op.tree());
    double bank = 0.0, prefix = 0.0, used_budget = 0.0;
    int last_rank = 0;
    int built_l0 = -1;
    for (std::size_t q = 0; q < K; ++q) {
        const auto& pr = pairs[q1 + q];
        if (pr.l0 != built_l0) {
            build_frames(pr.l0, frames);
            built_l0 = pr.l0;
        }
        acc = add(acc, make_y(frames, pr.l1));
        prefix += pr.tau;
        if (denom > 0.0) bank += eta * prefix / (4.0 * denom);
        for (int nd = 1; nd < op.tree().node_count(); ++nd) {
            rep.max_rank_intermediate = std::max(rep.max_rank_intermediate, acc.rank(nd));
            if (acc.rank(nd) > audit_bound[static_cast<std::size_t>(nd)]) rep.rank_audit_ok = false;
        }
        const int trigger = std::clamp(2 * last_rank + 8, 24, opts.rank_cap);
        if (acc.max_rank() > opts.rank_cap)
            throw resource_error("apply: intermediate rank exceeds the configured cap");
        if (q + 1 == K || acc.max_rank() >= trigger) {
            acc = recompress(acc, bank);
            used_budget += bank;
            bank = 0.0;
            last_rank = acc.max_rank();
        }
    }
    rep.recompress_budget_used = used_budget;
    return finish(std::move(acc));
}

// ---------------------------------------------------------------------------
// dense reference, dense solve, condition estimation

namespace {

// reference inverse scaling weights on a box (surrogate for the n -> infinity limit)
std::vector<double> reference_inverse_weights(const LowRankOperator& op,
                                              const std::vector<Index>& dims, int* n_ref_out)
{
    std::vector<Index> hull(dims.size());
    for (std::size_t m = 0; m < dims.size(); ++m) hull[m] = dims[m];
    const double T = lambda_T_of_hull(hull, op.backends());
    const int n_ref = terms_required(op.delta() / 2.0, T, op.expsum()) + 50;
    if (n_ref_out) *n_ref_out = n_ref;
    const ScalingExpansion e = build_inverse_scaling(n_ref, op.expsum(), op.omega_min());
    std::size_t total = 1;
    for (Index n : dims) total *= static_cast<std::size_t>(n);
    std::vector<double> w(total);
    std::vector<Index> nu(dims.size(), 1);
    const double om = op.omega_min();
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int m = static_cast<int>(dims.size()) - 1; m >= 0; --m) {
            nu[static_cast<std::size_t>(m)] =
                static_cast<Index>(rem % static_cast<std::size_t>(dims[static_cast<std::size_t>(m)])) + 1;
            rem /= static_cast<std::size_t>(dims[static_cast<std::size_t>(m)]);
        }
        const double omega = canonical_weight(nu, op.backends());
        w[flat] = e.inverse_weight((omega / om) * (omega / om));
    }
    return w;
}

// dense per-mode component matrices on the box
std::vector<std::vector<Eigen::MatrixXd>> dense_components(const LowRankOperator& op,
                                                           const std::vector<Index>& dims)
{
    const int d = op.order();
    std::vector<std::vector<Eigen::MatrixXd>> comp(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m) {
        comp[static_cast<std::size_t>(m)].resize(static_cast<std::size_t>(op.component_count()) + 1);
        for (int n = 1; n <= op.component_count(); ++n) {
            const Index B = dims[static_cast<std::size_t>(m)];
            Eigen::MatrixXd M = Eigen::MatrixXd::Zero(B, B);
            for (Index i = 1; i <= B; ++i)
                for (Index j = 1; j <= B; ++j) M(i - 1, j - 1) = op.backends().mode(m).entry(n, i, j);
            comp[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)] = std::move(M);
        }
    }
    return comp;
}

// y += coeff * (kron of per-mode matrices) x on the box
void term_matvec(const std::vector<Index>& dims, const TuckerTerm& term,
                 const std::vector<std::vector<Eigen::MatrixXd>>& comp, const std::vector<double>& x,
                 std::vector<double>& y)
{
    const int d = static_cast<int>(dims.size());
    std::vector<double> cur = x;
    std::size_t total = x.size();
    for (int m = 0; m < d; ++m) {
        const int n = term.kinds[static_cast<std::size_t>(m)];
        if (n == 1) continue;
        const Eigen::MatrixXd& M = comp[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)];
        const std::size_t B = static_cast<std::size_t>(dims[static_cast<std::size_t>(m)]);
        std::size_t inner = 1;
        for (int mm = m + 1; mm < d; ++mm) inner *= static_cast<std::size_t>(dims[static_cast<std::size_t>(mm)]);
        const std::size_t outer = total / (B * inner);
        std::vector<double> next(total, 0.0);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t jj = 0; jj < B; ++jj) {
                    const double mij = M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj));
                    if (mij == 0.0) continue;
                    const double* src = cur.data() + (o * B + jj) * inner;
                    double* dst = next.data() + (o * B + i) * inner;
                    for (std::size_t t = 0; t < inner; ++t) dst[t] += mij * src[t];
                }
        count_gemm(outer * B, inner, B);
        cur = std::move(next);
    }
    for (std::size_t i = 0; i < total; ++i) y[i] += term.coeff * cur[i];
}

}  // namespace

DenseBox apply_dense_reference(const LowRankOperator& op, const HTTensor& v,
                               const std::vector<Index>& box_dims, double* truncation_bound)
{
    const int d = op.order();
    if (static_cast<int>(box_dims.size()) != d)
        throw structural_error("apply_dense_reference: box length != order");
    DenseBox out(box_dims);
    double bound = 0.0;
    if (!v.is_zero()) {
        const DenseBox vd = densify(v, box_dims);
        int n_ref = 0;
        const auto invw = reference_inverse_weights(op, box_dims, &n_ref);
        const auto comp = dense_components(op, box_dims);
        std::vector<double> x(vd.data.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = invw[i] * vd.data[i];
        std::vector<double> y(x.size(), 0.0);
        for (const auto& t : op.terms()) term_matvec(box_dims, t, comp, x, y);
        for (std::size_t i = 0; i < y.size(); ++i) out.data[i] = invw[i] * y[i];
        // scaling-surrogate part of the truncation bound
        const double rel = 2.0 * kInvSqrtPi * std::exp(-n_ref * op.expsum().h) / (1.0 - op.delta());
        bound += 3.0 * rel * op.norm_upper() * norm(v);
        // rows cut off by the box for non-diagonal components
        const ContractionSet contr = contractions(v);
        const double dl = op.delta();
        for (const auto& t : op.terms()) {
            bool nondiag = false;
            for (int m = 0; m < d; ++m)
                nondiag = nondiag ||
                          !op.backends().mode(m).diagonal_kind(t.kinds[static_cast<std::size_t>(m)]);
            if (!nondiag) continue;
            for (int m = 0; m < d; ++m) {
                const int n = t.kinds[static_cast<std::size_t>(m)];
                if (n <= 2) continue;
                const auto& be = op.backends().mode(m);
                if (box_dims[static_cast<std::size_t>(m)] >= be.max_index()) continue;
                double colpart = 0.0;
                for (const auto& [mu, pival] : contr.pi[static_cast<std::size_t>(m)]) {
                    double tail_sq = 0.0;
                    for (Index nu = box_dims[static_cast<std::size_t>(m)] + 1; nu <= be.max_index(); ++nu) {
                        const double e = be.entry(n, nu, mu);
                        if (e == 0.0) continue;
                        const double scaled = n == 3 ? e / be.weight(mu) : e / be.weight(nu);
                        tail_sq += scaled * scaled;
                    }
                    colpart += tail_sq * pival * pival;
                }
                double other = 1.0;
                for (int mm = 0; mm < d; ++mm)
                    if (mm != m && t.kinds[static_cast<std::size_t>(mm)] > 1)
                        other *= op.backends().mode(mm).component_norm(t.kinds[static_cast<std::size_t>(mm)]);
                bound += (1.0 + dl) * (1.0 + dl) * (1.0 + dl) * std::abs(t.coeff) * other * std::sqrt(colpart);
            }
        }
    }
    if (truncation_bound) *truncation_bound = bound;
    return out;
}

DenseBox dense_solve(const LowRankOperator& op, const DenseBox& f)
{
    const auto& dims = f.dims;
    DenseBox u(dims);
    const auto invw = reference_inverse_weights(op, dims, nullptr);
    if (op.diagonal_structure()) {
        // entrywise division by the diagonal of the rescaled system
        const int d = op.order();
        std::vector<Index> nu(static_cast<std::size_t>(d), 1);
        for (std::size_t flat = 0; flat < f.data.size(); ++flat) {
            std::size_t rem = flat;
            for (int m = d - 1; m >= 0; --m) {
                nu[static_cast<std::size_t>(m)] =
                    static_cast<Index>(rem % static_cast<std::size_t>(dims[static_cast<std::size_t>(m)])) + 1;
                rem /= static_cast<std::size_t>(dims[static_cast<std::size_t>(m)]);
            }
            double tval = 0.0;
            for (int m = 0; m < d; ++m)
                tval += op.diffusion()(m, m) *
                        op.backends().mode(m).entry(2, nu[static_cast<std::size_t>(m)], nu[static_cast<std::size_t>(m)]);
            const double diag = invw[flat] * tval * invw[flat];
            if (diag <= 0.0) throw parameter_error("dense_solve: non-positive diagonal entry");
            u.data[flat] = f.data[flat] / diag;
        }
        return u;
    }
    const std::size_t N = f.data.size();
    if (N > 4096) throw resource_error("dense_solve: box too large for dense factorization");
    const auto comp = dense_components(op, dims);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    std::vector<double> e(N, 0.0), col(N);
    for (std::size_t jcol = 0; jcol < N; ++jcol) {
        std::fill(e.begin(), e.end(), 0.0);
        e[jcol] = invw[jcol];
        std::fill(col.begin(), col.end(), 0.0);
        for (const auto& t : op.terms()) term_matvec(dims, t, comp, e, col);
        for (std::size_t i = 0; i < N; ++i) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jcol)) =
            invw[i] * col[i];
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(0.5 * (A + A.transpose()));
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
        throw parameter_error("dense_solve: system is not positive definite on this box");
    Eigen::Map<const Eigen::VectorXd> fv(f.data.data(), static_cast<Eigen::Index>(N));
    Eigen::VectorXd x = ldlt.solve(fv);
    for (std::size_t i = 0; i < N; ++i) u.data[i] = x(static_cast<Eigen::Index>(i));
    return u;
}

ConditionEstimate estimate_condition(const LowRankOperator& op, int box_level)
{
    ConditionEstimate est;
    const int d = op.order();
    std::vector<Index> dims(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m)
        dims[static_cast<std::size_t>(m)] = std::min(level_end(box_level), op.backends().mode(m).max_index());
    // diagonal fast path: entries depend on t = (omega/omega_min)^2 only
    if (op.diagonal_structure()) {
        bool tparam = true;
        double ratio = 0.0;
        for (int m = 0; m < d && tparam; ++m) {
            const auto& be = op.backends().mode(m);
            for (Index nu : {Index(1), Index(2), Index(3), Index(5), Index(17)}) {
                if (nu > be.max_index()) break;
                const double w = be.weight(nu);
                const double r = op.diffusion()(m, m) * be.entry(2, nu, nu) / (w * w);
                if (ratio == 0.0)
                    ratio = r;
                else if (std::abs(r - ratio) > 1e-10 * std::abs(ratio))
                    tparam = false;
            }
        }
        if (tparam) {
            const double T = lambda_T_of_hull(dims, op.backends());
            const int n_ref = terms_required(op.delta() / 2.0, T, op.expsum()) + 50;
            double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
            const int G = 4096;
            for (int g = 0; g <= G; ++g) {
                const double t = std::exp(std::log(T) * g / G);
                const double p = phi(op.expsum(), n_ref, t);
                const double r = ratio * t * p * p;
                lo = std::min(lo, r);
                hi = std::max(hi, r);
            }
            est.lam_min = lo * 0.9995;
            est.lam_max = hi * 1.0005;
            return est;
        }
    }
    std::size_t total = 1;
    for (Index n : dims) {
        total *= static_cast<std::size_t>(n);
        if (total > 400'000) throw resource_error("estimate_condition: box too large for power iteration");
    }
    const auto invw = reference_inverse_weights(op, dims, nullptr);
    const auto comp = dense_components(op, dims);
    auto matvec = [&](const std::vector<double>& x, std::vector<double>& y) {
        std::vector<double> sx(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) sx[i] = invw[i] * x[i];
        std::fill(y.begin(), y.end(), 0.0);
        for (const auto& t : op.terms()) term_matvec(dims, t, comp, sx, y);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= invw[i];
    };
    auto power = [&](auto&& apply_fn, bool& conv) {
        std::vector<double> x(total, 1.0), y(total);
        for (std::size_t i = 0; i < total; ++i) x[i] = 1.0 + 1e-3 * std::sin(static_cast<double>(i) + 1.0);
        double nx = 0.0;
        for (double v : x) nx += v * v;
        nx = std::sqrt(nx);
        for (auto& v : x) v /= nx;
        double lam = 0.0;
        conv = false;
        for (int it = 0; it < 400; ++it) {
            apply_fn(x, y);
            double ny = 0.0;
            for (double v : y) ny += v * v;
            ny = std::sqrt(ny);
            if (ny == 0.0) return 0.0;
            if (it > 3 && std::abs(ny - lam) < 1e-8 * ny) {
                conv = true;
                return ny;
            }
            lam = ny;
            for (std::size_t i = 0; i < total; ++i) x[i] = y[i] / ny;
        }
        return lam;
    };
    bool c1 = false, c2 = false;
    const double lmax = power(matvec, c1);
    const double shift = lmax * (1.0 + 1e-6);
    auto shifted = [&](const std::vector<double>& x, std::vector<double>& y) {
        matvec(x, y);
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = shift * x[i] - y[i];
    };
    const double rmax = power(shifted, c2);
    est.lam_max = lmax;
    est.lam_min = shift - rmax;
    est.converged = c1 && c2;
    return est;
}

std::string ApplyReport::to_json() const
{
    std::ostringstream os;
    os.precision(17);
    os << "{\"eta\":" << eta << ",\"zero_output\":" << (zero_output ? "true" : "false")
       << ",\"J\":" << J << ",\"e_J\":" << e_J << ",\"T_input\":" << T_input
       << ",\"T_output\":" << T_output << ",\"T_sym\":" << T_sym << ",\"m_input\":" << m_input
       << ",\"m_output\":" << m_output << ",\"m_sym\":" << m_sym << ",\"mhat_input\":" << mhat_input
       << ",\"mhat_output\":" << mhat_output << ",\"mhat_sym\":" << mhat_sym
       << ",\"pairs_total\":" << pairs_total << ",\"pairs_kept\":" << pairs_kept
       << ",\"pairs_exact\":" << pairs_exact << ",\"discarded_mass\":" << discarded_mass
       << ",\"recompress_budget_used\":" << recompress_budget_used
       << ",\"max_rank_intermediate\":" << max_rank_intermediate
       << ",\"max_rank_output\":" << max_rank_output << ",\"supp_total_output\":" << supp_total_output
       << ",\"rank_audit_ok\":" << (rank_audit_ok ? "true" : "false") << ",\"ops\":" << ops << "}";
    return os.str();
}

}  // namespace hts
