//
// Right-hand-side approximation and the adaptive Richardson iteration.
//

#include "htsolve/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hts {

namespace {
constexpr double kPi = 3.14159265358979323846;

// sum_{nu > X} (A nu^{-p})^2 bounded by the integral
double envelope_tail_sq(double A, double p, double X)
{
    if (2.0 * p <= 1.0) throw parameter_error("rhs: envelope exponent must exceed 1/2");
    return A * A * std::pow(X, 1.0 - 2.0 * p) / (2.0 * p - 1.0);
}

struct FactorData {
    std::vector<double> values;   // g(nu) for nu = 1..limit
    double norm_sq_upper = 0.0;   // ||g||^2 including the envelope tail
};

FactorData tabulate_factor(const RhsFactor& f, Index limit)
{
    FactorData out;
    out.values.resize(static_cast<std::size_t>(limit));
    double s = 0.0;
    for (Index nu = 1; nu <= limit; ++nu) {
        const double v = f.value(nu);
        out.values[static_cast<std::size_t>(nu - 1)] = v;
        s += v * v;
    }
    out.norm_sq_upper = s + envelope_tail_sq(f.env_A, f.env_p, static_cast<double>(limit));
    count_vec(static_cast<std::size_t>(limit));
    return out;
}

// sum over indices above `cut` of (g(nu)/weight(nu))^2, envelope tail included
double scaled_tail_sq(const RhsFactor& f, const FactorData& data, const UnivariateBackend& be,
                      Index cut)
{
    double s = 0.0;
    const Index limit = static_cast<Index>(data.values.size());
    for (Index nu = cut + 1; nu <= limit; ++nu) {
        const double w = be.weight(nu);
        const double v = data.values[static_cast<std::size_t>(nu - 1)];
        s += v * v / (w * w);
    }
    // weights grow at least linearly from the last tabulated value
    const double wl = be.weight(limit) / static_cast<double>(limit);
    s += envelope_tail_sq(f.env_A / wl, f.env_p + 1.0, static_cast<double>(limit));
    return s;
}

}  // namespace

RhsProvider constant_one_rhs(int d)
{
    if (d < 2) throw parameter_error("constant_one_rhs: order must be >= 2");
    RhsProvider g;
    RhsFactor f;
    f.value = [](Index nu) {
        if ((nu & 1) == 0) return 0.0;
        return 2.0 * std::sqrt(2.0) / (kPi * static_cast<double>(nu));
    };
    f.env_A = 2.0 * std::sqrt(2.0) / kPi;
    f.env_p = 1.0;
    g.terms.push_back(std::vector<RhsFactor>(static_cast<std::size_t>(d), f));
    return g;
}

double rhs_norm_upper(const RhsProvider& g, const LowRankOperator& op)
{
    const int d = op.order();
    const Index limit = std::min<Index>(op.backends().mode(0).max_index(), Index(1) << 14);
    double total = 0.0;
    for (const auto& term : g.terms) {
        double prod = 1.0;
        for (int m = 0; m < d; ++m)
            prod *= std::sqrt(tabulate_factor(term[static_cast<std::size_t>(m)], limit).norm_sq_upper);
        total += prod;
    }
    return (1.0 + op.delta()) / op.omega_min() * total;
}

RhsResult rhs_approx(const RhsProvider& g, double eta, const LowRankOperator& op)
{
    if (eta <= 0.0) throw tolerance_error("rhs: tolerance must be positive");
    const int d = op.order();
    if (g.terms.empty() || static_cast<int>(g.terms[0].size()) != d)
        throw structural_error("rhs: factor count does not match order");
    RhsResult out;
    out.f = zero_tensor(op.tree());
    const double norm_up = rhs_norm_upper(g, op);
    if (eta >= norm_up) return out;

    const double delta = op.delta();
    const std::size_t T = g.terms.size();
    const double eta_term = eta / static_cast<double>(T);

    int max_level_cut = 0;
    std::vector<std::vector<std::vector<double>>> scores(T);  // per term, mode: kept scores
    std::vector<std::vector<std::vector<Index>>> kept(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto& term = g.terms[t];
        const Index limit = std::min<Index>(op.backends().mode(0).max_index(), Index(1) << 14);
        std::vector<FactorData> data;
        for (int m = 0; m < d; ++m)
            data.push_back(tabulate_factor(term[static_cast<std::size_t>(m)], limit));

        // level cutoff: certified tail below eta/6 per term
        int k = 1;
        double tail = std::numeric_limits<double>::infinity();
        const int kmax = op.backends().mode(0).max_level();
        for (; k <= kmax; ++k) {
            double s = 0.0;
            for (int m = 0; m < d; ++m) {
                double prod = 1.0;
                for (int mm = 0; mm < d; ++mm)
                    if (mm != m) prod *= data[static_cast<std::size_t>(mm)].norm_sq_upper;
                s += scaled_tail_sq(term[static_cast<std::size_t>(m)], data[static_cast<std::size_t>(m)],
                                    op.backends().mode(m), std::min(limit, level_end(k))) *
                     prod;
            }
            tail = (1.0 + delta) * std::sqrt(s);
            if (tail <= eta_term / 6.0) break;
        }
        if (tail > eta_term / 6.0)
            throw resource_error("rhs: cannot certify the tolerance within the backend window");
        max_level_cut = std::max(max_level_cut, k);
        const Index cut = std::min(limit, level_end(k));

        // product-set restriction: drop the smallest per-axis scores greedily
        struct Item {
            double score;
            int mode;
            Index nu;
        };
        std::vector<Item> items;
        std::vector<double> inbox_norm_sq(static_cast<std::size_t>(d), 0.0);
        for (int m = 0; m < d; ++m)
            for (Index nu = 1; nu <= cut; ++nu) {
                const double v = data[static_cast<std::size_t>(m)].values[static_cast<std::size_t>(nu - 1)];
                inbox_norm_sq[static_cast<std::size_t>(m)] += v * v;
            }
        for (int m = 0; m < d; ++m) {
            double prod = 1.0;
            for (int mm = 0; mm < d; ++mm)
                if (mm != m) prod *= inbox_norm_sq[static_cast<std::size_t>(mm)];
            const auto& be = op.backends().mode(m);
            for (Index nu = 1; nu <= cut; ++nu) {
                const double v = data[static_cast<std::size_t>(m)].values[static_cast<std::size_t>(nu - 1)];
                if (v == 0.0) continue;
                const double w = be.weight(nu);
                items.push_back({v * v / (w * w) * prod, m, nu});
            }
        }
        std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
            if (a.score != b.score) return a.score < b.score;
            if (a.mode != b.mode) return a.mode < b.mode;
            return a.nu < b.nu;
        });
        const double drop_budget = std::pow(eta_term / (6.0 * (1.0 + delta)), 2.0);
        double dropped = 0.0;
        std::size_t cutpos = 0;
        while (cutpos < items.size() && dropped + items[cutpos].score <= drop_budget) {
            dropped += items[cutpos].score;
            ++cutpos;
        }
        kept[t].assign(static_cast<std::size_t>(d), {});
        for (std::size_t i = cutpos; i < items.size(); ++i)
            kept[t][static_cast<std::size_t>(items[i].mode)].push_back(items[i].nu);
        for (auto& kk : kept[t]) std::sort(kk.begin(), kk.end());
        scores[t].clear();
        (void)scores;
    }

    // scaling term count from the hull of all kept sets
    std::vector<Index> hull(static_cast<std::size_t>(d), 1);
    bool empty = false;
    for (std::size_t t = 0; t < T; ++t)
        for (int m = 0; m < d; ++m) {
            if (kept[t][static_cast<std::size_t>(m)].empty()) empty = true;
            else
                hull[static_cast<std::size_t>(m)] =
                    std::max(hull[static_cast<std::size_t>(m)], kept[t][static_cast<std::size_t>(m)].back());
        }
    if (empty) return out;
    const double TL = lambda_T_of_hull(hull, op.backends());
    const double etaM = eta * (1.0 - delta) / (2.0 * (norm_up + eta));
    out.n_scaling = terms_required(etaM, TL, op.expsum());
    out.level_cutoff = max_level_cut;
    const ScalingExpansion e = build_inverse_scaling(out.n_scaling, op.expsum(), op.omega_min());
    out.rank_bound = static_cast<int>(T) * e.term_count();

    for (std::size_t t = 0; t < T; ++t) {
        std::vector<std::vector<std::pair<Index, double>>> fac(static_cast<std::size_t>(d));
        for (int m = 0; m < d; ++m)
            for (Index nu : kept[t][static_cast<std::size_t>(m)])
                fac[static_cast<std::size_t>(m)].emplace_back(
                    nu, g.terms[t][static_cast<std::size_t>(m)].value(nu));
        const HTTensor gt = from_rank_one(op.tree(), fac);
        out.f = add(out.f, apply_inverse_scaling(e, op.backends(), gt));
    }
    return out;
}

double residual_bound(double c_A, double rho, double omega, double beta1, double beta2,
                      double residual_norm, double eta)
{
    return c_A * rho * residual_norm + (c_A * rho + omega + beta1 + beta2) * eta;
}

SolveResult solve(const LowRankOperator& op, const RhsProvider& f, SolveParams params)
{
    SolveResult result;
    SolveTrace& tr = result.trace;
    const auto ops_begin = ops_counters().total();
    const int d = op.order();

    const double kp = kappa_recompress(d), kc = kappa_coarsen(d);
    tr.alpha = params.alpha;
    tr.kappa1 = 1.0 / (1.0 + (1.0 + params.alpha) * (kp + kc + kp * kc));
    tr.kappa2 = (1.0 + params.alpha) * kp * tr.kappa1;
    tr.kappa3 = kc * (kp + 1.0) * (1.0 + params.alpha) * tr.kappa1;

    const auto [lmin, lmax] = op.spectral_interval();
    if (lmin <= 0.0) throw parameter_error("solve: estimated spectrum is not positive");
    tr.omega = params.omega > 0.0 ? params.omega : 2.0 / (lmax + lmin);
    tr.rho = params.rho > 0.0
                 ? params.rho
                 : std::clamp(1.05 * (lmax - lmin) / (lmax + lmin) + 1e-4, 5e-2, 0.995);
    tr.c_A = params.c_A > 0.0 ? params.c_A : op.inv_norm_upper();
    tr.beta1 = params.beta1;
    tr.beta2 = params.beta2;
    if (params.beta2 <= 0.0) throw parameter_error("solve: beta2 must be positive");

    // initial error level from a coarse right-hand side
    double eps0 = params.eps0;
    if (eps0 <= 0.0) {
        const double crude = 1e-2 * rhs_norm_upper(f, op);
        const RhsResult f0 = rhs_approx(f, crude, op);
        eps0 = tr.c_A * (norm(f0.f) + crude);
    }
    tr.eps0 = eps0;
    tr.eps = params.eps;

    int inner_cap = 0;
    {
        const double target = 0.5 * tr.kappa1;
        double pw = 1.0;
        while (inner_cap < 100000) {
            if (pw * (1.0 + (tr.omega + tr.beta1 + tr.beta2) * inner_cap) <= target) break;
            ++inner_cap;
            pw *= tr.rho;
        }
        if (inner_cap >= 100000) throw parameter_error("solve: inner-loop cap does not close");
    }
    tr.inner_cap = inner_cap;
    tr.ops_setup = ops_counters().total() - ops_begin;

    ApplyOptions aopts;
    aopts.rank_cap = params.rank_cap;
    aopts.supp_cap = params.supp_cap;
    aopts.tau_exact_budget = params.tau_exact_budget;

    HTTensor u = zero_tensor(op.tree());
    tr.milestones.push_back({0, eps0, eps0, true, 0, ops_counters().total() - ops_begin});
    int k = 0;
    try {
        while (std::exp2(-k) * eps0 > params.eps) {
            if (k >= params.max_outer) {
                tr.aborted = true;
                tr.abort_reason = "outer iteration cap reached";
                break;
            }
            HTTensor w = u;
            int j = 0;
            double bound = std::numeric_limits<double>::infinity();
            int max_rank_apply = 0;
            const double target = tr.kappa1 * std::exp2(-(k + 1)) * eps0;
            do {
                const double eta = std::pow(tr.rho, j + 1) * std::exp2(-k) * eps0;
                auto [aw, rep] = apply(op, w, 0.5 * eta, aopts);
                const RhsResult fr = rhs_approx(f, 0.5 * eta, op);
                const HTTensor r = add(aw, scale(fr.f, -1.0));
                const double rnorm = norm(r);
                HTTensor next = add(w, scale(r, -tr.omega));
                next = recompress(next, tr.beta1 * eta);
                if (next.max_rank() > params.rank_cap)
                    throw resource_error("solve: iterate rank exceeds the configured cap");
                next = coarsen_to_tolerance(next, tr.beta2 * eta);
                w = std::move(next);
                bound = residual_bound(tr.c_A, tr.rho, tr.omega, tr.beta1, tr.beta2, rnorm, eta);
                max_rank_apply = std::max(max_rank_apply, rep.max_rank_intermediate);
                TraceRow row;
                row.k = k;
                row.j = j;
                row.eta = eta;
                row.residual = rnorm;
                row.bound = bound;
                row.max_rank_iterate = w.max_rank();
                row.max_rank_intermediate = rep.max_rank_intermediate;
                row.supp_total = w.total_support();
                row.ops_cum = ops_counters().total() - ops_begin;
                row.tol_apply = 0.5 * eta;
                row.tol_rhs = 0.5 * eta;
                row.tol_recompress = tr.beta1 * eta;
                row.tol_coarsen = tr.beta2 * eta;
                tr.rows.push_back(row);
                ++j;
            } while (!(j >= inner_cap || bound <= target));
            u = recompress(w, tr.kappa2 * std::exp2(-(k + 1)) * eps0);
            u = coarsen_to_tolerance(u, tr.kappa3 * std::exp2(-(k + 1)) * eps0);
            const double mbound = bound + (tr.kappa2 + tr.kappa3) * std::exp2(-(k + 1)) * eps0;
            const bool certified = mbound <= std::exp2(-(k + 1)) * eps0 * (1.0 + 1e-9);
            tr.milestones.push_back({k + 1, std::exp2(-(k + 1)) * eps0, mbound, certified,
                                     u.max_rank(), ops_counters().total() - ops_begin});
            if (!certified) {
                tr.aborted = true;
                tr.abort_reason = "milestone bound not contractive";
                break;
            }
            ++k;
        }
    } catch (const resource_error& e) {
        tr.aborted = true;
        tr.abort_reason = e.what();
    }
    tr.ops_total = ops_counters().total() - ops_begin;
    result.u = std::move(u);
    result.final_bound = tr.milestones.back().certified ? tr.milestones.back().bound
                                                        : tr.milestones.back().eps_k;
    return result;
}

}  // namespace hts
