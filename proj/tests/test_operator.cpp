#include <cmath>
#include <random>

#include "doctest.h"
#include "htsolve/operator.hpp"
#include "test_util.hpp"

using namespace hts;
using testutil::box_of;
using testutil::random_tensor;

namespace {
constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<SineSpectralBackend> sine(int max_level, double scale = 1.0)
{
    return std::make_shared<SineSpectralBackend>(scale, max_level);
}

// random tensor supported on indices up to 2^{lev+1}-1
HTTensor random_level_tensor(std::mt19937& rng, int d, int max_rank, int supp_size, int lev)
{
    return random_tensor(rng, d, max_rank, supp_size, level_end(lev));
}

// coefficient map via the explicit Tucker terms (independent route)
double term_coefficient(const LowRankOperator& op, const std::vector<int>& n)
{
    double c = 0.0;
    for (const auto& t : op.terms()) {
        bool match = true;
        for (int m = 0; m < op.order(); ++m)
            match = match && t.kinds[static_cast<std::size_t>(m)] == n[static_cast<std::size_t>(m)];
        if (match) c += t.coeff;
    }
    return c;
}

}  // namespace

TEST_CASE("operator cores")
{
    SUBCASE("laplacian d=2: root core only")
    {
        const LowRankOperator op = build_laplacian(2, sine(6));
        REQUIRE(op.core(0).size() == 1);
        Eigen::MatrixXd expect(2, 2);
        expect << 0, 1, 1, 0;
        CHECK((op.core(0)[0] - expect).norm() == 0.0);
    }
    SUBCASE("laplacian d=3: interior core values, rank two everywhere")
    {
        const LowRankOperator op = build_laplacian(3, sine(6));
        CHECK(op.core_rank(1) == 2);
        Eigen::MatrixXd c1(2, 2), c2(2, 2);
        c1 << 1, 0, 0, 0;
        c2 << 0, 1, 1, 0;
        CHECK((op.core(1)[0] - c1).norm() == 0.0);
        CHECK((op.core(1)[1] - c2).norm() == 0.0);
        // contraction reproduces the unit-direction pattern
        CHECK(op.coefficient({2, 1, 1}) == 1.0);
        CHECK(op.coefficient({1, 2, 1}) == 1.0);
        CHECK(op.coefficient({1, 1, 2}) == 1.0);
        CHECK(op.coefficient({2, 2, 1}) == 0.0);
        CHECK(op.coefficient({1, 1, 1}) == 0.0);
    }
    SUBCASE("core contraction equals the term coefficients for d up to 5")
    {
        for (int d : {2, 3, 4, 5}) {
            const LowRankOperator op = build_laplacian(d, sine(5));
            std::vector<int> n(static_cast<std::size_t>(d), 1);
            // enumerate all component index vectors
            while (true) {
                CHECK(op.coefficient(n) == doctest::Approx(term_coefficient(op, n)));
                int m = 0;
                while (m < d && ++n[static_cast<std::size_t>(m)] > op.component_count()) {
                    n[static_cast<std::size_t>(m)] = 1;
                    ++m;
                }
                if (m == d) break;
            }
        }
    }
    SUBCASE("tridiagonal d=2 root core")
    {
        const LowRankOperator op = build_tridiagonal(2, sine(6));
        CHECK(op.coefficient({2, 1}) == 2.0);
        CHECK(op.coefficient({1, 2}) == 2.0);
        CHECK(op.coefficient({3, 4}) == -1.0);
        CHECK(op.coefficient({4, 3}) == -1.0);
        CHECK(op.coefficient({3, 3}) == 0.0);
    }
    SUBCASE("tridiagonal d=3,4 coefficients and symmetry")
    {
        for (int d : {3, 4}) {
            const LowRankOperator op = build_tridiagonal(d, sine(5));
            std::vector<int> n(static_cast<std::size_t>(d), 1);
            while (true) {
                CHECK(op.coefficient(n) == doctest::Approx(term_coefficient(op, n)));
                // swapping kinds 3 and 4 leaves the coefficient unchanged
                std::vector<int> swapped = n;
                for (auto& x : swapped) x = x == 3 ? 4 : (x == 4 ? 3 : x);
                CHECK(op.coefficient(n) == doctest::Approx(op.coefficient(swapped)));
                int m = 0;
                while (m < d && ++n[static_cast<std::size_t>(m)] > op.component_count()) {
                    n[static_cast<std::size_t>(m)] = 1;
                    ++m;
                }
                if (m == d) break;
            }
        }
    }
}

TEST_CASE("a-posteriori compression bound")
{
    SUBCASE("zero tensor gives zero")
    {
        const LowRankOperator op = build_tridiagonal(2, sine(6));
        for (int J : {0, 2, 5}) CHECK(a_posteriori_error(op, zero_tensor(op.tree()), J) == 0.0);
    }
    SUBCASE("laplacian bound vanishes once the best set covers the support")
    {
        std::mt19937 rng(3);
        const LowRankOperator op = build_laplacian(2, sine(6));
        HTTensor v = random_level_tensor(rng, 2, 2, 6, 3);
        int J = 0;
        while ((1ll << J) < v.total_support()) ++J;
        CHECK(a_posteriori_error(op, v, J) <= 1e-12);
        CHECK(a_posteriori_error(op, v, std::max(0, J - 1)) > 0.0);
    }
    SUBCASE("tridiagonal bound decreases in J and dominates the measured error")
    {
        std::mt19937 rng(5);
        const auto be = sine(6);
        const LowRankOperator op = build_tridiagonal(2, be);
        const BackendSet& bs = op.backends();
        for (int trial = 0; trial < 4; ++trial) {
            HTTensor v = random_level_tensor(rng, 2, 2, 5, 3);
            const double e0 = a_posteriori_error(op, v, 0);
            const double e4 = a_posteriori_error(op, v, 4);
            CHECK(e4 < e0);
            // dense check of || (A_c - A_{c,J}) v || against e_J on the window
            const Index N = be->max_index();
            const ContractionSet c = contractions(v);
            for (int J : {0, 2, 4}) {
                // partition index per support position, as the apply route builds it
                std::vector<std::vector<int>> part(2);
                for (int m = 0; m < 2; ++m) {
                    auto pi = c.pi[static_cast<std::size_t>(m)];
                    std::sort(pi.begin(), pi.end(), [](const auto& a, const auto& b) {
                        if (a.second != b.second) return a.second > b.second;
                        return a.first < b.first;
                    });
                    part[static_cast<std::size_t>(m)].assign(
                        v.supp[static_cast<std::size_t>(m)].size(), -1);
                    for (std::size_t i = 0; i < pi.size() && i < (std::size_t{1} << J); ++i) {
                        int p = 0;
                        while ((std::size_t{1} << p) <= i) ++p;
                        const auto& sup = v.supp[static_cast<std::size_t>(m)];
                        const auto it = std::lower_bound(sup.begin(), sup.end(), pi[i].first);
                        part[static_cast<std::size_t>(m)][static_cast<std::size_t>(it - sup.begin())] = p;
                    }
                }
                // dense difference operator applied to the canonically rescaled v
                const DenseBox dv = densify(v, {N, N});
                std::vector<double> x(dv.data.size());
                for (Index a = 1; a <= N; ++a)
                    for (Index b = 1; b <= N; ++b)
                        x[static_cast<std::size_t>((a - 1) * N + (b - 1))] =
                            dv.at({a, b}) / canonical_weight({a, b}, bs);
                std::vector<double> y(x.size(), 0.0);
                std::vector<Index> rows;
                std::vector<double> vals;
                for (const auto& term : op.terms()) {
                    // columns of the per-mode difference T_n - T_n,J(partition)
                    std::vector<Eigen::MatrixXd> diff(2);
                    for (int m = 0; m < 2; ++m) {
                        const int kind = term.kinds[static_cast<std::size_t>(m)];
                        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N);
                        if (kind != 1) {
                            for (std::size_t cpos = 0; cpos < v.supp[static_cast<std::size_t>(m)].size(); ++cpos) {
                                const Index mu = v.supp[static_cast<std::size_t>(m)][cpos];
                                for (Index nu = 1; nu <= N; ++nu) D(nu - 1, mu - 1) = bs.mode(m).entry(kind, nu, mu);
                                const int p = part[static_cast<std::size_t>(m)][cpos];
                                if (p >= 0) {
                                    bs.mode(m).compressed_column(kind, J - p, mu, rows, vals);
                                    for (std::size_t i = 0; i < rows.size(); ++i)
                                        D(rows[i] - 1, mu - 1) -= vals[i];
                                }
                            }
                        }
                        diff[static_cast<std::size_t>(m)] = std::move(D);
                    }
                    // apply term with the difference at one mode, full at the other
                    for (int dm = 0; dm < 2; ++dm) {
                        if (term.kinds[static_cast<std::size_t>(dm)] == 1) continue;
                        Eigen::MatrixXd M1(N, N), M2(N, N);
                        for (Index a = 1; a <= N; ++a)
                            for (Index b = 1; b <= N; ++b) {
                                M1(a - 1, b - 1) = dm == 0 ? diff[0](a - 1, b - 1)
                                                           : bs.mode(0).entry(term.kinds[0], a, b);
                                // remaining factor: exact for modes before dm, compressed after
                                M2(a - 1, b - 1) = dm == 1 ? diff[1](a - 1, b - 1)
                                                           : (bs.mode(1).entry(term.kinds[1], a, b) -
                                                              diff[1](a - 1, b - 1));
                            }
                        Eigen::Map<const Eigen::MatrixXd> X(x.data(), N, N);  // col-major: X(b,a)
                        Eigen::MatrixXd Y = M1 * X.transpose() * M2.transpose();
                        for (Index a = 1; a <= N; ++a)
                            for (Index b = 1; b <= N; ++b)
                                y[static_cast<std::size_t>((a - 1) * N + (b - 1))] +=
                                    term.coeff * Y(a - 1, b - 1);
                    }
                }
                double err_sq = 0.0;
                for (Index a = 1; a <= N; ++a)
                    for (Index b = 1; b <= N; ++b) {
                        const double s = y[static_cast<std::size_t>((a - 1) * N + (b - 1))] /
                                         canonical_weight({a, b}, bs);
                        err_sq += s * s;
                    }
                CHECK(std::sqrt(err_sq) <= a_posteriori_error(op, c, J) * (1.0 + 1e-9));
            }
        }
    }
}

TEST_CASE("apply parameter selection")
{
    std::mt19937 rng(7);
    const LowRankOperator op = build_laplacian(2, sine(8));
    SUBCASE("zero input short-circuits")
    {
        CHECK(choose_apply_params(op, zero_tensor(op.tree()), 1e-3).zero_shortcircuit);
    }
    SUBCASE("overly large tolerance short-circuits")
    {
        HTTensor v = random_level_tensor(rng, 2, 2, 4, 3);
        CHECK(choose_apply_params(op, v, 10.0 * op.norm_upper() * norm(v)).zero_shortcircuit);
    }
    SUBCASE("laplacian depth covers the support; m monotone in eta")
    {
        HTTensor v = random_level_tensor(rng, 2, 2, 6, 3);
        const double nv = norm(v);
        const ApplyParams p1 = choose_apply_params(op, v, 1e-2 * nv);
        int Jmin = 0;
        while ((1ll << Jmin) < v.total_support()) ++Jmin;
        CHECK(p1.J <= Jmin);
        const ApplyParams p2 = choose_apply_params(op, v, 1e-4 * nv);
        CHECK(p2.m >= p1.m);
        CHECK(p2.J >= p1.J);
    }
}

TEST_CASE("apply certificates")
{
    std::mt19937 rng(11);
    SUBCASE("laplacian on a delta tensor matches the closed form")
    {
        const auto be = sine(8);
        const LowRankOperator op = build_laplacian(2, be, 0.1);
        HTTensor v = from_rank_one(op.tree(), {{{1, 1.0}}, {{1, 1.0}}});
        const double eta = 1e-8;
        auto [w, rep] = apply(op, v, eta);
        // reference weight of the limit scaling at (1,1)
        const ScalingExpansion ref = build_inverse_scaling(
            terms_baseline(4.0, op.expsum()) + 50, op.expsum(), op.omega_min());
        const double om2 = 2.0 * kPi * kPi;
        const double closed = ref.inverse_weight(om2) * (2.0 * kPi * kPi) * ref.inverse_weight(om2);
        CHECK(evaluate_entry(w, {1, 1}) == doctest::Approx(closed).epsilon(0.0).scale(1.0).epsilon(
                                               eta / closed * 2));
        CHECK(rep.rank_audit_ok);
    }
    SUBCASE("certificate against the dense reference, both operators")
    {
        for (const bool tridiag : {false, true}) {
            const int lev_window = 7;
            const auto be = sine(lev_window);
            const LowRankOperator op = tridiag ? build_tridiagonal(2, be, 0.1)
                                               : build_laplacian(2, be, 0.1);
            for (int trial = 0; trial < 3; ++trial) {
                HTTensor v = random_level_tensor(rng, 2, 3, 8, 4);
                const double nv = norm(v);
                const double eta = 1e-3 * nv;
                auto [w, rep] = apply(op, v, eta);
                CHECK(rep.rank_audit_ok);
                const std::vector<Index> dims(2, be->max_index());
                double bar = 0.0;
                const DenseBox ref = apply_dense_reference(op, v, dims, &bar);
                const double err = testutil::dense_distance(ref, densify(w, dims));
                CHECK(err <= eta + bar + 1e-12 * nv);
                // support bound from the column budgets
                double alpha_l1 = 0.0;
                for (int jj = 0; jj <= rep.J; ++jj) {
                    double worst = 0.0;
                    for (int n = 1; n <= op.component_count(); ++n)
                        worst = std::max(worst, be->alpha(n, jj));
                    alpha_l1 += worst;
                }
                for (int m = 0; m < 2; ++m)
                    CHECK(static_cast<double>(w.supp[static_cast<std::size_t>(m)].size()) <=
                          op.component_count() * alpha_l1 * std::exp2(rep.J) +
                              static_cast<double>(v.supp[static_cast<std::size_t>(m)].size()));
            }
        }
    }
    SUBCASE("halving the tolerance never relaxes the band or the scaling ranks")
    {
        const LowRankOperator op = build_tridiagonal(2, sine(7), 0.1);
        HTTensor v = random_level_tensor(rng, 2, 2, 6, 3);
        const double nv = norm(v);
        auto [w1, r1] = apply(op, v, 2e-2 * nv);
        auto [w2, r2] = apply(op, v, 1e-2 * nv);
        CHECK(r2.J >= r1.J);
        CHECK(r2.m_sym >= r1.m_sym);
        CHECK(a_posteriori_error(op, v, r2.J) <= a_posteriori_error(op, v, r1.J) + 1e-15);
    }
    SUBCASE("sparsity stability ratio is finite and recorded")
    {
        const LowRankOperator op = build_tridiagonal(2, sine(7), 0.1);
        HTTensor v = random_level_tensor(rng, 2, 2, 6, 3);
        auto [w, rep] = apply(op, v, 1e-2 * norm(v));
        const ContractionSet cv = contractions(v), cw = contractions(w);
        for (int m = 0; m < 2; ++m) {
            double nv2 = 0.0, nw2 = 0.0;
            for (const auto& [nu, val] : cv.pi[static_cast<std::size_t>(m)]) nv2 += val * val;
            for (const auto& [nu, val] : cw.pi[static_cast<std::size_t>(m)]) nw2 += val * val;
            CHECK(std::sqrt(nw2) <= 100.0 * std::sqrt(nv2));
        }
    }
    SUBCASE("zero and short-circuit outputs")
    {
        const LowRankOperator op = build_laplacian(3, sine(6), 0.1);
        auto [w0, r0] = apply(op, zero_tensor(op.tree()), 1e-3);
        CHECK(w0.is_zero());
        CHECK(r0.zero_output);
        HTTensor v = random_level_tensor(rng, 3, 2, 3, 2);
        auto [w1, r1] = apply(op, v, 10.0 * op.norm_upper() * norm(v));
        CHECK(w1.is_zero());
        CHECK(r1.zero_output);
        CHECK_THROWS_AS(apply(op, v, 0.0), tolerance_error);
    }
}

TEST_CASE("dense reference basics")
{
    std::mt19937 rng(13);
    const LowRankOperator op = build_laplacian(2, sine(6), 0.1);
    SUBCASE("zero input")
    {
        double bar = 1.0;
        const DenseBox r = apply_dense_reference(op, zero_tensor(op.tree()), {8, 8}, &bar);
        CHECK(bar == 0.0);
        for (double x : r.data) CHECK(x == 0.0);
    }
    SUBCASE("diagonal closed form")
    {
        HTTensor v = random_level_tensor(rng, 2, 2, 4, 2);
        const std::vector<Index> dims = {8, 8};
        const DenseBox dv = densify(v, dims);
        const DenseBox av = apply_dense_reference(op, v, dims, nullptr);
        const ScalingExpansion ref = build_inverse_scaling(
            terms_baseline(64.0, op.expsum()) + 50, op.expsum(), op.omega_min());
        for (Index a = 1; a <= 8; ++a)
            for (Index b = 1; b <= 8; ++b) {
                const double om = canonical_weight({a, b}, op.backends());
                const double lam = kPi * kPi * static_cast<double>(a * a + b * b);
                const double iw = ref.inverse_weight(om * om);
                CHECK(av.at({a, b}) ==
                      doctest::Approx(iw * lam * iw * dv.at({a, b})).epsilon(1e-9).scale(norm(v)));
            }
    }
    SUBCASE("linearity")
    {
        HTTensor a = random_level_tensor(rng, 2, 2, 4, 2);
        HTTensor b = random_level_tensor(rng, 2, 2, 4, 2);
        const std::vector<Index> dims = {8, 8};
        const DenseBox ra = apply_dense_reference(op, a, dims, nullptr);
        const DenseBox rb = apply_dense_reference(op, b, dims, nullptr);
        const DenseBox rs = apply_dense_reference(op, add(a, b), dims, nullptr);
        for (std::size_t i = 0; i < rs.data.size(); ++i)
            CHECK(rs.data[i] == doctest::Approx(ra.data[i] + rb.data[i]).epsilon(1e-12).scale(
                                    norm(a) + norm(b)));
    }
}

TEST_CASE("condition estimation")
{
    SUBCASE("laplacian with delta = 0.1 stays within the scaling bound")
    {
        for (int d : {2, 3, 5}) {
            const LowRankOperator op = build_laplacian(d, sine(8), 0.1);
            const auto est = estimate_condition(op, 6);
            CHECK(est.lam_max / est.lam_min <= (1.1 / 0.9) * (1.1 / 0.9) + 0.02);
        }
    }
    SUBCASE("diagonal rescaling removes the coefficient spread")
    {
        BackendSet bs;
        bs.modes = {sine(8, 4.0), sine(8, 1.0)};
        const LowRankOperator op = build_diagonal({4.0, 1.0}, bs, 0.1);
        const LowRankOperator lap = build_laplacian(2, sine(8), 0.1);
        const auto e1 = estimate_condition(op, 6);
        const auto e2 = estimate_condition(lap, 6);
        CHECK(e1.lam_max / e1.lam_min ==
              doctest::Approx(e2.lam_max / e2.lam_min).epsilon(1e-6));
    }
    SUBCASE("tridiagonal condition grows with d (recorded)")
    {
        const auto c2 = estimate_condition(build_tridiagonal(2, sine(5), 0.1), 3);
        const auto c3 = estimate_condition(build_tridiagonal(3, sine(5), 0.1), 3);
        const auto c4 = estimate_condition(build_tridiagonal(4, sine(5), 0.1), 2);
        const double k2 = c2.lam_max / c2.lam_min;
        const double k3 = c3.lam_max / c3.lam_min;
        const double k4 = c4.lam_max / c4.lam_min;
        CHECK(k3 > k2);
        CHECK(k4 > k3);
        CHECK(k2 > 2.0);  // well above the laplacian value
    }
}
