#include <cmath>
#include <random>

#include "doctest.h"
#include "htsolve/oracle.hpp"
#include "htsolve/scaling.hpp"
#include "test_util.hpp"

using namespace hts;
using testutil::box_of;
using testutil::random_tensor;

namespace {
constexpr double kPi = 3.14159265358979323846;

BackendSet sine_set(int d, double scale = 1.0, int max_level = 12)
{
    return uniform_backends(d, std::make_shared<SineSpectralBackend>(scale, max_level));
}
}  // namespace

TEST_CASE("quadrature parameter selection")
{
    SUBCASE("delta = 0.5")
    {
        const ExpSumParams p = choose_params(0.5);
        CHECK(p.h == doctest::Approx(kPi * kPi / (5.0 * (std::abs(std::log(0.25)) + 4.0))).epsilon(1e-14));
        CHECK(p.n_plus == 7);
    }
    SUBCASE("delta = 0.1")
    {
        const ExpSumParams p = choose_params(0.1);
        CHECK(p.h == doctest::Approx(kPi * kPi / (5.0 * (std::log(20.0) + 4.0))).epsilon(1e-14));
    }
    SUBCASE("delta near one stays finite")
    {
        const ExpSumParams p = choose_params(1.0 - 1e-12);
        CHECK(p.h == doctest::Approx(kPi * kPi / (5.0 * (std::log(2.0) + 4.0))).epsilon(1e-9));
        CHECK(p.n_plus >= 1);
    }
    SUBCASE("invalid delta")
    {
        CHECK_THROWS_AS(choose_params(0.0), parameter_error);
        CHECK_THROWS_AS(choose_params(1.0), parameter_error);
    }
}

TEST_CASE("phi evaluation")
{
    SUBCASE("single-term sum")
    {
        ExpSumParams p = choose_params(0.5);
        p.n_plus = 0;  // single term k = 0
        const double t = 3.0;
        const double expect = p.h * (1.0 / std::sqrt(kPi)) * std::exp(-std::log(2.0) * std::log(2.0) * t);
        CHECK(phi(p, 0, t) == doctest::Approx(expect).epsilon(1e-14));
    }
    SUBCASE("relative bound sampled at spread-out points, delta = 0.01")
    {
        const ExpSumParams p = choose_params(0.01);
        const int n = terms_baseline(1e8, p);
        for (double t : {1.0, 10.0, 1e4, 1e8}) {
            CHECK(std::sqrt(t) * std::abs(1.0 / std::sqrt(t) - phi(p, n, t)) <= 0.01);
        }
    }
    SUBCASE("bound instance at t = 1, delta = 0.5")
    {
        const ExpSumParams p = choose_params(0.5);
        const int n = terms_baseline(1.0 + 1e-12, p);
        const double v = phi(p, n, 1.0);
        CHECK(v >= 0.5);
        CHECK(v <= 1.5);
    }
    SUBCASE("domain starts at one; monotone in n")
    {
        const ExpSumParams p = choose_params(0.1);
        CHECK_THROWS_AS(phi(p, 3, 0.5), parameter_error);
        for (int n = 0; n < 30; ++n) CHECK(phi(p, n, 2.0) <= phi(p, n + 1, 2.0));
    }
}

TEST_CASE("terms required")
{
    const ExpSumParams p = choose_params(0.1);
    SUBCASE("baseline equals M(delta/2, T)")
    {
        CHECK(terms_baseline(1e6, p) == terms_required(0.05, 1e6, p));
    }
    SUBCASE("formula instance evaluated directly")
    {
        const double arg =
            std::log(2.0 / std::sqrt(kPi)) + std::abs(std::log(1e-3)) + 0.5 * std::log(1e6);
        CHECK(terms_required(1e-3, 1e6, p) == static_cast<int>(std::ceil(arg / p.h)));
    }
    SUBCASE("T to one drops the ln T part")
    {
        const double eta = 1e-4;
        const double arg = std::log(2.0 / std::sqrt(kPi)) + std::abs(std::log(eta));
        CHECK(terms_required(eta, 1.0, p) == static_cast<int>(std::ceil(arg / p.h)));
    }
    SUBCASE("monotone in both arguments")
    {
        CHECK(terms_required(1e-4, 1e4, p) >= terms_required(1e-3, 1e4, p));
        CHECK(terms_required(1e-3, 1e6, p) >= terms_required(1e-3, 1e4, p));
    }
}

TEST_CASE("canonical weights")
{
    SUBCASE("sine backend values")
    {
        CHECK(canonical_weight({1, 1}, sine_set(2)) == doctest::Approx(kPi * std::sqrt(2.0)).epsilon(1e-14));
        CHECK(canonical_weight({1, 1, 1}, sine_set(3)) == doctest::Approx(kPi * std::sqrt(3.0)).epsilon(1e-14));
    }
    SUBCASE("equal weights scale with sqrt(d)")
    {
        for (int d : {2, 4, 7}) {
            std::vector<Index> nu(static_cast<std::size_t>(d), 3);
            CHECK(canonical_weight(nu, sine_set(d)) ==
                  doctest::Approx(3.0 * kPi * std::sqrt(static_cast<double>(d))).epsilon(1e-14));
        }
    }
    SUBCASE("lambda_T hull values")
    {
        const BackendSet b = sine_set(2);
        DimensionTree t2(2);
        HTTensor v = from_rank_one(t2, {{{1, 1.0}}, {{1, 1.0}}});
        CHECK(lambda_T_bound(v, b) == doctest::Approx(1.0));
        HTTensor w = from_rank_one(t2, {{{1, 1.0}, {4, 1.0}}, {{2, 1.0}, {4, 0.5}}});
        CHECK(lambda_T_bound(w, b) == doctest::Approx(16.0));
        // enlarging the support never decreases T
        HTTensor w2 = from_rank_one(t2, {{{1, 1.0}, {4, 1.0}, {9, 0.1}}, {{2, 1.0}, {4, 0.5}}});
        CHECK(lambda_T_bound(w2, b) >= lambda_T_bound(w, b));
        CHECK(lambda_T_bound(zero_tensor(t2), b) == 1.0);
    }
}

TEST_CASE("inverse scaling expansion")
{
    const BackendSet b = sine_set(3);
    const double om = omega_min_of(b);
    const ExpSumParams p = choose_params(0.1);
    SUBCASE("term count and refinement prefix property")
    {
        const ScalingExpansion e1 = build_inverse_scaling(5, p, om);
        const ScalingExpansion e2 = build_inverse_scaling(9, p, om);
        CHECK(e1.term_count() == 1 + p.n_plus + 5);
        CHECK(e2.term_count() == 1 + p.n_plus + 9);
        for (int l = 0; l < e1.term_count(); ++l) {
            CHECK(e2.terms[static_cast<std::size_t>(l)].k == e1.terms[static_cast<std::size_t>(l)].k);
            CHECK(e2.terms[static_cast<std::size_t>(l)].weight == e1.terms[static_cast<std::size_t>(l)].weight);
        }
    }
    SUBCASE("definitional inverse on entries")
    {
        const int n = terms_baseline(100.0, p);
        const ScalingExpansion e = build_inverse_scaling(n, p, om);
        for (const std::vector<Index> nu : {std::vector<Index>{1, 1, 1}, {2, 3, 1}, {5, 2, 7}}) {
            const double omega = canonical_weight(nu, b);
            const double t = (omega / om) * (omega / om);
            const double wtilde_inv = e.inverse_weight(omega * omega);
            CHECK(wtilde_inv == doctest::Approx(phi(p, n, t) / om).epsilon(1e-12));
        }
    }
    SUBCASE("certified relative accuracy on the covered region")
    {
        const double T = 1e4;
        const int n = terms_baseline(T, p);
        const ScalingExpansion e = build_inverse_scaling(n, p, om);
        for (double t : {1.0, 3.0, 1e2, 1e4}) {
            const double omega_sq = om * om * t;
            const double ratio = std::sqrt(omega_sq) * e.inverse_weight(omega_sq);
            CHECK(ratio >= 1.0 - 0.1);
            CHECK(ratio <= 1.0 + 0.1);
        }
    }
    SUBCASE("separability: term application equals entrywise scaling")
    {
        std::mt19937 rng(21);
        for (int d : {2, 3, 4}) {
            const BackendSet bd = sine_set(d);
            const double omd = omega_min_of(bd);
            const ScalingExpansion e = build_inverse_scaling(4, p, omd);
            HTTensor v = random_tensor(rng, d, 2, 3, 6);
            const HTTensor w = apply_inverse_scaling(e, bd, v);
            const auto dims = box_of(v);
            const DenseBox dv = densify(v, dims), dw = densify(w, dims);
            std::vector<Index> nu(static_cast<std::size_t>(d), 1);
            for (std::size_t flat = 0; flat < dv.data.size(); ++flat) {
                std::size_t rem = flat;
                for (int m = d - 1; m >= 0; --m) {
                    nu[static_cast<std::size_t>(m)] =
                        static_cast<Index>(rem % static_cast<std::size_t>(dims[static_cast<std::size_t>(m)])) + 1;
                    rem /= static_cast<std::size_t>(dims[static_cast<std::size_t>(m)]);
                }
                const double omega = canonical_weight(nu, bd);
                const double expect = e.inverse_weight(omega * omega) * dv.data[flat];
                CHECK(dw.data[flat] == doctest::Approx(expect).epsilon(1e-12).scale(norm(v)));
            }
            // rank count: rank-one input inflates by at most the term count
            HTTensor r1 = from_rank_one(v.tree, [&] {
                std::vector<std::vector<std::pair<Index, double>>> f(static_cast<std::size_t>(d));
                for (int m = 0; m < d; ++m) f[static_cast<std::size_t>(m)] = {{1, 1.0}, {3, 0.5}};
                return f;
            }());
            const HTTensor w1 = apply_inverse_scaling(e, bd, r1);
            CHECK(w1.max_rank() <= e.term_count());
        }
    }
}

TEST_CASE("exponential sum certification sweep")
{
    // the acceptance criterion at reduced grid size, plus the tail surrogate
    for (double delta : {0.5, 0.1, 0.01}) {
        const ExpSumParams p = choose_params(delta);
        const double T = 1e8;
        const int n = terms_baseline(T, p);
        double worst = 0.0, worst_tail = 0.0;
        const int G = 400;
        for (int g = 0; g <= G; ++g) {
            const double t = std::exp(std::log(T) * g / G);
            worst = std::max(worst, std::sqrt(t) * std::abs(1.0 / std::sqrt(t) - phi(p, n, t)));
            worst_tail = std::max(worst_tail, std::sqrt(t) * std::abs(phi(p, n + 50, t) - phi(p, n, t)));
        }
        CHECK(worst <= delta);
        CHECK(worst_tail <= delta / 2.0 + 1e-12);  // n = M(delta/2, T) certifies the tail at delta/2
    }
}

TEST_CASE("operator norm ratios of the diagonal scalings")
{
    const BackendSet b = sine_set(2);
    const double om = omega_min_of(b);
    const ExpSumParams p = choose_params(0.1);
    const double T = 400.0;
    const int n = terms_baseline(T, p);
    const ScalingExpansion e = build_inverse_scaling(n, p, om);
    const ScalingExpansion eref = build_inverse_scaling(n + 50, p, om);
    double max_ratio = 0.0, max_ref_inv = 0.0;
    for (Index a = 1; a <= 14; ++a)
        for (Index bb = 1; bb <= 14; ++bb) {
            const double omega = canonical_weight({a, bb}, b);
            // ||S Stilde_n^{-1}|| <= 1 + delta on the whole universe
            max_ratio = std::max(max_ratio, omega * e.inverse_weight(omega * omega));
            // ||Stilde S^{-1}|| <= (1-delta)^{-1} inside the covered region
            if (omega * omega <= om * om * T)
                max_ref_inv = std::max(max_ref_inv, 1.0 / (omega * eref.inverse_weight(omega * omega)));
        }
    CHECK(max_ratio <= 1.1);
    CHECK(max_ref_inv <= 1.0 / 0.9);
}
