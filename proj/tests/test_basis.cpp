#include <cmath>
#include <random>

#include "doctest.h"
#include "htsolve/basis.hpp"

using namespace hts;

namespace {
constexpr double kPi = 3.14159265358979323846;

// adaptive Simpson quadrature of the Galerkin integrals (oracle)
double simpson(const std::function<double(double)>& f, double a, double b, int n)
{
    double s = f(a) + f(b);
    const double h = (b - a) / n;
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

double quad_entry(int kind, Index nu, Index mu)
{
    auto psi = [](Index n, double x) { return std::sqrt(2.0) * std::sin(kPi * n * x); };
    auto dpsi = [](Index n, double x) { return std::sqrt(2.0) * kPi * n * std::cos(kPi * n * x); };
    const int pts = 64 * static_cast<int>(std::max(nu, mu)) + 64;
    switch (kind) {
        case 1: return simpson([&](double x) { return psi(nu, x) * psi(mu, x); }, 0, 1, pts);
        case 2: return simpson([&](double x) { return dpsi(nu, x) * dpsi(mu, x); }, 0, 1, pts);
        case 3: return simpson([&](double x) { return dpsi(nu, x) * psi(mu, x); }, 0, 1, pts);
        default: return simpson([&](double x) { return psi(nu, x) * dpsi(mu, x); }, 0, 1, pts);
    }
}

}  // namespace

TEST_CASE("sine backend weights and entries")
{
    SineSpectralBackend b(1.0, 10);
    SUBCASE("weights")
    {
        CHECK(b.weight(1) == doctest::Approx(kPi).epsilon(1e-14));
        CHECK(b.weight(3) == doctest::Approx(3.0 * kPi).epsilon(1e-14));
        CHECK(b.entry(2, 3, 3) == doctest::Approx(9.0 * kPi * kPi).epsilon(1e-14));
        for (Index nu = 1; nu < 40; ++nu) CHECK(b.weight(nu + 1) > b.weight(nu));
        CHECK_THROWS_AS(b.weight(0), index_error);
    }
    SUBCASE("mass and stiffness")
    {
        CHECK(b.entry(1, 4, 4) == 1.0);
        CHECK(b.entry(1, 4, 6) == 0.0);
        CHECK(b.entry(2, 2, 2) == doctest::Approx(4.0 * kPi * kPi).epsilon(1e-14));
        CHECK(b.entry(2, 2, 4) == 0.0);
    }
    SUBCASE("first-derivative pairing closed form")
    {
        CHECK(b.entry(3, 1, 2) == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
        CHECK(b.entry(3, 1, 2) == doctest::Approx(quad_entry(3, 1, 2)).epsilon(1e-8));
        // zero for equal parity
        CHECK(b.entry(3, 1, 3) == 0.0);
        CHECK(b.entry(3, 2, 2) == 0.0);
    }
    SUBCASE("adjoint pair and antisymmetry")
    {
        for (Index nu = 1; nu <= 12; ++nu)
            for (Index mu = 1; mu <= 12; ++mu) {
                CHECK(b.entry(4, nu, mu) == b.entry(3, mu, nu));
                CHECK(b.entry(3, nu, mu) == doctest::Approx(-b.entry(3, mu, nu)).epsilon(1e-14));
                CHECK(b.entry(4, nu, mu) == doctest::Approx(-b.entry(3, nu, mu)).epsilon(1e-14));
            }
    }
    SUBCASE("quadrature spot check across kinds and levels")
    {
        std::mt19937 rng(3);
        std::uniform_int_distribution<Index> pick(1, 500);  // levels <= 8
        std::uniform_int_distribution<int> kind(1, 4);
        for (int t = 0; t < 200; ++t) {
            const Index nu = pick(rng), mu = pick(rng);
            const int k = kind(rng);
            const double ref = quad_entry(k, nu, mu);
            CHECK(b.entry(k, nu, mu) == doctest::Approx(ref).epsilon(1e-7).scale(
                                            std::max(1.0, b.weight(nu) * b.weight(mu))));
        }
    }
}

TEST_CASE("banded compressions")
{
    SineSpectralBackend b(1.0, 9);
    SUBCASE("diagonal kinds are exact at every band")
    {
        std::vector<Index> rows;
        std::vector<double> vals;
        for (int j : {0, 3}) {
            b.compressed_column(2, j, 5, rows, vals);
            REQUIRE(rows.size() == 1);
            CHECK(rows[0] == 5);
            CHECK(vals[0] == doctest::Approx(25.0 * kPi * kPi));
            CHECK(b.beta(2, j) == 0.0);
            b.compressed_column(1, j, 7, rows, vals);
            REQUIRE(rows.size() == 1);
            CHECK(vals[0] == 1.0);
        }
    }
    SUBCASE("band zero keeps only same-level blocks")
    {
        std::vector<Index> rows;
        std::vector<double> vals;
        b.compressed_column(3, 0, 5, rows, vals);  // level 2
        for (Index r : rows) CHECK(level_of(r) == 2);
        // all odd-sum partners within the level present
        CHECK(rows.size() == 2);  // {4, 6}
    }
    SUBCASE("level decay holds exactly for the construction")
    {
        std::vector<Index> rows;
        std::vector<double> vals;
        for (int j : {1, 2, 4}) {
            b.compressed_column(3, j, 9, rows, vals);  // level 3
            for (Index r : rows) CHECK(std::abs(level_of(r) - 3) <= j);
        }
    }
    SUBCASE("measured band errors satisfy the certificates and decay")
    {
        const double s = b.s_decay();
        CHECK(s >= 0.5);  // empirical rate for this backend
        double prev = 1e300;
        for (int j = 0; j <= 6; ++j) {
            const double meas = b.measured_band_error(j);
            CHECK(meas <= b.beta(3, j) * std::exp2(-s * j) * (1.0 + 1e-9));
            CHECK(meas <= prev + 1e-12);
            prev = meas;
        }
        // fitted decay rate of the measured errors is at least 1/2
        double num = 0, den = 0;
        const double g0 = b.measured_band_error(0);
        for (int j = 1; j <= 6; ++j) {
            num += j * std::log2(g0 / b.measured_band_error(j));
            den += static_cast<double>(j) * j;
        }
        CHECK(num / den >= 0.5);
    }
    SUBCASE("beta tables are nonincreasing and vanish beyond the window")
    {
        for (int j = 0; j < b.max_level(); ++j) CHECK(b.beta(3, j + 1) <= b.beta(3, j) + 1e-15);
        CHECK(b.beta(3, b.max_level() + 1) == 0.0);
        CHECK(b.beta(1, 4) == 0.0);
    }
    SUBCASE("alpha column budgets")
    {
        std::vector<Index> rows;
        std::vector<double> vals;
        for (int j : {0, 2, 5}) {
            double worst = 0.0;
            for (Index mu : {1, 2, 5, 13, 80, 300}) {
                b.compressed_column(3, j, mu, rows, vals);
                worst = std::max(worst, static_cast<double>(rows.size()));
            }
            CHECK(worst <= b.alpha(3, j) * std::exp2(j) * (1.0 + 1e-12));
        }
    }
    SUBCASE("component norms")
    {
        CHECK(b.component_norm(1) == 1.0);
        CHECK(b.component_norm(2) == doctest::Approx(1.0));
        CHECK(b.component_norm(3) == b.component_norm(4));
        // power iteration measures about one on this window; the 1.1 margin keeps it above
        CHECK(b.component_norm(3) >= 1.0);
        CHECK(b.component_norm(3) <= 1.5);
        // diffusion-rescaled variant scales the norms
        SineSpectralBackend b4(4.0, 8);
        CHECK(b4.component_norm(2) == doctest::Approx(0.25));
        CHECK(b4.weight(2) == doctest::Approx(2.0 * kPi * 2.0).epsilon(1e-14));
    }
}

TEST_CASE("tabulated backend round-trip")
{
    SineSpectralBackend src(1.0, 6);
    const std::string manifest = "test_backend_dump.json";
    write_tabulated(src, 6, manifest);
    TabulatedBackend tab(manifest);
    CHECK(tab.max_index() == src.max_index());
    CHECK(tab.s_decay() == doctest::Approx(src.s_decay()));
    for (Index nu = 1; nu <= 60; nu += 7)
        CHECK(tab.weight(nu) == doctest::Approx(src.weight(nu)).epsilon(1e-14));
    std::mt19937 rng(9);
    std::uniform_int_distribution<Index> pick(1, 127);
    for (int t = 0; t < 300; ++t) {
        const Index nu = pick(rng), mu = pick(rng);
        for (int k = 1; k <= 4; ++k)
            CHECK(tab.entry(k, nu, mu) == doctest::Approx(src.entry(k, nu, mu)).epsilon(1e-14));
    }
    for (int j = 0; j <= 7; ++j) {
        CHECK(tab.beta(3, j) == doctest::Approx(src.beta(3, j)));
        CHECK(tab.alpha(3, j) == doctest::Approx(src.alpha(3, j)));
    }
    std::vector<Index> r1, r2;
    std::vector<double> v1, v2;
    for (Index mu : {3, 9, 40}) {
        src.compressed_column(3, 2, mu, r1, v1);
        tab.compressed_column(3, 2, mu, r2, v2);
        CHECK(r1 == r2);
        REQUIRE(v1.size() == v2.size());
        for (std::size_t i = 0; i < v1.size(); ++i) CHECK(v1[i] == doctest::Approx(v2[i]).epsilon(1e-14));
    }
    std::remove(manifest.c_str());
    std::remove("test_backend_dump.bin");
}
