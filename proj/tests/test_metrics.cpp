// Oracle checks for the welfare and involution metrics. Expected values are
// hand-computed from the defining formulas and frozen here; the Gini also
// gets a brute-force pairwise cross-check.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ridersim/metrics.hpp"
#include "ridersim/rng.hpp"

using namespace ridersim;

namespace {

// O(n^2) mean-absolute-difference definition, independent of the production
// sorted-form implementation.
double gini_pairwise(const std::vector<double>& v) {
    double num = 0.0, sum = 0.0;
    for (const double a : v) {
        sum += a;
        for (const double b : v) num += std::abs(a - b);
    }
    return num / (2.0 * static_cast<double>(v.size()) * sum);
}

}  // namespace

TEST_CASE("crra closed-form values") {
    // (4^{0.5} - 1) / 0.5
    CHECK(crra(4.0, 0.5) == doctest::Approx(2.0).epsilon(1e-12));
    // log branch at eta = 1
    CHECK(crra(std::exp(1.0), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    // floor applies only at eta >= 1: crra(0, 2) = (eps^{-1} - 1) / (-1)
    CHECK(crra(0.0, 2.0) == doctest::Approx(-(1e6 - 1.0)).epsilon(1e-9));
    // below 1 the function is finite at zero without the floor
    CHECK(crra(0.0, 0.5) == doctest::Approx(-2.0).epsilon(1e-12));
    // continuity across the log branch
    CHECK(crra(2.0, 1.0 - 1e-9) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(crra(2.0, 1.0 + 1e-9) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK_THROWS_AS(crra(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(crra(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("rider utility is concave reward minus linear cost") {
    const UtilityParams p{0.5, 1e-6};
    CHECK(rider_utility(0.0, 0.0, p) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(rider_utility(4.0, 1.5, p) == doctest::Approx(0.5).epsilon(1e-12));
    // Concavity: doubling reward less than doubles the reward term.
    const double u1 = rider_utility(10.0, 0.0, p) - rider_utility(0.0, 0.0, p);
    const double u2 = rider_utility(20.0, 0.0, p) - rider_utility(10.0, 0.0, p);
    CHECK(u2 < u1);
}

TEST_CASE("gini oracle values and edge cases") {
    CHECK_THROWS_AS(gini(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(gini(std::vector<double>{1.0, -0.1}), std::invalid_argument);
    CHECK(gini(std::vector<double>{0.0, 0.0}) == doctest::Approx(0.0));
    CHECK(gini(std::vector<double>{5.0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gini(std::vector<double>{3.0, 3.0, 3.0}) == doctest::Approx(0.0).epsilon(1e-12));
    // One rider holds everything: G = (n-1)/n.
    CHECK(gini(std::vector<double>{0.0, 0.0, 0.0, 10.0}) ==
          doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("gini matches the pairwise definition on random data") {
    RandomStream rng(5150);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v;
        const int n = 2 + static_cast<int>(rng.next_int(0, 30));
        for (int i = 0; i < n; ++i) v.push_back(rng.next_double() * 100.0);
        CHECK(gini(v) == doctest::Approx(gini_pairwise(v)).epsilon(1e-9));
    }
}

TEST_CASE("welfare combines bias-corrected equality with total output") {
    const WelfareSnapshot w = welfare(std::vector<double>{3.0, 1.0});
    // gini = 0.25, eq = 1 - 0.25 * 2 / 1 = 0.5, prod = 4.
    CHECK(w.eq == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.prod == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(w.swf == doctest::Approx(2.0).epsilon(1e-12));

    // Max concentration drives equality to exactly zero.
    const WelfareSnapshot z = welfare(std::vector<double>{0.0, 0.0, 0.0, 10.0});
    CHECK(z.eq == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(z.swf == doctest::Approx(0.0).epsilon(1e-12));

    // Perfect equality keeps the full product.
    const WelfareSnapshot e = welfare(std::vector<double>{2.0, 2.0, 2.0});
    CHECK(e.eq == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.swf == doctest::Approx(6.0).epsilon(1e-12));

    CHECK_THROWS_AS(welfare(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("equality term stays within [0, 1] on random incomes") {
    RandomStream rng(808);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v;
        const int n = 2 + static_cast<int>(rng.next_int(0, 50));
        for (int i = 0; i < n; ++i) {
            v.push_back(rng.next_double() < 0.3 ? 0.0 : rng.next_double() * 10.0);
        }
        bool all_zero = true;
        for (const double x : v) all_zero &= x == 0.0;
        if (all_zero) v[0] = 1.0;
        const WelfareSnapshot w = welfare(v);
        CHECK(w.eq >= -1e-12);
        CHECK(w.eq <= 1.0 + 1e-12);
    }
}

TEST_CASE("involution index and classification bands") {
    const std::vector<double> utilities{1.0, 3.0};  // mean 2
    CHECK(involution_index(100.0, utilities) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK_THROWS_AS(involution_index(1.0, std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(involution_index(1.0, std::vector<double>{-1.0, 1.0}),
                    std::invalid_argument);

    CHECK(classify_involution(-5.0) == InvolutionLevel::Low);
    CHECK(classify_involution(30.0) == InvolutionLevel::Low);
    CHECK(classify_involution(30.000001) == InvolutionLevel::Moderate);
    CHECK(classify_involution(60.0) == InvolutionLevel::Moderate);
    CHECK(classify_involution(60.000001) == InvolutionLevel::High);
}

TEST_CASE("benchmark comparison oracle triple") {
    const std::vector<double> ref{1.0, 2.0, 3.0};
    const std::vector<double> cand{1.0, 2.0, 4.0};
    const SeriesComparison c = benchmark_compare(ref, cand);
    CHECK(c.mae == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(c.rmse == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
    REQUIRE(c.pearson.has_value());
    // r = 3 / sqrt(2 * 14/3) = sqrt(27/28)
    CHECK(*c.pearson == doctest::Approx(std::sqrt(27.0 / 28.0)).epsilon(1e-12));
}

TEST_CASE("benchmark comparison edge cases") {
    CHECK_THROWS_AS(benchmark_compare(std::vector<double>{1.0},
                                      std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        benchmark_compare(std::vector<double>{}, std::vector<double>{}),
        std::invalid_argument);

    // Constant side: correlation undefined but the error metrics stand.
    const SeriesComparison c = benchmark_compare(std::vector<double>{2.0, 2.0, 2.0},
                                                 std::vector<double>{1.0, 2.0, 3.0});
    CHECK_FALSE(c.pearson.has_value());
    CHECK(c.mae == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    const SeriesComparison ident = benchmark_compare(std::vector<double>{1.0, 2.0},
                                                     std::vector<double>{1.0, 2.0});
    CHECK(ident.mae == doctest::Approx(0.0));
    CHECK(ident.rmse == doctest::Approx(0.0));
    REQUIRE(ident.pearson.has_value());
    CHECK(*ident.pearson == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("crra is strictly increasing and concave on a grid") {
    for (const double eta : {0.15, 0.5, 1.0, 2.0}) {
        double prev = crra(0.5, eta);
        double prev_gap = -1.0;
        for (int i = 1; i <= 60; ++i) {
            const double z = 0.5 + 0.25 * i;
            const double cur = crra(z, eta);
            CHECK(cur > prev);
            const double gap = cur - prev;
            if (prev_gap > 0.0) CHECK(gap < prev_gap);  // shrinking increments
            prev = cur;
            prev_gap = gap;
        }
        CHECK(crra(1.0, eta) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("gini is invariant to scaling and permutation") {
    RandomStream rng(616);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v;
        const int n = 2 + static_cast<int>(rng.next_int(0, 20));
        for (int i = 0; i < n; ++i) v.push_back(rng.next_double() * 50.0 + 0.1);
        const double base = gini(v);
        std::vector<double> scaled = v;
        const double c = 0.25 + rng.next_double() * 8.0;
        for (double& x : scaled) x *= c;
        CHECK(gini(scaled) == doctest::Approx(base).epsilon(1e-12));
        std::vector<double> shuffled = v;
        for (int i = n - 1; i > 0; --i) {
            const auto j = rng.next_int(0, i);
            std::swap(shuffled[static_cast<std::size_t>(i)],
                      shuffled[static_cast<std::size_t>(j)]);
        }
        CHECK(gini(shuffled) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("mae never exceeds rmse") {
    RandomStream rng(271828);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a, b;
        const int n = 2 + static_cast<int>(rng.next_int(0, 20));
        for (int i = 0; i < n; ++i) {
            a.push_back(rng.normal(0.0, 3.0));
            b.push_back(rng.normal(0.0, 3.0));
        }
        const SeriesComparison c = benchmark_compare(a, b);
        CHECK(c.mae <= c.rmse + 1e-12);
    }
}

TEST_CASE("classification is monotone in welfare for fixed utilities") {
    const std::vector<double> utilities{1.0, 3.0};  // mean 2
    InvolutionLevel prev = InvolutionLevel::Low;
    for (double swf = 0.0; swf <= 200.0; swf += 5.0) {
        const InvolutionLevel cur =
            classify_involution(involution_index(swf, utilities));
        CHECK(static_cast<int>(cur) >= static_cast<int>(prev));
        prev = cur;
    }
    CHECK(prev == InvolutionLevel::High);  // 200/2 = 100 > 60
}
