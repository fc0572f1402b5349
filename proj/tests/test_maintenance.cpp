#include <gtest/gtest.h>

#include <vector>

#include "ieo/maintenance.hpp"
#include "ieo/random.hpp"

using namespace ieo;

namespace {

const CostParams kCosts = CostParams::turbofan();
const FeasibleSet kFive = FeasibleSet::range(0, 125, 5);

DiscreteRulDist half_half(int a, int b, int horizon = 30) {
    std::vector<double> p(static_cast<std::size_t>(horizon), 0.0);
    p[a - 1] = 0.5;
    p[b - 1] = 0.5;
    return DiscreteRulDist(RulSupport(horizon), p);
}

}  // namespace

TEST(CostParams, Validation) {
    EXPECT_NO_THROW(kCosts.validate());
    EXPECT_THROW((CostParams{50, 40, 1, 5}.validate()), ConfigError);
    EXPECT_THROW((CostParams{50, 200, 5, 1}.validate()), ConfigError);
    EXPECT_THROW((CostParams{-1, 200, 1, 5}.validate()), ConfigError);
}

TEST(FeasibleSet, Validation) {
    EXPECT_THROW(FeasibleSet({}), ConfigError);
    EXPECT_THROW(FeasibleSet({5, 5}), ConfigError);
    EXPECT_THROW(FeasibleSet({10, 5}), ConfigError);
    EXPECT_EQ(kFive.size(), 26u);
    EXPECT_EQ(kFive.back(), 125);
}

TEST(Cost, Branches) {
    EXPECT_EQ(cost(100, 120, kCosts), 70.0);
    EXPECT_EQ(cost(100, 90, kCosts), 250.0);
    EXPECT_EQ(cost(42, 42, kCosts), kCosts.preventive);
}

TEST(Cost, MonotoneInWindow) {
    for (long y : {1L, 17L, 95L}) {
        for (long z = 0; z < 150; ++z) {
            if (z + 1 <= y) {
                EXPECT_GE(cost(z, y, kCosts), cost(z + 1, y, kCosts));
            } else if (z > y) {
                EXPECT_LT(cost(z, y, kCosts), cost(z + 1, y, kCosts));
            }
        }
    }
}

TEST(ExpectedCost, Examples) {
    const auto d = half_half(10, 20);
    EXPECT_DOUBLE_EQ(expected_cost(10, d, kCosts), 55.0);
    EXPECT_DOUBLE_EQ(expected_cost(15, d, kCosts), 140.0);
    EXPECT_DOUBLE_EQ(expected_cost(7, DiscreteRulDist::point_mass(RulSupport(30), 12), kCosts), cost(7, 12, kCosts));
}

TEST(ExpectedCost, PrefixSumsMatchDirectSums) {
    Rng rng(4);
    const RulSupport s(150);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> w(150);
        for (auto& x : w) x = rng.uniform01();
        const auto d = DiscreteRulDist::from_weights(s, w);
        const auto all = expected_costs(d, kCosts, kFive);
        for (std::size_t j = 0; j < kFive.size(); ++j) {
            ASSERT_NEAR(all[j], expected_cost(kFive.windows()[j], d, kCosts), 1e-9);
        }
    }
}

TEST(CsoDecide, Examples) {
    const FeasibleSet z({0, 5, 10, 15, 20});
    const auto d = half_half(10, 20);
    const std::vector<double> expected = {65, 60, 55, 140, 150};
    const auto all = expected_costs(d, kCosts, z);
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(all[i], expected[i], 1e-12);
    EXPECT_EQ(cso_decide(d, kCosts, z), 10);
    EXPECT_EQ(cso_decide(DiscreteRulDist::point_mass(RulSupport(30), 15), kCosts, z), 15);
}

TEST(CsoDecide, ExampleReferenceMatchesEnumeration) {
    const auto d = truncated_poisson(20.0, RulSupport(30));
    const auto c = CostParams::illustration();
    const auto z = FeasibleSet::of_support(RulSupport(30));
    long best = -1;
    double best_cost = 1e300;
    for (long w = 1; w <= 30; ++w) {
        double e = 0;
        for (int h = 1; h <= 30; ++h) e += d.prob(h) * cost(w, h, c);
        if (e < best_cost) {
            best_cost = e;
            best = w;
        }
    }
    EXPECT_EQ(cso_decide(d, c, z), best);
    EXPECT_EQ(best, 11);
}

TEST(CsoDecide, TieGoesToSmallerWindow) {
    const FeasibleSet z({3, 7});
    const CostParams flat{1.0, 2.0, 0.0, 1.0};
    // no per-cycle component cost: both windows cost c_p at y = 10
    EXPECT_EQ(cso_decide(DiscreteRulDist::point_mass(RulSupport(20), 10), flat, z), 3);
}

TEST(CsoDecide, ArgminInvariantUnderCostScaling) {
    Rng rng(8);
    const RulSupport s(150);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> w(150);
        for (auto& x : w) x = rng.uniform01() * rng.uniform01();
        const auto d = DiscreteRulDist::from_weights(s, w);
        const double f = 0.01 + 10.0 * rng.uniform01();
        ASSERT_EQ(cso_decide(d, kCosts, kFive), cso_decide(d, kCosts.scaled(f), kFive));
    }
}

TEST(QuantileDecide, Examples) {
    const FeasibleSet z({0, 5, 10, 15, 20});
    const auto d = half_half(10, 20);
    EXPECT_EQ(quantile_decide(d, {0.01}, z), 10);
    EXPECT_EQ(quantile_decide(d, {0.6}, z), 20);
    const auto w = discretize_weibull({100.0, 3.0}, RulSupport(150));
    EXPECT_EQ(quantile_decide(w, {1.0 - 1e-12}, kFive), kFive.back());
}

TEST(QuantileDecide, InfeasibleWithoutEarlyWindow) {
    EXPECT_THROW(quantile_decide(half_half(1, 2), {0.01}, FeasibleSet({5, 10})), InfeasibleError);
}

TEST(QuantileDecide, ConstraintIsTight) {
    Rng rng(10);
    const RulSupport s(150);
    for (int i = 0; i < 300; ++i) {
        const auto d = discretize_weibull({20.0 + 120.0 * rng.uniform01(), 1.0 + 20.0 * rng.uniform01()}, s);
        const QuantileParams q{0.001 + 0.3 * rng.uniform01()};
        const long z = quantile_decide(d, q, kFive);
        ASSERT_LE(cdf_below(d, z), q.alpha);
        for (long w : kFive.windows()) {
            if (w > z) {
                ASSERT_GT(cdf_below(d, w), q.alpha);
            }
        }
    }
}

TEST(OracleCost, Examples) {
    EXPECT_EQ(oracle_cost(95, kCosts, kFive), 50.0);
    EXPECT_EQ(oracle_cost(3, kCosts, kFive), 53.0);
    EXPECT_EQ(oracle_cost(40, kCosts, kFive), kCosts.preventive);
}

TEST(Regret, Examples) {
    EXPECT_EQ(regret(95, 95, kCosts, kFive), 0.0);
    EXPECT_EQ(regret(90, 95, kCosts, kFive), 5.0);
    EXPECT_EQ(regret(100, 95, kCosts, kFive), 175.0);
}

TEST(Regret, NonNegativeAndZeroOnlyAtOptimum) {
    for (long y = 1; y <= 150; ++y) {
        for (long z : kFive.windows()) {
            const double r = regret(z, y, kCosts, kFive);
            ASSERT_GE(r, 0.0);
            if (r == 0.0) {
                ASSERT_EQ(cost(z, y, kCosts), oracle_cost(y, kCosts, kFive));
            }
        }
    }
}

TEST(MaxCost, TurbofanDefaults) { EXPECT_EQ(max_cost(kCosts, kFive, RulSupport(150)), 820.0); }
