#include "metrology/error.hpp"
#include "metrology/truescore.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace metrology;

TEST(Simulate, NoErrorTermsReturnsTrueScore) {
    const auto xs = simulate_observations({.true_score = 9.6, .random_sd = 0.0, .systematic_offset = 0.0, .seed = 1}, 50);
    for (double x : xs) EXPECT_EQ(x, 9.6);
}

TEST(Simulate, SystematicOffsetShiftsMean) {
    const auto xs = simulate_observations({.true_score = 120, .random_sd = 5, .systematic_offset = -10, .seed = 7}, 100000);
    EXPECT_NEAR(summarize(xs).mean, 110.0, 0.1);
}

TEST(Simulate, RandomErrorSdRecovered) {
    const auto xs = simulate_observations({.true_score = 9.6, .random_sd = 0.05, .systematic_offset = 0, .seed = 3}, 100000);
    EXPECT_NEAR(summarize(xs).sd, 0.05, 0.002);
}

TEST(Simulate, SeedDeterminism) {
    const ErrorModel m{.true_score = 1, .random_sd = 2, .systematic_offset = 0.5, .seed = 99};
    EXPECT_EQ(simulate_observations(m, 1000), simulate_observations(m, 1000));
    auto other = m;
    other.seed = 100;
    EXPECT_NE(simulate_observations(m, 1000), simulate_observations(other, 1000));
}

TEST(Simulate, ZeroCountRejected) {
    EXPECT_THROW(simulate_observations({}, 0), Error);
}

TEST(Detectability, AnalyticValues) {
    // Normal-CDF oracle values (scipy.stats.norm.cdf).
    const auto sprint = detectability(0.4, 0.05);
    EXPECT_NEAR(sprint.misorder_probability, 7.70862895014001e-09, 1e-15);
    EXPECT_NEAR(sprint.distribution_overlap, 6.334248366623973e-05, 1e-15);
    const auto noisy = detectability(0.1, 0.2);
    EXPECT_NEAR(noisy.misorder_probability, 0.36183680491588155, 1e-12);
    EXPECT_NEAR(noisy.distribution_overlap, 0.8025873486341526, 1e-12);
    EXPECT_EQ(detectability(0.0, 1.0).misorder_probability, 0.5);
    EXPECT_EQ(detectability(0.0, 1.0).distribution_overlap, 1.0);
    EXPECT_THROW(detectability(0.0, 0.0), Error);
}

TEST(Detectability, Monotone) {
    double prev = 0.5;
    for (double e = 0.05; e < 1.0; e += 0.05) {
        const double p = detectability(e, 0.3).misorder_probability;
        EXPECT_LT(p, prev);
        prev = p;
    }
    prev = 0.0;
    for (double sd = 0.05; sd < 2.0; sd += 0.05) {
        const double p = detectability(0.4, sd).misorder_probability;
        EXPECT_GT(p, prev);
        prev = p;
    }
}

TEST(Detectability, MonteCarloAgreesWithinThreeStandardErrors) {
    const std::size_t n = 100000;
    for (auto [effect, sd] : {std::pair{0.4, 0.05}, std::pair{0.1, 0.2}}) {
        const double analytic = detectability(effect, sd).misorder_probability;
        const ErrorModel fast{.true_score = 9.6 - effect, .random_sd = sd, .systematic_offset = 0, .seed = 11};
        const ErrorModel slow{.true_score = 9.6, .random_sd = sd, .systematic_offset = 0, .seed = 12};
        const double empirical = empirical_misorder_rate(fast, slow, n);
        const double se = std::sqrt(analytic * (1.0 - analytic) / static_cast<double>(n));
        EXPECT_LE(std::abs(empirical - analytic), 3.0 * std::max(se, 1.0 / static_cast<double>(n)));
    }
}

TEST(SampleSize, TwoSampleZFormula) {
    // 2 (1.95996 + 0.84162)^2 * 4 = 62.79 -> 63.
    EXPECT_EQ(required_sample_size(0.1, 0.2, 0.05, 0.8), 63u);
    // Doubling sd quadruples the raw requirement: 251.16 -> 252.
    EXPECT_EQ(required_sample_size(0.1, 0.4, 0.05, 0.8), 252u);
    EXPECT_EQ(required_sample_size(0.1, 0.0), 1u);
    EXPECT_EQ(required_sample_size(0.1, 1e-9), 1u);
    EXPECT_THROW(required_sample_size(0.0, 0.2), Error);
    EXPECT_THROW(required_sample_size(0.1, 0.2, 0.05, 0.4), Error);
}

TEST(Histogram, CountsEverySample) {
    const auto xs = simulate_observations({.true_score = 0, .random_sd = 1, .systematic_offset = 0, .seed = 5}, 5000);
    const auto bins = histogram(xs, 40);
    std::size_t total = 0;
    for (const auto& b : bins) total += b.count;
    EXPECT_EQ(total, xs.size());
    EXPECT_EQ(bins.size(), 40u);
}
