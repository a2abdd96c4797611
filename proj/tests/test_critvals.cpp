#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "fedstat/critvals.hpp"

using namespace fedstat;

TEST(EmpiricalQuantile, OrderStatistic) {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    EXPECT_EQ(detail::empirical_quantile(v, 0.5), 5.0);
    EXPECT_EQ(detail::empirical_quantile(v, 0.51), 6.0);
    EXPECT_EQ(detail::empirical_quantile(v, 0.975), 10.0);
    EXPECT_EQ(detail::empirical_quantile(v, 0.01), 1.0);
    EXPECT_EQ(detail::empirical_quantile(v, 0.1), 1.0);
}

TEST(SmoothedQuantile, NormalSample) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    std::vector<double> v(20000);
    for (auto& x : v) x = normal(rng);
    std::sort(v.begin(), v.end());
    EXPECT_NEAR(detail::smoothed_quantile(v, 0.5), 0.0, 0.03);
    EXPECT_NEAR(detail::smoothed_quantile(v, 0.975), 1.959964, 0.06);
}

TEST(SimulateTable, Validation) {
    CritvalOptions o;
    o.steps = 50;
    EXPECT_THROW(simulate_table({0.0}, {0.5}, o), std::invalid_argument);
    o.steps = 100;
    o.replications = 10;
    EXPECT_THROW(simulate_table({0.0}, {0.5}, o), std::invalid_argument);
    o.replications = 1000;
    EXPECT_THROW(simulate_table({1.0}, {0.5}, o), std::invalid_argument);
    EXPECT_THROW(simulate_table({0.0}, {1.0}, o), std::invalid_argument);
    EXPECT_THROW(simulate_table({}, {0.5}, o), std::invalid_argument);
}

TEST(SimulateTable, ThreadCountInvariantAndOrdered) {
    CritvalOptions o;
    o.steps = 200;
    o.replications = 4000;
    o.threads = 1;
    const auto a = simulate_table(default_critval_betas(), default_critval_levels(), o);
    o.threads = 4;
    const auto b = simulate_table(default_critval_betas(), default_critval_levels(), o);
    EXPECT_EQ(a.values, b.values);
    for (const auto& row : a.values) {
        EXPECT_TRUE(std::is_sorted(row.begin(), row.end()));
        EXPECT_NEAR(row[4], 0.0, 0.2);      // median
        EXPECT_NEAR(row[7], -row[1], 0.1 * row[7]);  // symmetry
    }
    // Heavier tails for smaller beta.
    for (std::size_t r = 1; r < a.values.size(); ++r) EXPECT_GT(a.values[r - 1][7], a.values[r][7]);
}

TEST(SimulateTable, SmoothingCloseToOrderStatistics) {
    CritvalOptions o;
    o.steps = 100;
    o.replications = 5000;
    const auto raw = simulate_table({0.5}, {0.5, 0.975}, o);
    o.smoothing = true;
    const auto smooth = simulate_table({0.5}, {0.5, 0.975}, o);
    EXPECT_NEAR(raw.values[0][1], smooth.values[0][1], 0.05 * raw.values[0][1]);
}

TEST(Lookup, ExactMatchOnly) {
    CriticalValueTable t;
    t.betas = {0.0, 1.0 / 3.0};
    t.levels = {0.95, 0.975};
    t.values = {{5.0, 6.7}, {4.8, 6.3}};
    EXPECT_EQ(lookup(t, 0.05, 0.0), 6.7);
    EXPECT_EQ(lookup(t, 0.10, 1.0 / 3.0), 4.8);
    EXPECT_EQ(lookup(t, 0.05, 0.3333333333333333), 6.3);
    EXPECT_THROW(lookup(t, 0.05, 0.3), std::out_of_range);
    EXPECT_THROW(lookup(t, 0.01, 0.0), std::out_of_range);
}

TEST(TableCsv, RoundTrip) {
    CriticalValueTable t;
    t.betas = {0.0, 1.0 / 3.0, 0.5};
    t.levels = {0.025, 0.975};
    t.values = {{-6.75, 6.75}, {-6.3, 6.3}, {-5.851234, 5.851234}};
    t.steps = 1000;
    t.replications = 50000;
    std::stringstream io;
    write_table_csv(io, t);
    const auto back = read_table_csv(io);
    EXPECT_EQ(back.steps, 1000);
    EXPECT_EQ(back.replications, 50000);
    ASSERT_EQ(back.betas.size(), 3u);
    EXPECT_DOUBLE_EQ(back.betas[1], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(back.levels[1], 0.975);
    EXPECT_DOUBLE_EQ(back.values[2][1], 5.851234);
    EXPECT_EQ(lookup(back, 0.05, 1.0 / 3.0), 6.3);
}

TEST(TableCsv, MalformedRejected) {
    std::stringstream empty("");
    EXPECT_THROW(read_table_csv(empty), std::runtime_error);
    std::stringstream bad("beta,0.5\n0,1,2\n");
    EXPECT_THROW(read_table_csv(bad), std::runtime_error);
    std::stringstream header("b,0.5\n0,1\n");
    EXPECT_THROW(read_table_csv(header), std::runtime_error);
}
