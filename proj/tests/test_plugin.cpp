#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fedstat/plugin.hpp"

using namespace fedstat;

TEST(NormalCriticalValue, KnownQuantiles) {
    EXPECT_NEAR(normal_critical_value(0.05), 1.959963984540054, 1e-12);
    EXPECT_NEAR(normal_critical_value(0.10), 1.6448536269514722, 1e-12);
    EXPECT_THROW(normal_critical_value(0.0), std::invalid_argument);
    EXPECT_THROW(normal_critical_value(1.0), std::invalid_argument);
}

// Online means and sandwich against direct batch recomputation on random paths.
TEST(PluginState, MatchesBatchRecomputation) {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> normal;
    for (int path = 0; path < 100; ++path) {
        const Eigen::Index d = 1 + path % 5;
        const int T = 20 + path;
        PluginState state(d);
        std::vector<Vector> xs, gs;
        std::vector<Matrix> hs;
        for (int m = 0; m < T; ++m) {
            Vector x(d), g(d);
            for (Eigen::Index i = 0; i < d; ++i) {
                x[i] = normal(rng);
                g[i] = normal(rng);
            }
            Vector a(d);
            for (Eigen::Index i = 0; i < d; ++i) a[i] = normal(rng);
            Matrix h = a * a.transpose() + 0.5 * Matrix::Identity(d, d);
            state.observe(x, g, h);
            xs.push_back(x);
            gs.push_back(g);
            hs.push_back(h);
        }
        Vector ybar = Vector::Zero(d);
        Matrix G = Matrix::Zero(d, d), S = Matrix::Zero(d, d);
        for (int m = 0; m < T; ++m) {
            ybar += xs[m];
            G += hs[m];
            S += gs[m] * gs[m].transpose();
        }
        ybar /= T;
        G /= T;
        S /= T;
        const Matrix Ginv = G.inverse();
        const Matrix cov = Ginv * S * Ginv.transpose();
        EXPECT_LT((state.average - ybar).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((state.hessian_mean - G).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((state.gradient_outer_mean - S).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((state.sandwich() - cov).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, cov.norm()));
    }
}

TEST(PluginState, SingularHessianRejected) {
    PluginState state(2);
    Vector g = Vector::Ones(2);
    EXPECT_THROW(state.sandwich(), SingularHessianError);
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = 1.0;
    state.observe(Vector::Zero(2), g, h);
    state.observe(Vector::Zero(2), g, h);
    EXPECT_THROW(state.sandwich(), SingularHessianError);
    EXPECT_THROW(plugin_interval(state, 1.0, 100, 0, 0.05), SingularHessianError);
}

TEST(PluginState, DimensionChecked) {
    PluginState state(2);
    EXPECT_THROW(state.observe_point(Vector::Zero(3)), std::invalid_argument);
    EXPECT_THROW(state.observe_draws(Vector::Zero(2), Matrix::Zero(3, 3)), std::invalid_argument);
}

TEST(PluginInterval, HandComputed) {
    PluginState state(1);
    Vector x(1), g(1);
    Matrix h(1, 1);
    h(0, 0) = 2.0;
    x[0] = 1.0;
    g[0] = 2.0;
    state.observe(x, g, h);
    x[0] = 3.0;
    g[0] = -2.0;
    state.observe(x, g, h);
    // G = 2, S = 4, sandwich = 1; half width = z * sqrt(nu / t) = z * sqrt(1.5 / 150).
    const Interval ci = plugin_interval(state, 1.5, 150, 0, 0.05);
    const double half = 1.959963984540054 * 0.1;
    EXPECT_NEAR(ci.lower, 2.0 - half, 1e-12);
    EXPECT_NEAR(ci.upper, 2.0 + half, 1e-12);
    EXPECT_TRUE(ci.contains(2.0 + half));
    EXPECT_FALSE(ci.contains(2.0 + half + 1e-9));
    EXPECT_THROW(plugin_interval(state, 1.0, 100, 1, 0.05), std::out_of_range);
    EXPECT_THROW(plugin_interval(state, 1.0, 0, 0, 0.05), std::invalid_argument);
}

TEST(PluginObserver, WarmupExclusionSkipsDraws) {
    const auto fed = linear_federation(2, 3, 1.0, true, 5);
    auto s = CommunicationSchedule::constant(2).with_warmup(0.1);
    const RoundPlan plan = plan_rounds(s, 50);
    ASSERT_GT(plan.warmup, 0);
    PluginObserver with(2, static_cast<std::size_t>(plan.warmup), true);
    PluginObserver without(2, static_cast<std::size_t>(plan.warmup), false);
    SyncObserver* obs[] = {&with, &without};
    run_local_sgd(fed, plan, Vector::Zero(2), 3, obs);
    EXPECT_EQ(with.state().draws, 50u);
    EXPECT_EQ(without.state().draws, 50u - static_cast<std::size_t>(plan.warmup));
    EXPECT_EQ(with.state().points, 50u);
    EXPECT_EQ(without.state().points, 50u);
    EXPECT_EQ(with.state().average, without.state().average);
}

// Monte Carlo: on the homogeneous linear model G_hat approaches I.
TEST(PluginObserver, HessianEstimateConsistent) {
    const auto fed = linear_federation(3, 5, 1.0, false, 1);
    const RoundPlan plan = plan_rounds(CommunicationSchedule::constant(1), 4000);
    PluginObserver obs(3);
    SyncObserver* list[] = {&obs};
    run_local_sgd(fed, plan, Vector::Zero(3), 2, list);
    EXPECT_LT((obs.state().hessian_mean - Matrix::Identity(3, 3)).norm(), 0.1);
    EXPECT_LT((obs.state().sandwich() - true_sandwich(fed).covariance).norm(), 0.05);
}
