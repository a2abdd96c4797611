#pragma once

// Plug-in inference: running means of aggregated stochastic Hessians and
// gradient outer products at the synchronized points, combined into the
// sandwich G^-1 S G^-T and normal-quantile intervals scaled by nu_hat / t_T.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "fedstat/engine.hpp"
#include "fedstat/models.hpp"

namespace fedstat {

class SingularHessianError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    double width() const { return upper - lower; }
    bool contains(double v) const { return lower <= v && v <= upper; }
};

/// (1 - alpha/2) quantile of N(0, 1).
inline double normal_critical_value(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("normal_critical_value: alpha must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
}

struct PluginState {
    Matrix hessian_mean;        // G_hat
    Matrix gradient_outer_mean; // S_hat
    Vector average;             // y_bar
    std::size_t draws = 0;      // rounds contributing to G_hat, S_hat
    std::size_t points = 0;     // rounds contributing to y_bar

    explicit PluginState(Eigen::Index d)
        : hessian_mean(Matrix::Zero(d, d)), gradient_outer_mean(Matrix::Zero(d, d)), average(Vector::Zero(d)) {}

    Eigen::Index dimension() const { return average.size(); }

    void observe_point(const Vector& x_bar) {
        if (x_bar.size() != dimension()) throw std::invalid_argument("plugin: dimension mismatch");
        ++points;
        average += (x_bar - average) / static_cast<double>(points);
    }

    void observe_draws(const Vector& grad, const Matrix& hess) {
        if (grad.size() != dimension() || hess.rows() != dimension() || hess.cols() != dimension())
            throw std::invalid_argument("plugin: dimension mismatch");
        ++draws;
        const double w = 1.0 / static_cast<double>(draws);
        hessian_mean += w * (hess - hessian_mean);
        gradient_outer_mean += w * (grad * grad.transpose() - gradient_outer_mean);
    }

    void observe(const Vector& x_bar, const Vector& grad, const Matrix& hess) {
        observe_point(x_bar);
        observe_draws(grad, hess);
    }

    /**
     * G_hat^-1 S_hat G_hat^-T, symmetrized. Throws SingularHessianError when
     * fewer than d rounds were seen or G_hat's condition number exceeds 1e12.
     */
    Matrix sandwich() const {
        const Eigen::Index d = dimension();
        if (draws < static_cast<std::size_t>(d))
            throw SingularHessianError("plugin: fewer rounds than dimensions; increase T");
        const Matrix sym = 0.5 * (hessian_mean + hessian_mean.transpose());
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || hi / lo > 1e12)
            throw SingularHessianError("plugin: Hessian estimate is numerically singular; increase T");
        const Eigen::LDLT<Matrix> ldlt(sym);
        const Matrix left = ldlt.solve(gradient_outer_mean);            // G^-1 S
        const Matrix out = ldlt.solve(left.transpose()).transpose();    // (G^-1 (G^-1 S)^T)^T
        return 0.5 * (out + out.transpose());
    }
};

/// y_bar_j +/- z_{alpha/2} sqrt(nu_hat / t_T) sigma_j.
inline Interval plugin_interval(const PluginState& state, double nu_hat, std::int64_t total_iterations,
                                Eigen::Index coordinate, double alpha) {
    if (coordinate < 0 || coordinate >= state.dimension()) throw std::out_of_range("plugin: coordinate out of range");
    if (total_iterations < 1) throw std::invalid_argument("plugin: t_T must be positive");
    const double variance = std::max(0.0, state.sandwich()(coordinate, coordinate));
    const double half = normal_critical_value(alpha) * std::sqrt(nu_hat / static_cast<double>(total_iterations)) *
                        std::sqrt(variance);
    const double center = state.average[coordinate];
    return {center - half, center + half};
}

/**
 * Feeds PluginState from the engine. Warm-up rounds always enter y_bar; they
 * enter G_hat and S_hat unless `include_warmup` is false.
 */
class PluginObserver : public SyncObserver {
public:
    PluginObserver(Eigen::Index d, std::size_t warmup_rounds = 0, bool include_warmup = true)
        : state_(d), grad_(d), hess_(d, d), warmup_(warmup_rounds), include_warmup_(include_warmup) {}

    void on_sync(const SyncEvent& event) override {
        state_.observe_point(event.average);
        if (!include_warmup_ && event.round <= warmup_) return;
        event.sampler.draw(event.round, event.average, grad_, hess_);
        state_.observe_draws(grad_, hess_);
    }

    const PluginState& state() const { return state_; }

private:
    PluginState state_;
    Vector grad_;
    Matrix hess_;
    std::size_t warmup_;
    bool include_warmup_;
};

} // namespace fedstat
