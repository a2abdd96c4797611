#pragma once

// Local SGD: K clients run E_m local steps with step size eta_m from a common
// starting point, then the server replaces every client state by the
// p_k-weighted average. Only the synchronized averages leave the engine.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedstat/models.hpp"
#include "fedstat/random.hpp"
#include "fedstat/schedules.hpp"

namespace fedstat {

struct SyncPath {
    std::vector<Vector> points;              // x_bar at t_1..t_T
    std::vector<std::int64_t> comm_times;    // t_1 < ... < t_T
    std::int64_t total_iterations = 0;       // t_T
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t round, double norm)
        : std::runtime_error("local SGD diverged at round " + std::to_string(round) +
                             " (|x_bar| = " + std::to_string(norm) + ")"),
          round_(round) {}
    std::size_t round() const noexcept { return round_; }

private:
    std::size_t round_;
};

/**
 * Draws the p_k-weighted stochastic gradient and Hessian at a synchronized
 * point, one fresh sample per client. Uses its own random streams, so calling
 * it never perturbs the optimization path.
 */
class AggregateSampler {
public:
    AggregateSampler(const Federation& fed, std::uint64_t seed) : fed_(fed), seed_(seed) {
        sample_.covariates.resize(fed.dimension());
        grad_.resize(fed.dimension());
        hess_.resize(fed.dimension(), fed.dimension());
    }

    void draw(std::size_t round, const Vector& x, Vector& grad, Matrix& hess) const {
        const Eigen::Index d = fed_.dimension();
        grad.setZero(d);
        hess.setZero(d, d);
        for (std::size_t k = 0; k < fed_.size(); ++k) {
            auto rng = keyed_stream(seed_, StreamTag::Inference, k, round);
            draw_sample(fed_.clients[k], rng, sample_);
            gradient_at(fed_.clients[k], x, sample_, grad_);
            hessian_at(fed_.clients[k], x, sample_, hess_);
            grad.noalias() += fed_.weights[k] * grad_;
            hess.noalias() += fed_.weights[k] * hess_;
        }
    }

private:
    const Federation& fed_;
    std::uint64_t seed_;
    mutable Sample sample_;
    mutable Vector grad_;
    mutable Matrix hess_;
};

struct SyncEvent {
    std::size_t round;          // m, 1-based
    int interval;               // E_m
    std::int64_t comm_time;     // t_m
    const Vector& average;      // x_bar_{t_m}
    const AggregateSampler& sampler;
};

/// Online consumer of synchronized iterates.
class SyncObserver {
public:
    virtual ~SyncObserver() = default;
    virtual void on_sync(const SyncEvent& event) = 0;
};

struct EngineOptions {
    double divergence_bound = 1e8;
    bool record_path = true;
};

/**
 * Runs Local SGD for every round of `plan`.
 *
 * Within round m each client keeps the sum of its local gradients G_k, so its
 * state is x_start - eta_m G_k and the synchronized point is
 * x_start - eta_m sum_k p_k G_k. With E_m = 1 this is exactly one SGD step on
 * the aggregated gradient. The sample for client k at global iteration t comes
 * from the stream keyed (seed, k, t).
 */
inline SyncPath run_local_sgd(const Federation& fed, const RoundPlan& plan, const Vector& x0, std::uint64_t seed,
                              std::span<SyncObserver* const> observers = {}, const EngineOptions& options = {}) {
    if (plan.rounds() == 0) throw std::invalid_argument("engine: plan has no rounds");
    if (plan.step_sizes.size() != plan.rounds()) throw std::invalid_argument("engine: malformed plan");
    if (x0.size() != fed.dimension()) throw std::invalid_argument("engine: x0 has wrong dimension");
    if (!x0.allFinite()) throw std::invalid_argument("engine: x0 is not finite");

    const Eigen::Index d = fed.dimension();
    const std::size_t K = fed.size();
    const AggregateSampler sampler(fed, seed);

    SyncPath path;
    if (options.record_path) {
        path.points.reserve(plan.rounds());
        path.comm_times.reserve(plan.rounds());
    }

    Vector average = x0;
    Vector local(d), grad(d), aggregate(d);
    std::vector<Vector> grad_sums(K, Vector::Zero(d));
    Sample sample;
    sample.covariates.resize(d);
    std::int64_t t = 0;

    for (std::size_t m = 1; m <= plan.rounds(); ++m) {
        const int steps = plan.intervals[m - 1];
        const double eta = plan.step_sizes[m - 1];
        for (std::size_t k = 0; k < K; ++k) {
            const ClientModel& client = fed.clients[k];
            Vector& sum = grad_sums[k];
            sum.setZero();
            local = average;
            for (int s = 0; s < steps; ++s) {
                auto rng = keyed_stream(seed, StreamTag::Data, k, static_cast<std::uint64_t>(t + s));
                draw_sample(client, rng, sample);
                gradient_at(client, local, sample, grad);
                sum += grad;
                local.noalias() = average - eta * sum;
            }
        }
        aggregate.setZero();
        for (std::size_t k = 0; k < K; ++k) aggregate.noalias() += fed.weights[k] * grad_sums[k];
        average.noalias() -= eta * aggregate;
        t += steps;

        const double norm = average.norm();
        if (!std::isfinite(norm) || norm > options.divergence_bound) throw DivergenceError(m, norm);

        if (options.record_path) {
            path.points.push_back(average);
            path.comm_times.push_back(t);
        }
        const SyncEvent event{m, steps, t, average, sampler};
        for (SyncObserver* obs : observers) obs->on_sync(event);
    }
    path.total_iterations = t;
    return path;
}

/// Arithmetic mean of the synchronized points.
inline Vector average_estimate(const SyncPath& path) {
    if (path.points.empty()) throw std::invalid_argument("average_estimate: empty path");
    Vector sum = Vector::Zero(path.points.front().size());
    for (const auto& p : path.points) sum += p;
    return sum / static_cast<double>(path.points.size());
}

/// CSV dump: round, t_m, x_1..x_d.
inline void write_path_csv(std::ostream& out, const SyncPath& path) {
    out << "round,t_m";
    const Eigen::Index d = path.points.empty() ? 0 : path.points.front().size();
    for (Eigen::Index i = 1; i <= d; ++i) out << ",x" << i;
    out << '\n';
    char buf[40];
    for (std::size_t m = 0; m < path.points.size(); ++m) {
        out << (m + 1) << ',' << path.comm_times[m];
        for (Eigen::Index i = 0; i < d; ++i) {
            std::snprintf(buf, sizeof buf, ",%.17g", path.points[m][i]);
            out << buf;
        }
        out << '\n';
    }
}

} // namespace fedstat
