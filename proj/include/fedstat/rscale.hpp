#pragma once

// Random-scaling inference: studentizes y_bar_T by the path-dependent matrix
//   V_T = (1/(T^2 s_T)) sum_m (m^2/E_m) (y_bar_m - y_bar_T)(y_bar_m - y_bar_T)'
// maintained online through y_bar, A, b, s, q.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "fedstat/critvals.hpp"
#include "fedstat/engine.hpp"
#include "fedstat/plugin.hpp"
#include "fedstat/schedules.hpp"

namespace fedstat {

struct RScaleState {
    Vector average;     // y_bar_m
    Matrix weighted_outer;  // A_m = sum (n^2/E_n) y_bar_n y_bar_n'
    Vector weighted_sum;    // b_m = sum (n^2/E_n) y_bar_n
    double inverse_intervals = 0.0;  // s_m = sum 1/E_n
    double weight_total = 0.0;       // q_m = sum n^2/E_n
    std::size_t rounds = 0;

    explicit RScaleState(Eigen::Index d)
        : average(Vector::Zero(d)), weighted_outer(Matrix::Zero(d, d)), weighted_sum(Vector::Zero(d)) {}

    Eigen::Index dimension() const { return average.size(); }

    void observe(const Vector& x_bar, int interval) {
        if (interval < 1) throw std::invalid_argument("rscale: interval must be >= 1");
        if (x_bar.size() != dimension()) throw std::invalid_argument("rscale: dimension mismatch");
        ++rounds;
        const double m = static_cast<double>(rounds);
        average += (x_bar - average) / m;
        const double w = m * m / interval;
        weighted_outer.noalias() += w * average * average.transpose();
        weighted_sum.noalias() += w * average;
        inverse_intervals += 1.0 / interval;
        weight_total += w;
    }

    /// V_hat_m, symmetrized.
    Matrix covariance() const {
        if (rounds == 0) throw std::logic_error("rscale: no rounds observed");
        const double m = static_cast<double>(rounds);
        Matrix v = weighted_outer - average * weighted_sum.transpose() - weighted_sum * average.transpose() +
                   weight_total * average * average.transpose();
        v /= m * m * inverse_intervals;
        return 0.5 * (v + v.transpose());
    }

    /// Diagonal entry of V_hat; rounding noise below zero reads as zero.
    double variance(Eigen::Index j) const { return std::max(0.0, covariance()(j, j)); }
};

/// Growth exponent selecting g_beta: power families use their beta, bounded and logarithmic ones 0.
inline double beta_for_schedule(const CommunicationSchedule& s) {
    return s.family == IntervalFamily::Power ? s.beta : 0.0;
}

/// y_bar_j +/- q_{alpha/2, beta} sqrt(V_jj).
inline Interval rscale_interval(const RScaleState& state, Eigen::Index coordinate, double alpha, double beta,
                                const CriticalValueTable& table) {
    if (coordinate < 0 || coordinate >= state.dimension()) throw std::out_of_range("rscale: coordinate out of range");
    const double q = lookup(table, alpha, beta);
    const double half = q * std::sqrt(state.variance(coordinate));
    const double center = state.average[coordinate];
    return {center - half, center + half};
}

class RScaleObserver : public SyncObserver {
public:
    explicit RScaleObserver(Eigen::Index d) : state_(d) {}

    void on_sync(const SyncEvent& event) override { state_.observe(event.average, event.interval); }

    const RScaleState& state() const { return state_; }

private:
    RScaleState state_;
};

} // namespace fedstat
