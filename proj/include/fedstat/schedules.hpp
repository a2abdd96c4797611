#pragma once

// Communication-interval and step-size schedules for Local SGD.
//
// Rounds are 1-based: round m runs E_m local steps with constant step size
// eta_m = gamma_m / E_m, where gamma_m = gamma0 * m^(-alpha) is the effective
// step size. A warm-up prefix of E_m = 1 rounds precedes the interval family,
// whose index restarts at 1 after the warm-up.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedstat {

enum class IntervalFamily { Constant, Log, Power, Explicit };

struct CommunicationSchedule {
    IntervalFamily family = IntervalFamily::Constant;
    double scale = 1.0;            // E
    double beta = 0.0;             // growth exponent for Log / Power
    double gamma0 = 0.5;           // base effective step size
    double alpha = 0.505;          // decay exponent of gamma_m
    double warmup_fraction = 0.0;  // share of observations spent at E_m = 1
    std::vector<int> explicit_intervals;  // Explicit family only, used verbatim
    std::string label;

    static CommunicationSchedule constant(int interval) {
        CommunicationSchedule s;
        s.family = IntervalFamily::Constant;
        s.scale = interval;
        return s;
    }
    static CommunicationSchedule logarithmic(double scale, double beta) {
        CommunicationSchedule s;
        s.family = IntervalFamily::Log;
        s.scale = scale;
        s.beta = beta;
        return s;
    }
    static CommunicationSchedule power(double scale, double beta) {
        CommunicationSchedule s;
        s.family = IntervalFamily::Power;
        s.scale = scale;
        s.beta = beta;
        return s;
    }
    static CommunicationSchedule from_list(std::vector<int> intervals) {
        CommunicationSchedule s;
        s.family = IntervalFamily::Explicit;
        s.explicit_intervals = std::move(intervals);
        return s;
    }

    CommunicationSchedule& with_steps(double g0, double a) {
        gamma0 = g0;
        alpha = a;
        return *this;
    }
    CommunicationSchedule& with_warmup(double fraction) {
        warmup_fraction = fraction;
        return *this;
    }

    std::string name() const {
        if (!label.empty()) return label;
        auto num = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%g", v);
            return std::string(buf);
        };
        switch (family) {
        case IntervalFamily::Constant: return "C" + num(scale);
        case IntervalFamily::Log: return "Log(" + num(scale) + "," + num(beta) + ")";
        case IntervalFamily::Power: return "Power(" + num(scale) + "," + num(beta) + ")";
        case IntervalFamily::Explicit: return "Explicit";
        }
        return "?";
    }

    /// Throws std::invalid_argument when a parameter leaves its domain.
    void validate() const {
        if (!(gamma0 > 0.0) || !std::isfinite(gamma0))
            throw std::invalid_argument("schedule: gamma0 must be positive");
        if (!(alpha > 0.5 && alpha < 1.0))
            throw std::invalid_argument("schedule: alpha must lie in (0.5, 1)");
        if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
            throw std::invalid_argument("schedule: warmup fraction must lie in [0, 1)");
        switch (family) {
        case IntervalFamily::Constant:
            if (!(scale >= 1.0)) throw std::invalid_argument("schedule: constant interval must be >= 1");
            break;
        case IntervalFamily::Log:
            if (!(scale > 0.0) || !(beta > 0.0))
                throw std::invalid_argument("schedule: Log family needs E > 0 and beta > 0");
            break;
        case IntervalFamily::Power:
            if (!(scale > 0.0)) throw std::invalid_argument("schedule: Power family needs E > 0");
            if (!(beta > 0.0 && beta < 1.0))
                throw std::invalid_argument(
                    "schedule: Power family needs beta in (0, 1); sum of 1/E_m must diverge");
            break;
        case IntervalFamily::Explicit:
            if (explicit_intervals.empty())
                throw std::invalid_argument("schedule: explicit interval list is empty");
            for (int e : explicit_intervals)
                if (e < 1) throw std::invalid_argument("schedule: explicit intervals must be >= 1");
            break;
        }
    }
};

namespace detail {

// Slack absorbs pow() results like 27^(1/3) = 3.0000000000000004.
inline int ceil_interval(double value) {
    return std::max(1, static_cast<int>(std::ceil(value - 1e-9)));
}

} // namespace detail

/// E'_n of the interval family, n >= 1 counted from the end of the warm-up.
inline int family_interval(const CommunicationSchedule& s, std::int64_t n) {
    const double idx = static_cast<double>(n);
    switch (s.family) {
    case IntervalFamily::Constant: return detail::ceil_interval(s.scale);
    case IntervalFamily::Log: return detail::ceil_interval(s.scale * std::pow(std::log2(idx + 1.0), s.beta));
    case IntervalFamily::Power: return detail::ceil_interval(s.scale * std::pow(idx, s.beta));
    case IntervalFamily::Explicit:
        if (n < 1 || n > static_cast<std::int64_t>(s.explicit_intervals.size()))
            throw std::out_of_range("schedule: round beyond explicit interval list");
        return s.explicit_intervals[static_cast<std::size_t>(n - 1)];
    }
    return 1;
}

/**
 * Number of warm-up rounds for a run of `total_rounds` rounds: the smallest w
 * with w >= warmup_fraction * t_T(w), where t_T(w) = w + sum_{n<=T-w} E'_n.
 * t_T(w) is non-increasing in w, so the predicate is monotone.
 */
inline std::int64_t warmup_rounds(const CommunicationSchedule& s, std::int64_t total_rounds) {
    if (s.family == IntervalFamily::Explicit || s.warmup_fraction <= 0.0) return 0;
    std::vector<std::int64_t> prefix(static_cast<std::size_t>(total_rounds) + 1, 0);
    for (std::int64_t n = 1; n <= total_rounds; ++n)
        prefix[n] = prefix[n - 1] + family_interval(s, n);
    auto satisfied = [&](std::int64_t w) {
        const double obs = static_cast<double>(w + prefix[total_rounds - w]);
        return static_cast<double>(w) >= s.warmup_fraction * obs;
    };
    std::int64_t lo = 0, hi = total_rounds;
    while (lo < hi) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (satisfied(mid)) hi = mid;
        else lo = mid + 1;
    }
    return lo;
}

/// E_m for round m of a run with `total_rounds` rounds.
inline int interval_at(const CommunicationSchedule& s, std::int64_t m, std::int64_t total_rounds) {
    s.validate();
    if (m < 1 || total_rounds < 1) throw std::invalid_argument("interval_at: m and total_rounds must be >= 1");
    const std::int64_t w = warmup_rounds(s, total_rounds);
    if (m <= w) return 1;
    return family_interval(s, m - w);
}

struct StepSizes {
    double effective;  // gamma_m
    double local;      // eta_m
};

inline StepSizes step_sizes(const CommunicationSchedule& s, std::int64_t m, int interval) {
    if (m < 1) throw std::invalid_argument("step_sizes: m must be >= 1");
    if (interval < 1) throw std::invalid_argument("step_sizes: interval must be >= 1");
    const double gamma = s.gamma0 * std::pow(static_cast<double>(m), -s.alpha);
    return {gamma, gamma / interval};
}

/// Concrete per-round intervals and local step sizes for one run.
struct RoundPlan {
    std::vector<int> intervals;        // E_1..E_T
    std::vector<double> step_sizes;    // eta_1..eta_T
    std::int64_t warmup = 0;

    std::size_t rounds() const { return intervals.size(); }
    std::int64_t total_iterations() const {
        return std::accumulate(intervals.begin(), intervals.end(), std::int64_t{0});
    }
};

/// Plan for exactly `total_rounds` rounds.
inline RoundPlan plan_rounds(const CommunicationSchedule& s, std::int64_t total_rounds) {
    s.validate();
    if (total_rounds < 1) throw std::invalid_argument("plan_rounds: need at least one round");
    RoundPlan plan;
    plan.warmup = warmup_rounds(s, total_rounds);
    plan.intervals.reserve(static_cast<std::size_t>(total_rounds));
    plan.step_sizes.reserve(static_cast<std::size_t>(total_rounds));
    for (std::int64_t m = 1; m <= total_rounds; ++m) {
        const int e = m <= plan.warmup ? 1 : family_interval(s, m - plan.warmup);
        plan.intervals.push_back(e);
        plan.step_sizes.push_back(step_sizes(s, m, e).local);
    }
    return plan;
}

/**
 * Plan that runs until the cumulative number of observations per client
 * first reaches `target_observations`. The warm-up covers
 * ceil(warmup_fraction * target) single-step rounds; the final round may
 * overshoot the target, so callers should report plan.total_iterations().
 */
inline RoundPlan plan_for_observations(const CommunicationSchedule& s, std::int64_t target_observations) {
    s.validate();
    if (target_observations < 1) throw std::invalid_argument("plan_for_observations: target must be >= 1");
    RoundPlan plan;
    if (s.family != IntervalFamily::Explicit) {
        plan.warmup = std::min<std::int64_t>(
            target_observations,
            static_cast<std::int64_t>(std::ceil(s.warmup_fraction * static_cast<double>(target_observations) - 1e-9)));
    }
    std::int64_t observed = 0;
    std::int64_t m = 0;
    while (observed < target_observations) {
        ++m;
        const int e = m <= plan.warmup ? 1 : family_interval(s, m - plan.warmup);
        plan.intervals.push_back(e);
        plan.step_sizes.push_back(step_sizes(s, m, e).local);
        observed += e;
    }
    return plan;
}

/// Plan with caller-chosen intervals and local step sizes (tests, ablations).
inline RoundPlan fixed_plan(std::vector<int> intervals, std::vector<double> local_steps) {
    if (intervals.size() != local_steps.size() || intervals.empty())
        throw std::invalid_argument("fixed_plan: intervals and step sizes must be nonempty and equal length");
    for (int e : intervals)
        if (e < 1) throw std::invalid_argument("fixed_plan: intervals must be >= 1");
    RoundPlan plan;
    plan.intervals = std::move(intervals);
    plan.step_sizes = std::move(local_steps);
    return plan;
}

struct DecayTrend {
    std::vector<std::int64_t> rounds;
    std::vector<double> averaged_steps;   // sqrt(t_T)/T * sum_{m=0}^{T} gamma_m
    std::vector<double> last_step;        // sqrt(t_T) / (T sqrt(gamma_T))
};

struct ScheduleDiagnostics {
    std::int64_t total_iterations = 0;  // t_T
    double nu_hat = 1.0;
    std::optional<double> nu_limit;
    double acf = 1.0;
    DecayTrend trend;
};

/// (1/T^2) (sum E_m)(sum 1/E_m).
inline double nu_hat(std::span<const int> intervals) {
    if (intervals.empty()) throw std::invalid_argument("nu_hat: empty interval sequence");
    double sum = 0.0, inv = 0.0;
    for (int e : intervals) {
        sum += e;
        inv += 1.0 / e;
    }
    const double t = static_cast<double>(intervals.size());
    return sum * inv / (t * t);
}

inline std::optional<double> nu_limit(const CommunicationSchedule& s) {
    switch (s.family) {
    case IntervalFamily::Constant:
    case IntervalFamily::Log: return 1.0;
    case IntervalFamily::Power: return 1.0 / (1.0 - s.beta * s.beta);
    case IntervalFamily::Explicit: return std::nullopt;
    }
    return std::nullopt;
}

namespace detail {

// sqrt(t_T)/T * sum gamma_m and sqrt(t_T)/(T sqrt(gamma_T)); gamma_0 uses gamma_1.
inline std::pair<double, double> decay_quantities(const CommunicationSchedule& s, const RoundPlan& plan) {
    const auto rounds = static_cast<std::int64_t>(plan.rounds());
    double gamma_sum = s.gamma0;
    double gamma_last = s.gamma0;
    for (std::int64_t m = 1; m <= rounds; ++m) {
        gamma_last = s.gamma0 * std::pow(static_cast<double>(m), -s.alpha);
        gamma_sum += gamma_last;
    }
    const double root_t = std::sqrt(static_cast<double>(plan.total_iterations()));
    const double T = static_cast<double>(rounds);
    return {root_t / T * gamma_sum, root_t / (T * std::sqrt(gamma_last))};
}

} // namespace detail

inline ScheduleDiagnostics diagnostics(const CommunicationSchedule& s, const RoundPlan& plan) {
    ScheduleDiagnostics d;
    d.total_iterations = plan.total_iterations();
    d.nu_hat = nu_hat(plan.intervals);
    d.nu_limit = nu_limit(s);
    d.acf = static_cast<double>(plan.rounds()) / static_cast<double>(d.total_iterations);
    // Trend sampled on powers of two below T, plus T itself.
    const auto T = static_cast<std::int64_t>(plan.rounds());
    for (std::int64_t g = 1; g <= T; g *= 2) d.trend.rounds.push_back(g);
    if (d.trend.rounds.back() != T) d.trend.rounds.push_back(T);
    for (std::int64_t g : d.trend.rounds) {
        RoundPlan prefix;
        prefix.intervals.assign(plan.intervals.begin(), plan.intervals.begin() + g);
        auto [avg, last] = detail::decay_quantities(s, prefix);
        d.trend.averaged_steps.push_back(avg);
        d.trend.last_step.push_back(last);
    }
    return d;
}

inline ScheduleDiagnostics diagnostics(const CommunicationSchedule& s, std::int64_t total_rounds) {
    return diagnostics(s, plan_rounds(s, total_rounds));
}

/// h(r, T) = max{n : r * sum_{m<=T} 1/E_m >= sum_{m<=n} 1/E_m}; 0 when no n >= 1 qualifies.
inline std::size_t fclt_time_scale(std::span<const int> intervals, double r) {
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("fclt_time_scale: r must lie in (0, 1]");
    std::vector<double> partial(intervals.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < intervals.size(); ++i) partial[i] = acc += 1.0 / intervals[i];
    if (r == 1.0) return intervals.size();
    const double threshold = r * acc * (1.0 + 1e-12);
    const auto it = std::upper_bound(partial.begin(), partial.end(), threshold);
    return static_cast<std::size_t>(it - partial.begin());
}

inline std::size_t fclt_time_scale(const CommunicationSchedule& s, double r, std::int64_t total_rounds) {
    return fclt_time_scale(plan_rounds(s, total_rounds).intervals, r);
}

namespace detail {

// Least-squares slope of log(value) against log(T).
inline double log_log_slope(std::span<const std::int64_t> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(static_cast<double>(xs[i]));
        my += std::log(ys[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(static_cast<double>(xs[i])) - mx;
        sxy += dx * (std::log(ys[i]) - my);
        sxx += dx * dx;
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

} // namespace detail

/**
 * Finite-prefix diagnostics for the slowly-increasing-interval conditions.
 * Never rejects: each returned string names a trend that does not decay over
 * the last (up to) three grid points, or an interval growth elasticity
 * (a smoothed m(1 - E_{m-1}/E_m)) that reaches 1.
 */
inline std::vector<std::string> validate_schedule(const CommunicationSchedule& s,
                                                  std::span<const std::int64_t> grid) {
    if (grid.empty()) throw std::invalid_argument("validate_schedule: empty grid");
    s.validate();
    std::vector<std::int64_t> points(grid.begin(), grid.end());
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    std::vector<double> averaged, last, elasticity;
    for (std::int64_t T : points) {
        const RoundPlan plan = plan_rounds(s, T);
        auto [avg, lst] = detail::decay_quantities(s, plan);
        averaged.push_back(avg);
        last.push_back(lst);
        if (T >= 2) {
            const double upper = plan.intervals[static_cast<std::size_t>(T - 1)];
            const double lower = plan.intervals[static_cast<std::size_t>((T + 1) / 2 - 1)];
            elasticity.push_back(std::log(upper / lower) / std::log(static_cast<double>(T) / ((T + 1) / 2)));
        } else {
            elasticity.push_back(0.0);
        }
    }

    std::vector<std::string> warnings;
    const std::size_t tail = std::min<std::size_t>(3, points.size());
    const std::size_t first = points.size() - tail;
    if (tail >= 2) {
        std::span<const std::int64_t> xs(points.data() + first, tail);
        if (detail::log_log_slope(xs, std::span<const double>(averaged.data() + first, tail)) >= 0.0)
            warnings.push_back("sqrt(t_T)/T * sum(gamma_m) is not decreasing over the grid tail");
        if (detail::log_log_slope(xs, std::span<const double>(last.data() + first, tail)) >= 0.0)
            warnings.push_back("sqrt(t_T)/(T*sqrt(gamma_T)) is not decreasing over the grid tail");
    }
    if (elasticity.back() >= 1.0)
        warnings.push_back("interval growth elasticity m(1 - E_{m-1}/E_m) reaches 1 at the largest grid point");
    if (s.family == IntervalFamily::Explicit &&
        !std::is_sorted(s.explicit_intervals.begin(), s.explicit_intervals.end()))
        warnings.push_back("explicit intervals are not non-decreasing");
    return warnings;
}

} // namespace fedstat
