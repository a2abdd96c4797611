#pragma once

// Critical values of t*(beta) = B(1) / sqrt(int_0^1 (B(r) - g(r) B(1))^2 dr),
// g(r) = r^(1/(1-beta)), by Monte Carlo over discretized Brownian paths.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedstat/parallel.hpp"
#include "fedstat/random.hpp"

namespace fedstat {

struct CriticalValueTable {
    std::vector<double> betas;
    std::vector<double> levels;               // probabilities, e.g. 0.975
    std::vector<std::vector<double>> values;  // values[row(beta)][col(level)]
    int steps = 0;
    int replications = 0;
};

struct CritvalOptions {
    int steps = 1000;
    int replications = 50000;
    std::uint64_t seed = 20210601;
    unsigned threads = 1;
    bool smoothing = false;  // Gaussian-kernel smoothed quantiles instead of order statistics
};

inline std::vector<double> default_critval_betas() { return {0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0}; }
inline std::vector<double> default_critval_levels() {
    return {0.01, 0.025, 0.05, 0.10, 0.50, 0.90, 0.95, 0.975, 0.99};
}

namespace detail {

inline bool same_value(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

// min{t : F_n(t) >= p} over the sorted sample.
inline double empirical_quantile(const std::vector<double>& sorted, double p) {
    const auto n = static_cast<double>(sorted.size());
    auto idx = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    idx = std::clamp<std::size_t>(idx, 1, sorted.size());
    return sorted[idx - 1];
}

// Quantile of the Gaussian-kernel density estimate; bandwidth by Scott's
// rule, h = sd * n^(-1/5).
inline double smoothed_quantile(const std::vector<double>& sorted, double p) {
    const double n = static_cast<double>(sorted.size());
    double mean = 0.0;
    for (double v : sorted) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : sorted) var += (v - mean) * (v - mean);
    const double h = std::sqrt(var / (n - 1.0)) * std::pow(n, -0.2);
    auto cdf = [&](double t) {
        // Kernels further than 9h away contribute exactly 0 or 1.
        const auto lo = std::lower_bound(sorted.begin(), sorted.end(), t - 9.0 * h);
        const auto hi = std::upper_bound(sorted.begin(), sorted.end(), t + 9.0 * h);
        double acc = static_cast<double>(lo - sorted.begin());
        for (auto it = lo; it != hi; ++it) acc += 0.5 * std::erfc(-(t - *it) / (h * std::sqrt(2.0)));
        return acc / n;
    };
    double a = sorted.front() - 10.0 * h, b = sorted.back() + 10.0 * h;
    for (int i = 0; i < 100 && b - a > 1e-10; ++i) {
        const double mid = 0.5 * (a + b);
        if (cdf(mid) >= p) b = mid;
        else a = mid;
    }
    return b;
}

// Shortest text that reads back to the same double.
inline std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/**
 * Simulates the table. Path i builds B(k/steps) as cumulative sums of
 * N(0,1)/sqrt(steps) from the stream keyed (seed, i), so output does not
 * depend on the thread count. The integral uses the left-endpoint rule with
 * B(0) = 0. Every beta row is evaluated on the same set of paths.
 */
inline CriticalValueTable simulate_table(std::vector<double> betas, std::vector<double> levels,
                                         const CritvalOptions& options = {}) {
    if (options.steps < 100) throw std::invalid_argument("critvals: steps must be >= 100");
    if (options.replications < 1000) throw std::invalid_argument("critvals: replications must be >= 1000");
    if (betas.empty() || levels.empty()) throw std::invalid_argument("critvals: need betas and levels");
    for (double b : betas)
        if (!(b >= 0.0 && b < 1.0)) throw std::invalid_argument("critvals: beta must lie in [0, 1)");
    for (double p : levels)
        if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("critvals: levels must lie in (0, 1)");

    const int n = options.steps;
    const auto reps = static_cast<std::size_t>(options.replications);
    std::vector<std::vector<double>> weights(betas.size(), std::vector<double>(static_cast<std::size_t>(n)));
    for (std::size_t b = 0; b < betas.size(); ++b)
        for (int i = 0; i < n; ++i)
            weights[b][static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i) / n, 1.0 / (1.0 - betas[b]));

    std::vector<std::vector<double>> stats(betas.size(), std::vector<double>(reps));
    parallel_for(reps, options.threads, [&](std::size_t rep) {
        auto rng = keyed_stream(options.seed, StreamTag::Brownian, rep);
        std::normal_distribution<double> normal;
        std::vector<double> path(static_cast<std::size_t>(n) + 1, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(n));
        for (int i = 1; i <= n; ++i) path[static_cast<std::size_t>(i)] = path[static_cast<std::size_t>(i - 1)] + scale * normal(rng);
        const double end = path[static_cast<std::size_t>(n)];
        for (std::size_t b = 0; b < betas.size(); ++b) {
            double integral = 0.0;
            for (int i = 0; i < n; ++i) {
                const double dev = path[static_cast<std::size_t>(i)] - weights[b][static_cast<std::size_t>(i)] * end;
                integral += dev * dev;
            }
            stats[b][rep] = end / std::sqrt(integral / n);
        }
    });

    CriticalValueTable table;
    table.betas = std::move(betas);
    table.levels = std::move(levels);
    table.steps = options.steps;
    table.replications = options.replications;
    for (auto& row : stats) {
        std::sort(row.begin(), row.end());
        std::vector<double> out;
        for (double p : table.levels)
            out.push_back(options.smoothing ? detail::smoothed_quantile(row, p) : detail::empirical_quantile(row, p));
        table.values.push_back(std::move(out));
    }
    return table;
}

/// Two-sided lookup: the (1 - alpha/2) column of row `beta`. Exact match only.
inline double lookup(const CriticalValueTable& table, double alpha, double beta) {
    const double level = 1.0 - alpha / 2.0;
    std::size_t row = table.betas.size(), col = table.levels.size();
    for (std::size_t i = 0; i < table.betas.size(); ++i)
        if (detail::same_value(table.betas[i], beta)) row = i;
    for (std::size_t j = 0; j < table.levels.size(); ++j)
        if (detail::same_value(table.levels[j], level)) col = j;
    if (row == table.betas.size())
        throw std::out_of_range("critvals: beta " + std::to_string(beta) + " not in table");
    if (col == table.levels.size())
        throw std::out_of_range("critvals: level " + std::to_string(level) + " not in table");
    return table.values[row][col];
}

/// Header `beta,<levels>` then one row per beta; a leading '#' line records provenance.
inline void write_table_csv(std::ostream& out, const CriticalValueTable& table) {
    char buf[40];
    out << "# steps=" << table.steps << " replications=" << table.replications << '\n';
    out << "beta";
    for (double p : table.levels) {
        out << ',' << detail::shortest(p);
    }
    out << '\n';
    for (std::size_t i = 0; i < table.betas.size(); ++i) {
        out << detail::shortest(table.betas[i]);
        for (double v : table.values[i]) {
            std::snprintf(buf, sizeof buf, ",%.6f", v);
            out << buf;
        }
        out << '\n';
    }
}

inline CriticalValueTable read_table_csv(std::istream& in) {
    CriticalValueTable table;
    std::string line;
    bool header = false;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::sscanf(line.c_str(), "# steps=%d replications=%d", &table.steps, &table.replications);
            continue;
        }
        const auto cells = split(line);
        if (cells.size() < 2) throw std::runtime_error("critvals: malformed row: " + line);
        if (!header) {
            if (cells[0] != "beta") throw std::runtime_error("critvals: header must start with 'beta'");
            for (std::size_t j = 1; j < cells.size(); ++j) table.levels.push_back(std::stod(cells[j]));
            header = true;
            continue;
        }
        if (cells.size() != table.levels.size() + 1) throw std::runtime_error("critvals: row width mismatch");
        table.betas.push_back(std::stod(cells[0]));
        std::vector<double> row;
        for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(std::stod(cells[j]));
        table.values.push_back(std::move(row));
    }
    if (!header || table.betas.empty()) throw std::runtime_error("critvals: empty table");
    return table;
}

} // namespace fedstat
