#pragma once

// Monte Carlo experiment runner: replicated Local SGD runs with plug-in and
// random-scaling intervals attached online, aggregated into coverage rates and
// interval lengths. Replications run in parallel but are reduced in index
// order, so reports are byte-identical for a given config and seed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedstat/critvals.hpp"
#include "fedstat/engine.hpp"
#include "fedstat/models.hpp"
#include "fedstat/parallel.hpp"
#include "fedstat/plugin.hpp"
#include "fedstat/rscale.hpp"
#include "fedstat/schedules.hpp"

#ifndef FEDSTAT_DATA_DIR
#define FEDSTAT_DATA_DIR "data"
#endif

namespace fedstat {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    ModelKind model = ModelKind::Linear;
    Eigen::Index dimension = 5;
    std::size_t clients = 10;
    double noise = 1.0;
    bool heterogeneous = true;
    double curvature = 1.0;               // quadratic only
    std::vector<double> weights;          // empty: uniform

    std::optional<double> gamma0;         // default 0.5, or 2 for logistic
    double decay = 0.505;
    double warmup = 0.05;
    std::vector<std::string> schedules{"C1"};
    std::vector<std::int64_t> observations{10000};

    std::size_t replications = 1000;
    std::uint64_t seed = 2021;
    bool plugin = true;
    bool rscale = true;
    double level = 0.05;                  // alpha; intervals have coverage 1 - alpha
    Eigen::Index coordinate = 0;          // 0-based here, 1-based in config files
    bool plugin_include_warmup = true;
    double divergence_bound = 1e8;
    std::string critvals_path = std::string(FEDSTAT_DATA_DIR) + "/critvals.csv";
    bool dump_paths = false;
    unsigned threads = 1;

    double step_gamma0() const { return gamma0.value_or(model == ModelKind::Logistic ? 2.0 : 0.5); }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Splits on commas that are not inside parentheses.
inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

inline double parse_number(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    const auto slash = t.find('/');
    try {
        std::size_t used = 0;
        if (slash != std::string::npos) {
            const double num = std::stod(t.substr(0, slash));
            const double den = std::stod(t.substr(slash + 1), &used);
            if (used != t.size() - slash - 1 || den == 0.0) throw std::invalid_argument(t);
            return num / den;
        }
        const double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument(t);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "on" || t == "true" || t == "yes" || t == "1" || t == "include") return true;
    if (t == "off" || t == "false" || t == "no" || t == "0" || t == "exclude") return false;
    throw ConfigError("config: '" + key + "' expects on/off, got '" + text + "'");
}

inline std::int64_t parse_count(const std::string& key, const std::string& text) {
    const double v = parse_number(key, text);
    if (v < 0 || v != std::floor(v)) throw ConfigError("config: '" + key + "' expects a non-negative integer");
    return static_cast<std::int64_t>(v);
}

} // namespace detail

/**
 * Schedule names: C<E> (constant), Log (ceil(log2(m+1))), Log(E,beta),
 * P(<beta>) (ceil(m^beta)), Power(E,beta). Fractions such as 1/2 are allowed.
 */
inline CommunicationSchedule parse_schedule(const std::string& name) {
    const std::string n = detail::trim(name);
    auto args = [&](std::size_t open) {
        if (n.back() != ')') throw ConfigError("config: malformed schedule '" + name + "'");
        return detail::split_list(n.substr(open + 1, n.size() - open - 2));
    };
    CommunicationSchedule s;
    if (n.size() > 1 && n[0] == 'C' && n.find('(') == std::string::npos) {
        const double e = detail::parse_number("schedules", n.substr(1));
        if (e < 1 || e != std::floor(e)) throw ConfigError("config: constant interval must be a positive integer");
        s = CommunicationSchedule::constant(static_cast<int>(e));
    } else if (n == "Log") {
        s = CommunicationSchedule::logarithmic(1.0, 1.0);
    } else if (n.rfind("Log(", 0) == 0) {
        const auto a = args(3);
        if (a.size() != 2) throw ConfigError("config: Log(E,beta) takes two arguments");
        s = CommunicationSchedule::logarithmic(detail::parse_number("schedules", a[0]),
                                               detail::parse_number("schedules", a[1]));
    } else if (n.rfind("P(", 0) == 0) {
        const auto a = args(1);
        if (a.size() != 1) throw ConfigError("config: P(beta) takes one argument");
        s = CommunicationSchedule::power(1.0, detail::parse_number("schedules", a[0]));
    } else if (n.rfind("Power(", 0) == 0) {
        const auto a = args(5);
        if (a.size() != 2) throw ConfigError("config: Power(E,beta) takes two arguments");
        s = CommunicationSchedule::power(detail::parse_number("schedules", a[0]),
                                         detail::parse_number("schedules", a[1]));
    } else {
        throw ConfigError("config: unknown schedule '" + name + "'");
    }
    s.label = n;
    return s;
}

/// Flat `key = value` lines; '#' starts a comment. Unknown keys are errors.
inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "model") {
            if (value == "linear") c.model = ModelKind::Linear;
            else if (value == "logistic") c.model = ModelKind::Logistic;
            else if (value == "quadratic") c.model = ModelKind::Quadratic;
            else throw ConfigError("config: unknown model '" + value + "'");
        } else if (key == "dimension" || key == "d") {
            c.dimension = detail::parse_count(key, value);
        } else if (key == "clients" || key == "K") {
            c.clients = static_cast<std::size_t>(detail::parse_count(key, value));
        } else if (key == "noise") {
            c.noise = detail::parse_number(key, value);
        } else if (key == "heterogeneity") {
            c.heterogeneous = detail::parse_bool(key, value);
        } else if (key == "curvature") {
            c.curvature = detail::parse_number(key, value);
        } else if (key == "weights") {
            c.weights.clear();
            for (const auto& w : detail::split_list(value)) c.weights.push_back(detail::parse_number(key, w));
        } else if (key == "gamma0") {
            c.gamma0 = detail::parse_number(key, value);
        } else if (key == "decay") {
            c.decay = detail::parse_number(key, value);
        } else if (key == "warmup") {
            c.warmup = detail::parse_number(key, value);
        } else if (key == "schedules") {
            c.schedules = detail::split_list(value);
        } else if (key == "observations") {
            c.observations.clear();
            for (const auto& v : detail::split_list(value)) c.observations.push_back(detail::parse_count(key, v));
        } else if (key == "replications") {
            c.replications = static_cast<std::size_t>(detail::parse_count(key, value));
        } else if (key == "seed") {
            c.seed = static_cast<std::uint64_t>(detail::parse_count(key, value));
        } else if (key == "methods") {
            c.plugin = c.rscale = false;
            for (const auto& m : detail::split_list(value)) {
                if (m == "plugin") c.plugin = true;
                else if (m == "rscale") c.rscale = true;
                else throw ConfigError("config: unknown method '" + m + "'");
            }
        } else if (key == "level") {
            c.level = detail::parse_number(key, value);
        } else if (key == "coordinate") {
            c.coordinate = detail::parse_count(key, value) - 1;
        } else if (key == "plugin_warmup") {
            c.plugin_include_warmup = detail::parse_bool(key, value);
        } else if (key == "divergence_bound") {
            c.divergence_bound = detail::parse_number(key, value);
        } else if (key == "critvals") {
            c.critvals_path = value;
        } else if (key == "dump_paths") {
            c.dump_paths = detail::parse_bool(key, value);
        } else if (key == "threads") {
            c.threads = static_cast<unsigned>(detail::parse_count(key, value));
        } else {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse_config(in);
}

/// Throws ConfigError on an inconsistent configuration.
inline void validate_config(const ExperimentConfig& c) {
    if (c.dimension < 1) throw ConfigError("config: dimension must be >= 1");
    if (c.clients < 1) throw ConfigError("config: clients must be >= 1");
    if (!c.weights.empty() && c.weights.size() != c.clients)
        throw ConfigError("config: weights must list one value per client");
    if (c.replications < 1) throw ConfigError("config: replications must be >= 1");
    if (!c.plugin && !c.rscale) throw ConfigError("config: no inference method selected");
    if (!(c.level > 0.0 && c.level < 1.0)) throw ConfigError("config: level must lie in (0, 1)");
    if (c.coordinate < 0 || c.coordinate >= c.dimension) throw ConfigError("config: coordinate out of range");
    if (c.schedules.empty()) throw ConfigError("config: no schedules");
    if (c.observations.empty()) throw ConfigError("config: no observation targets");
    for (auto t : c.observations)
        if (t < 1) throw ConfigError("config: observation targets must be positive");
    for (const auto& name : c.schedules) {
        auto s = parse_schedule(name);
        s.with_steps(c.step_gamma0(), c.decay).with_warmup(c.warmup);
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
}

inline CommunicationSchedule configured_schedule(const ExperimentConfig& c, const std::string& name) {
    auto s = parse_schedule(name);
    s.with_steps(c.step_gamma0(), c.decay).with_warmup(c.warmup);
    return s;
}

/// The experiment's fixed data-generating process; local optima come from the master seed.
inline Federation build_federation(const ExperimentConfig& c) {
    try {
        switch (c.model) {
        case ModelKind::Linear:
            return linear_federation(c.dimension, c.clients, c.noise, c.heterogeneous, c.seed, c.weights);
        case ModelKind::Logistic: return logistic_federation(c.dimension, c.clients, c.weights);
        case ModelKind::Quadratic: {
            std::vector<Vector> centers(c.clients, Vector::Zero(c.dimension));
            if (c.heterogeneous) {
                for (std::size_t k = 0; k < c.clients; ++k) {
                    auto rng = keyed_stream(c.seed, StreamTag::Federation, k);
                    std::normal_distribution<double> normal;
                    for (Eigen::Index i = 0; i < c.dimension; ++i) centers[k][i] = normal(rng);
                }
            }
            return quadratic_federation(centers, c.curvature, c.weights);
        }
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    throw ConfigError("config: unsupported model");
}

inline std::uint64_t replication_seed(std::uint64_t master, std::size_t rep) {
    return mix_key({master, static_cast<std::uint64_t>(StreamTag::Replication), rep});
}

struct ReplicationRecord {
    std::size_t replication = 0;
    std::string method;
    std::string schedule;
    double beta = 0.0;
    std::int64_t total_iterations = 0;
    Eigen::Index coordinate = 0;
    Interval interval;
    bool covered = false;
    bool failed = false;
};

struct ReportRow {
    std::string method;
    std::string schedule;
    std::int64_t total_iterations = 0;
    double coverage = 0.0;       // among non-failed replications
    double coverage_se = 0.0;    // sqrt(p(1-p)/n)
    double mean_length = 0.0;
    double length_sd = 0.0;
    double acf = 1.0;
    double nu_hat = 1.0;
    std::size_t failures = 0;
    double beta = 0.0;
    std::size_t rounds = 0;
    std::size_t replications = 0;
    double coverage_raw = 0.0;   // failures counted as misses
    double mean_error = 0.0;     // mean |y_bar_T - x*|
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::vector<ReplicationRecord> records;
    std::vector<std::string> warnings;
    double wall_seconds = 0.0;
};

namespace detail {

inline ReportRow summarize(const std::vector<ReplicationRecord>& recs, const std::string& method,
                           const std::string& schedule, const RoundPlan& plan, const ScheduleDiagnostics& diag,
                           double beta, double mean_error) {
    ReportRow row;
    row.method = method;
    row.schedule = schedule;
    row.total_iterations = diag.total_iterations;
    row.acf = diag.acf;
    row.nu_hat = diag.nu_hat;
    row.beta = beta;
    row.rounds = plan.rounds();
    row.replications = recs.size();
    row.mean_error = mean_error;
    std::size_t covered = 0, ok = 0;
    double sum = 0.0;
    for (const auto& r : recs) {
        if (r.failed) {
            ++row.failures;
            continue;
        }
        ++ok;
        covered += r.covered ? 1 : 0;
        sum += r.interval.width();
    }
    if (ok > 0) {
        row.coverage = static_cast<double>(covered) / static_cast<double>(ok);
        row.coverage_se = std::sqrt(row.coverage * (1.0 - row.coverage) / static_cast<double>(ok));
        row.mean_length = sum / static_cast<double>(ok);
        double ss = 0.0;
        for (const auto& r : recs)
            if (!r.failed) ss += (r.interval.width() - row.mean_length) * (r.interval.width() - row.mean_length);
        row.length_sd = ok > 1 ? std::sqrt(ss / static_cast<double>(ok - 1)) : 0.0;
    }
    row.coverage_raw = static_cast<double>(covered) / static_cast<double>(recs.size());
    return row;
}

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace detail

inline CriticalValueTable load_critvals(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("critical value table not found: '" + path + "' (regenerate with `fedstat critvals`)");
    return read_table_csv(in);
}

/**
 * Runs every (schedule, observation target) cell for R replications.
 * Replication r uses the same seed in every cell. A replication whose
 * Hessian estimate is singular is counted in `failures` and excluded from
 * the adjusted coverage.
 */
inline ExperimentReport run_experiment(const ExperimentConfig& config, const CriticalValueTable* table = nullptr,
                                       const std::string& path_dump_dir = {}) {
    validate_config(config);
    const auto start = std::chrono::steady_clock::now();
    std::optional<CriticalValueTable> loaded;
    if (config.rscale && table == nullptr) {
        loaded = load_critvals(config.critvals_path);
        table = &*loaded;
    }
    const Federation fed = build_federation(config);
    const Vector& x_star = fed.global_optimum;
    const Eigen::Index j = config.coordinate;
    const Vector x0 = Vector::Zero(config.dimension);

    ExperimentReport report;
    for (const auto& name : config.schedules) {
        const CommunicationSchedule schedule = configured_schedule(config, name);
        const double beta = beta_for_schedule(schedule);
        if (config.rscale) {
            try {
                (void)lookup(*table, config.level, beta);
            } catch (const std::out_of_range& e) {
                throw ConfigError(std::string("config: schedule ") + name + ": " + e.what());
            }
        }
        for (std::int64_t target : config.observations) {
            const RoundPlan plan = plan_for_observations(schedule, target);
            const ScheduleDiagnostics diag = diagnostics(schedule, plan);
            std::vector<std::int64_t> grid;
            for (std::int64_t g = std::max<std::int64_t>(1, static_cast<std::int64_t>(plan.rounds()) / 4);
                 g <= static_cast<std::int64_t>(plan.rounds()); g *= 2)
                grid.push_back(g);
            for (auto& w : validate_schedule(schedule, grid))
                report.warnings.push_back(name + " @ t_T=" + std::to_string(diag.total_iterations) + ": " + w);

            const std::size_t R = config.replications;
            std::vector<ReplicationRecord> plugin_recs(R), rscale_recs(R);
            std::vector<double> errors(R);
            parallel_for(R, config.threads, [&](std::size_t r) {
                PluginObserver plugin_obs(config.dimension, static_cast<std::size_t>(plan.warmup),
                                          config.plugin_include_warmup);
                RScaleObserver rscale_obs(config.dimension);
                std::vector<SyncObserver*> observers;
                if (config.plugin) observers.push_back(&plugin_obs);
                if (config.rscale) observers.push_back(&rscale_obs);
                EngineOptions opts;
                opts.divergence_bound = config.divergence_bound;
                opts.record_path = config.dump_paths && !path_dump_dir.empty();
                const SyncPath path = run_local_sgd(fed, plan, x0, replication_seed(config.seed, r), observers, opts);
                if (opts.record_path) {
                    std::ofstream out(path_dump_dir + "/" + name + "_t" + std::to_string(target) + "_r" +
                                      std::to_string(r) + ".csv");
                    write_path_csv(out, path);
                }

                auto base = [&](const char* method) {
                    ReplicationRecord rec;
                    rec.replication = r;
                    rec.method = method;
                    rec.schedule = name;
                    rec.beta = beta;
                    rec.total_iterations = diag.total_iterations;
                    rec.coordinate = j;
                    return rec;
                };
                if (config.plugin) {
                    auto rec = base("plugin");
                    try {
                        rec.interval = plugin_interval(plugin_obs.state(), diag.nu_hat, diag.total_iterations, j,
                                                       config.level);
                        rec.covered = rec.interval.contains(x_star[j]);
                    } catch (const SingularHessianError&) {
                        rec.failed = true;
                    }
                    plugin_recs[r] = rec;
                    errors[r] = (plugin_obs.state().average - x_star).norm();
                }
                if (config.rscale) {
                    auto rec = base("rscale");
                    rec.interval = rscale_interval(rscale_obs.state(), j, config.level, beta, *table);
                    rec.covered = rec.interval.contains(x_star[j]);
                    rscale_recs[r] = rec;
                    errors[r] = (rscale_obs.state().average - x_star).norm();
                }
            });

            double mean_error = 0.0;
            for (double e : errors) mean_error += e;
            mean_error /= static_cast<double>(R);
            if (config.plugin) {
                report.rows.push_back(detail::summarize(plugin_recs, "plugin", name, plan, diag, beta, mean_error));
                if (report.rows.back().failures > 0)
                    report.warnings.push_back(name + " @ t_T=" + std::to_string(diag.total_iterations) + ": " +
                                              std::to_string(report.rows.back().failures) +
                                              " plug-in replications had a singular Hessian estimate");
                report.records.insert(report.records.end(), plugin_recs.begin(), plugin_recs.end());
            }
            if (config.rscale) {
                report.rows.push_back(detail::summarize(rscale_recs, "rscale", name, plan, diag, beta, mean_error));
                report.records.insert(report.records.end(), rscale_recs.begin(), rscale_recs.end());
            }
        }
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
    using detail::num;
    out << "method,schedule,t_T,coverage,coverage_se,mean_len,len_sd,acf,nu_hat,failures,"
           "beta,rounds,replications,coverage_raw,mean_error\n";
    for (const auto& r : report.rows) {
        out << r.method << ',' << r.schedule << ',' << r.total_iterations << ',' << num(r.coverage) << ','
            << num(r.coverage_se) << ',' << num(r.mean_length) << ',' << num(r.length_sd) << ',' << num(r.acf) << ','
            << num(r.nu_hat) << ',' << r.failures << ',' << num(r.beta) << ',' << r.rounds << ',' << r.replications
            << ',' << num(r.coverage_raw) << ',' << num(r.mean_error) << '\n';
    }
}

/// One row per replication and method; beta is left empty for plug-in rows.
inline void write_replications_csv(std::ostream& out, const ExperimentReport& report) {
    using detail::num;
    out << "replication,method,schedule,beta,t_T,coordinate,lo,hi,covered,width,failed\n";
    for (const auto& r : report.records) {
        out << r.replication << ',' << r.method << ',' << r.schedule << ','
            << (r.method == "rscale" ? num(r.beta) : std::string()) << ',' << r.total_iterations << ','
            << (r.coordinate + 1) << ',' << num(r.interval.lower) << ',' << num(r.interval.upper) << ','
            << (r.covered ? 1 : 0) << ',' << num(r.interval.width()) << ',' << (r.failed ? 1 : 0) << '\n';
    }
}

struct CurvePoint {
    std::string schedule;
    std::size_t rounds = 0;          // communication count T
    std::int64_t total_iterations = 0;
    double mean_error = 0.0;         // mean |y_bar_T - x*|
    double error_se = 0.0;
};

namespace detail {

class CheckpointObserver : public SyncObserver {
public:
    CheckpointObserver(const std::vector<std::size_t>& checkpoints, const Vector& x_star)
        : checkpoints_(checkpoints), x_star_(x_star), average_(Vector::Zero(x_star.size())) {}

    void on_sync(const SyncEvent& e) override {
        average_ += (e.average - average_) / static_cast<double>(e.round);
        if (next_ < checkpoints_.size() && checkpoints_[next_] == e.round) {
            errors.push_back((average_ - x_star_).norm());
            ++next_;
        }
    }

    std::vector<double> errors;

private:
    const std::vector<std::size_t>& checkpoints_;
    const Vector& x_star_;
    Vector average_;
    std::size_t next_ = 0;
};

} // namespace detail

/// Mean |y_bar_T - x*| at each checkpoint T (communication rounds), per schedule.
inline std::vector<CurvePoint> convergence_curve(const ExperimentConfig& config,
                                                 const std::vector<std::size_t>& checkpoints) {
    validate_config(config);
    if (checkpoints.empty()) throw ConfigError("curve: no checkpoints");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 1) throw ConfigError("curve: checkpoints must be >= 1");
        if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) throw ConfigError("curve: checkpoints must increase");
    }
    const Federation fed = build_federation(config);
    const Vector x0 = Vector::Zero(config.dimension);
    const std::size_t R = config.replications;
    std::vector<CurvePoint> out;
    for (const auto& name : config.schedules) {
        const CommunicationSchedule schedule = configured_schedule(config, name);
        const RoundPlan plan = plan_rounds(schedule, static_cast<std::int64_t>(checkpoints.back()));
        std::vector<std::vector<double>> errors(R);
        parallel_for(R, config.threads, [&](std::size_t r) {
            detail::CheckpointObserver obs(checkpoints, fed.global_optimum);
            SyncObserver* observers[] = {&obs};
            EngineOptions opts;
            opts.record_path = false;
            opts.divergence_bound = config.divergence_bound;
            run_local_sgd(fed, plan, x0, replication_seed(config.seed, r), observers, opts);
            errors[r] = std::move(obs.errors);
        });
        std::int64_t iterations = 0;
        std::size_t round = 0;
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
            while (round < checkpoints[c]) iterations += plan.intervals[round++];
            CurvePoint p;
            p.schedule = name;
            p.rounds = checkpoints[c];
            p.total_iterations = iterations;
            double sum = 0.0, sq = 0.0;
            for (const auto& e : errors) {
                sum += e[c];
                sq += e[c] * e[c];
            }
            p.mean_error = sum / static_cast<double>(R);
            const double var = R > 1 ? (sq - R * p.mean_error * p.mean_error) / static_cast<double>(R - 1) : 0.0;
            p.error_se = std::sqrt(std::max(0.0, var) / static_cast<double>(R));
            out.push_back(p);
        }
    }
    return out;
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
    out << "schedule,rounds,t_T,mean_error,error_se\n";
    for (const auto& p : curve)
        out << p.schedule << ',' << p.rounds << ',' << p.total_iterations << ',' << detail::num(p.mean_error) << ','
            << detail::num(p.error_se) << '\n';
}

/// phi_T(r) = sqrt(t_T)/T * sum_{m <= h(r,T)} (x_bar_{t_m} - x*) at each grid point.
inline std::vector<Vector> partial_sum_process(const SyncPath& path, std::span<const int> intervals,
                                               const Vector& x_star, std::span<const double> grid) {
    if (intervals.size() != path.points.size())
        throw std::invalid_argument("partial_sum_process: path and intervals differ in length");
    const double T = static_cast<double>(path.points.size());
    const double scale = std::sqrt(static_cast<double>(path.total_iterations)) / T;
    std::vector<Vector> out;
    out.reserve(grid.size());
    for (double r : grid) {
        const std::size_t h = fclt_time_scale(intervals, r);
        Vector sum = Vector::Zero(x_star.size());
        for (std::size_t m = 0; m < h; ++m) sum += path.points[m] - x_star;
        out.push_back(scale * sum);
    }
    return out;
}

} // namespace fedstat
