#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedstat/fedstat.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<double> parse_numbers(const std::string& text, const char* what) {
    std::vector<double> out;
    for (const auto& item : fedstat::detail::split_list(text)) out.push_back(fedstat::detail::parse_number(what, item));
    return out;
}

void print_report(const fedstat::ExperimentReport& report) {
    std::printf("%-8s %-10s %8s %9s %8s %11s %11s %7s %7s %5s\n", "method", "schedule", "t_T", "cover(%)", "(se)",
                "len(1e-2)", "(sd)", "acf", "nu_hat", "fail");
    for (const auto& r : report.rows) {
        std::printf("%-8s %-10s %8lld %9.2f %8.3f %11.3f %11.3f %7.4f %7.3f %5zu\n", r.method.c_str(),
                    r.schedule.c_str(), static_cast<long long>(r.total_iterations), 100 * r.coverage,
                    100 * r.coverage_se, 100 * r.mean_length, 100 * r.length_sd, r.acf, r.nu_hat, r.failures);
    }
    std::printf("wall clock: %.1f s\n", report.wall_seconds);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local SGD simulation and online inference"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    unsigned threads = 0;

    auto* run = app.add_subcommand("run", "Run a coverage experiment");
    run->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    run->add_option("--threads", threads, "Worker threads (default: config value or hardware)");
    run->add_option("--out", out_dir, "Output directory");

    std::string checkpoints_text;
    auto* curve = app.add_subcommand("curve", "Mean |y_bar_T - x*| against communication rounds");
    curve->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    curve->add_option("--checkpoints", checkpoints_text, "Comma-separated increasing round counts")->required();
    curve->add_option("--threads", threads, "Worker threads");
    curve->add_option("--out", out_dir, "Output directory");

    std::string betas_text = "0,1/3,1/2,2/3", levels_text = "0.01,0.025,0.05,0.1,0.5,0.9,0.95,0.975,0.99";
    std::string table_out = "critvals.csv";
    fedstat::CritvalOptions crit;
    auto* critvals = app.add_subcommand("critvals", "Simulate critical values of the random-scaling statistic");
    critvals->add_option("--betas", betas_text, "Comma-separated betas in [0,1); fractions allowed");
    critvals->add_option("--levels", levels_text, "Comma-separated probabilities");
    critvals->add_option("--steps", crit.steps, "Brownian discretization steps");
    critvals->add_option("--reps", crit.replications, "Monte Carlo replications");
    critvals->add_option("--seed", crit.seed, "Seed");
    critvals->add_option("--threads", threads, "Worker threads");
    critvals->add_flag("--smooth", crit.smoothing, "Gaussian-kernel smoothed quantiles (Scott's rule)");
    critvals->add_option("--out", table_out, "Output CSV file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run || *curve) {
            fedstat::ExperimentConfig config = fedstat::load_config(config_path);
            if (threads > 0) config.threads = threads;
            else if (config.threads <= 1) config.threads = fedstat::default_threads();
            fs::create_directories(out_dir);

            if (*run) {
                std::string dump_dir;
                if (config.dump_paths) {
                    dump_dir = (fs::path(out_dir) / "paths").string();
                    fs::create_directories(dump_dir);
                }
                const auto report = fedstat::run_experiment(config, nullptr, dump_dir);
                for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
                std::ofstream rep(fs::path(out_dir) / "report.csv");
                fedstat::write_report_csv(rep, report);
                std::ofstream reps(fs::path(out_dir) / "replications.csv");
                fedstat::write_replications_csv(reps, report);
                print_report(report);
            } else {
                std::vector<std::size_t> checkpoints;
                for (double v : parse_numbers(checkpoints_text, "checkpoints")) {
                    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
                        throw fedstat::ConfigError("curve: checkpoints must be positive integers");
                    checkpoints.push_back(static_cast<std::size_t>(v));
                }
                const auto points = fedstat::convergence_curve(config, checkpoints);
                std::ofstream out(fs::path(out_dir) / "curve.csv");
                fedstat::write_curve_csv(out, points);
                fedstat::write_curve_csv(std::cout, points);
            }
        } else if (*critvals) {
            crit.threads = threads > 0 ? threads : fedstat::default_threads();
            const auto table = fedstat::simulate_table(parse_numbers(betas_text, "betas"),
                                                       parse_numbers(levels_text, "levels"), crit);
            std::ofstream out(table_out);
            if (!out) throw fedstat::ConfigError("cannot write '" + table_out + "'");
            fedstat::write_table_csv(out, table);
            fedstat::write_table_csv(std::cout, table);
        }
    } catch (const fedstat::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
