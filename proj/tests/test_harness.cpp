#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fedstat/harness.hpp"

using namespace fedstat;
namespace fs = std::filesystem;

namespace {

CriticalValueTable small_table() {
    CriticalValueTable t;
    t.betas = {0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0};
    t.levels = {0.025, 0.5, 0.975};
    t.values = {{-6.753, 0.0, 6.753}, {-6.339, 0.0, 6.339}, {-5.851, 0.0, 5.851}, {-4.993, 0.0, 4.993}};
    t.steps = 1000;
    t.replications = 50000;
    return t;
}

ExperimentConfig small_linear() {
    ExperimentConfig c;
    c.dimension = 3;
    c.clients = 4;
    c.schedules = {"C1", "P(1/2)"};
    c.observations = {400};
    c.replications = 20;
    c.seed = 77;
    return c;
}

std::string report_text(const ExperimentReport& r) {
    std::ostringstream out;
    write_report_csv(out, r);
    write_replications_csv(out, r);
    return out.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fedstat_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FEDSTAT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(ParseSchedule, Names) {
    auto c = parse_schedule("C5");
    EXPECT_EQ(c.family, IntervalFamily::Constant);
    EXPECT_EQ(c.scale, 5.0);
    EXPECT_EQ(c.name(), "C5");
    auto l = parse_schedule("Log");
    EXPECT_EQ(l.family, IntervalFamily::Log);
    EXPECT_EQ(l.beta, 1.0);
    auto l2 = parse_schedule("Log(2, 1.5)");
    EXPECT_EQ(l2.scale, 2.0);
    EXPECT_EQ(l2.beta, 1.5);
    auto p = parse_schedule("P(1/3)");
    EXPECT_EQ(p.family, IntervalFamily::Power);
    EXPECT_DOUBLE_EQ(p.beta, 1.0 / 3.0);
    auto p2 = parse_schedule("Power(2,0.25)");
    EXPECT_EQ(p2.scale, 2.0);
    EXPECT_EQ(p2.beta, 0.25);
    EXPECT_THROW(parse_schedule("Q3"), ConfigError);
    EXPECT_THROW(parse_schedule("C0"), ConfigError);
    EXPECT_THROW(parse_schedule("C2.5"), ConfigError);
    EXPECT_THROW(parse_schedule("P(1/2,3)"), ConfigError);
}

TEST(ParseConfig, KeysAndComments) {
    std::istringstream in(R"(# logistic run
model = logistic
d = 4          # dimension
K = 8
schedules = C1, P(1/2), Power(2, 0.25)
observations = 1000, 10000
replications = 50
seed = 9
methods = rscale
level = 0.1
coordinate = 2
plugin_warmup = off
)");
    const auto c = parse_config(in);
    EXPECT_EQ(c.model, ModelKind::Logistic);
    EXPECT_EQ(c.dimension, 4);
    EXPECT_EQ(c.clients, 8u);
    ASSERT_EQ(c.schedules.size(), 3u);
    EXPECT_EQ(c.schedules[2], "Power(2, 0.25)");
    EXPECT_EQ(c.observations, (std::vector<std::int64_t>{1000, 10000}));
    EXPECT_EQ(c.replications, 50u);
    EXPECT_FALSE(c.plugin);
    EXPECT_TRUE(c.rscale);
    EXPECT_EQ(c.coordinate, 1);
    EXPECT_FALSE(c.plugin_include_warmup);
    EXPECT_EQ(c.step_gamma0(), 2.0);
}

TEST(ParseConfig, Errors) {
    std::istringstream unknown("colour = red\n");
    EXPECT_THROW(parse_config(unknown), ConfigError);
    std::istringstream noeq("model linear\n");
    EXPECT_THROW(parse_config(noeq), ConfigError);
    std::istringstream badnum("noise = lots\n");
    EXPECT_THROW(parse_config(badnum), ConfigError);
    std::istringstream badmodel("model = cubic\n");
    EXPECT_THROW(parse_config(badmodel), ConfigError);
}

TEST(ValidateConfig, Rejections) {
    auto c = small_linear();
    EXPECT_NO_THROW(validate_config(c));
    c.coordinate = 3;
    EXPECT_THROW(validate_config(c), ConfigError);
    c = small_linear();
    c.schedules = {"P(1)"};
    EXPECT_THROW(validate_config(c), ConfigError);
    c = small_linear();
    c.decay = 0.4;
    EXPECT_THROW(validate_config(c), ConfigError);
    c = small_linear();
    c.weights = {0.5, 0.5};
    EXPECT_THROW(validate_config(c), ConfigError);
    c = small_linear();
    c.plugin = c.rscale = false;
    EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(RunExperiment, NoiselessQuadraticCoversWithZeroWidth) {
    ExperimentConfig c;
    c.model = ModelKind::Quadratic;
    c.heterogeneous = false;
    c.dimension = 2;
    c.clients = 3;
    c.schedules = {"C2", "P(1/2)"};
    c.observations = {200};
    c.replications = 5;
    const auto table = small_table();
    const auto report = run_experiment(c, &table);
    ASSERT_EQ(report.rows.size(), 4u);
    for (const auto& row : report.rows) {
        EXPECT_EQ(row.coverage, 1.0) << row.method << ' ' << row.schedule;
        EXPECT_EQ(row.mean_length, 0.0);
        EXPECT_EQ(row.failures, 0u);
    }
}

TEST(RunExperiment, ByteIdenticalAcrossRunsAndThreads) {
    auto c = small_linear();
    const auto table = small_table();
    const std::string a = report_text(run_experiment(c, &table));
    const std::string b = report_text(run_experiment(c, &table));
    c.threads = 4;
    const std::string d = report_text(run_experiment(c, &table));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, d);
    c.seed = 78;
    EXPECT_NE(a, report_text(run_experiment(c, &table)));
}

TEST(RunExperiment, ReportShape) {
    const auto table = small_table();
    const auto report = run_experiment(small_linear(), &table);
    ASSERT_EQ(report.rows.size(), 4u);
    EXPECT_EQ(report.rows[0].method, "plugin");
    EXPECT_EQ(report.rows[1].method, "rscale");
    EXPECT_EQ(report.rows[0].schedule, "C1");
    EXPECT_EQ(report.rows[2].schedule, "P(1/2)");
    EXPECT_EQ(report.rows[0].total_iterations, 400);
    EXPECT_GE(report.rows[2].total_iterations, 400);
    EXPECT_DOUBLE_EQ(report.rows[3].beta, 0.5);
    EXPECT_EQ(report.records.size(), 4u * 20u);
    for (const auto& row : report.rows) {
        EXPECT_GE(row.coverage, 0.0);
        EXPECT_LE(row.coverage, 1.0);
        EXPECT_GT(row.mean_length, 0.0);
        EXPECT_EQ(row.replications, 20u);
    }
    std::ostringstream out;
    write_report_csv(out, report);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
              "method,schedule,t_T,coverage,coverage_se,mean_len,len_sd,acf,nu_hat,failures,beta,rounds,"
              "replications,coverage_raw,mean_error");
}

TEST(RunExperiment, MissingCriticalValueRowIsConfigError) {
    auto c = small_linear();
    c.schedules = {"P(1/4)"};
    const auto table = small_table();
    EXPECT_THROW(run_experiment(c, &table), ConfigError);
}

TEST(ConvergenceCurve, ErrorShrinks) {
    auto c = small_linear();
    c.schedules = {"C1"};
    c.replications = 30;
    const auto curve = convergence_curve(c, {50, 5000});
    ASSERT_EQ(curve.size(), 2u);
    EXPECT_EQ(curve[0].total_iterations, 50);
    EXPECT_EQ(curve[1].total_iterations, 5000);
    EXPECT_LT(curve[1].mean_error, curve[0].mean_error);
    EXPECT_THROW(convergence_curve(c, {10, 10}), ConfigError);
}

TEST(PartialSumProcess, EndpointIsScaledSum) {
    SyncPath path;
    for (int m = 1; m <= 4; ++m) {
        path.points.push_back(Vector::Constant(1, m));
        path.comm_times.push_back(2 * m);
    }
    path.total_iterations = 8;
    const std::vector<int> intervals(4, 2);
    const std::vector<double> grid{0.5, 1.0};
    const auto phi = partial_sum_process(path, intervals, Vector::Zero(1), grid);
    EXPECT_NEAR(phi[0][0], std::sqrt(8.0) / 4 * 3, 1e-12);
    EXPECT_NEAR(phi[1][0], std::sqrt(8.0) / 4 * 10, 1e-12);
}

TEST(ReplicationSeed, Distinct) {
    EXPECT_NE(replication_seed(1, 0), replication_seed(1, 1));
    EXPECT_NE(replication_seed(1, 0), replication_seed(2, 0));
    EXPECT_EQ(replication_seed(5, 3), replication_seed(5, 3));
}

TEST(Cli, ExitCodesAndOutputs) {
    const fs::path dir = scratch("cli");
    {
        std::ofstream t(dir / "crit.csv");
        write_table_csv(t, small_table());
        std::ofstream cfg(dir / "ok.cfg");
        cfg << "model = linear\nd = 2\nK = 3\nschedules = C1\nobservations = 200\nreplications = 4\n"
            << "critvals = " << (dir / "crit.csv").string() << "\n";
        std::ofstream bad(dir / "bad.cfg");
        bad << "model = linear\nflavour = vanilla\n";
    }
    EXPECT_EQ(run_cli("run --config " + (dir / "ok.cfg").string() + " --out " + (dir / "a").string()), 0);
    EXPECT_EQ(run_cli("run --config " + (dir / "ok.cfg").string() + " --threads 3 --out " + (dir / "b").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "a" / "report.csv"));
    EXPECT_TRUE(fs::exists(dir / "a" / "replications.csv"));
    EXPECT_EQ(slurp(dir / "a" / "report.csv"), slurp(dir / "b" / "report.csv"));
    EXPECT_EQ(run_cli("run --config " + (dir / "bad.cfg").string() + " --out " + (dir / "c").string()), 2);
    EXPECT_NE(run_cli("run --config " + (dir / "missing.cfg").string()), 0);
    EXPECT_NE(run_cli(""), 0);
    EXPECT_EQ(run_cli("curve --config " + (dir / "ok.cfg").string() + " --checkpoints 10,100 --out " +
                      (dir / "d").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "d" / "curve.csv"));
    EXPECT_EQ(run_cli("critvals --betas 0,1/2 --levels 0.5,0.975 --steps 100 --reps 1000 --out " +
                      (dir / "cv.csv").string()),
              0);
    std::ifstream cv(dir / "cv.csv");
    const auto table = read_table_csv(cv);
    EXPECT_EQ(table.betas.size(), 2u);
    EXPECT_EQ(run_cli("critvals --betas 1.5 --steps 100 --reps 1000 --out " + (dir / "x.csv").string()), 2);
    fs::remove_all(dir);
}
