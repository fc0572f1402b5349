#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "ieo/experiments.hpp"

using namespace ieo;
namespace fs = std::filesystem;

namespace {

struct Command {
    int status;
    std::string output;
};

Command run_cli(const std::string& args) {
    const std::string cmd = std::string(IEO_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return {-1, ""};
    std::string out;
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) out += buf;
    const int raw = pclose(pipe);
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("ieo_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

CaseConfig tiny_config() {
    CaseConfig c;
    apply_preset(c, "desk");
    c.n_trials = 2;
    c.master_seed = 11;
    c.trial.model.hidden_dims = {16};
    c.trial.eto.steps = 4;
    c.trial.eto.continuation_steps = 2;
    c.trial.ieo.steps = 2;
    c.trial.ieo.spg = c.trial.ieo.spg.with_samples(10);
    return c;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
    return files;
}

}  // namespace

TEST(Config, ParsesKeyValueWithComments) {
    std::istringstream in("# comment\ntrials = 3  # inline\n\nseed=42\nhidden = 64, 32\n");
    const auto kv = parse_config_text(in);
    EXPECT_EQ(kv.at("trials"), "3");
    EXPECT_EQ(kv.at("seed"), "42");
    CaseConfig c;
    apply_settings(c, kv);
    EXPECT_EQ(c.n_trials, 3);
    EXPECT_EQ(c.master_seed, 42u);
    EXPECT_EQ(c.trial.model.hidden_dims, (std::vector<int>{64, 32}));
}

TEST(Config, MalformedLineReportsLineNumber) {
    std::istringstream in("trials = 3\n\nthis line has no equals\n");
    try {
        parse_config_text(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    CaseConfig c;
    EXPECT_THROW(apply_settings(c, {{"trails", "3"}}), ConfigError);
    EXPECT_THROW(apply_settings(c, {{"trials", "three"}}), ConfigError);
    EXPECT_THROW(apply_settings(c, {{"windows", "0:125"}}), ConfigError);
    EXPECT_THROW(apply_settings(c, {{"preset", "fast"}}), ConfigError);
    CaseConfig bad;
    apply_settings(bad, {{"c_c", "10"}});
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Config, PresetsAndOverrides) {
    CaseConfig full;
    apply_preset(full, "full");
    EXPECT_EQ(full.n_trials, 100);
    EXPECT_EQ(full.trial.eto.steps, 200);
    EXPECT_EQ(full.trial.eto.continuation_steps, 100);
    EXPECT_EQ(full.trial.ieo.steps, 100);
    EXPECT_EQ(full.trial.ieo.spg.samples(), 1000);
    EXPECT_NO_THROW(full.validate());

    CaseConfig desk;
    apply_settings(desk, {{"preset", "desk"}, {"trials", "5"}});
    EXPECT_EQ(desk.preset, "desk");
    EXPECT_EQ(desk.n_trials, 5);
    EXPECT_EQ(desk.trial.ieo.spg.samples(), 200);

    CaseConfig narrow;
    apply_settings(narrow, {{"window", "10"}, {"sensors", "2,3,4"}});
    EXPECT_EQ(narrow.trial.model.input_dim, 30);
    EXPECT_NO_THROW(narrow.validate());
}

TEST(Experiment, DeterministicFilesAcrossRunsAndThreads) {
    const auto split = cmapss::make_split(cmapss::synthesize_fleet(10, 4), cmapss::Case::base, cmapss::DataConfig{});
    auto c = tiny_config();
    const auto a = scratch("exp_a");
    const auto b = scratch("exp_b");
    run_experiment_on(split, c, a);
    c.threads = 2;
    run_experiment_on(split, c, b);
    const auto fa = snapshot(a);
    const auto fb = snapshot(b);
    EXPECT_EQ(fa, fb);
    for (const char* f : {"summary.json", "trials.csv", "aggregates.csv", "figures/metrics_tidy.csv",
                          "history/0.ndjson", "history/1.ndjson", "checkpoints/1-ieo_quantile.bin"}) {
        EXPECT_TRUE(fa.count(f)) << f;
    }
    EXPECT_EQ(fa.at("summary.json").find("runtime_s"), std::string::npos);
}

TEST(Experiment, FailedTrialIsReportedWithSeed) {
    auto split = cmapss::make_split(cmapss::synthesize_fleet(10, 4), cmapss::Case::base, cmapss::DataConfig{});
    for (auto& s : split.train) s.features[0] = std::numeric_limits<double>::quiet_NaN();
    auto c = tiny_config();
    c.n_trials = 1;
    try {
        run_experiment_on(split, c, {});
        FAIL() << "expected a trial failure";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("trial 0"), std::string::npos) << msg;
        EXPECT_NE(msg.find(std::to_string(trial_seed(11, 0))), std::string::npos) << msg;
    }
}

TEST(Data, CacheIsReusedAndRefreshed) {
    const auto dir = scratch("cache");
    EXPECT_TRUE(ensure_surrogate_data(dir, 12, 3));
    EXPECT_FALSE(ensure_surrogate_data(dir, 12, 3));
    cmapss::DataConfig dc;
    dc.test_engines = 4;
    const auto first = load_split(dir, cmapss::Case::short_term, dc);
    ASSERT_TRUE(fs::exists(cache_path(dir, cmapss::Case::short_term)));
    const auto second = load_split(dir, cmapss::Case::short_term, dc);
    EXPECT_EQ(first.train.size(), second.train.size());
    EXPECT_EQ(first.rule, second.rule);
    dc.window = 20;
    const auto third = load_split(dir, cmapss::Case::short_term, dc);
    EXPECT_EQ(third.train.front().features.size(), 20 * dc.sensor_ids.size());
    EXPECT_THROW(load_split(scratch("empty"), cmapss::Case::base, dc), Error);
}

TEST(Cli, BoundCalculator) {
    const auto r = run_cli("bound --n 1000 --d 10 --K 26 --C1 825 --delta 0.05");
    EXPECT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("844.338282799"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("883.271357805"), std::string::npos) << r.output;
}

TEST(Cli, DefaultLossBoundIsMaximalCost) {
    const auto r = run_cli("bound --n 1000 --d 10 --K 26 --delta 0.05");
    EXPECT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("C1=820"), std::string::npos) << r.output;
}

TEST(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run_cli("bound --bogus 1").status, 2);
    EXPECT_EQ(run_cli("frobnicate").status, 2);
    const auto r = run_cli("bound --n 1000 --d 10 --K 26 --delta 2");
    EXPECT_EQ(r.status, 1) << r.output;
}
