#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"

using namespace gchmm;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "gchmm");
    std::vector<char *> argv;
    for (auto &a : args)
        argv.push_back(a.data());
    return cli::cli_main(int(argv.size()), argv.data());
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("gchmm_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string &name) const { return (dir_ / name).string(); }

    int simulate(const std::string &out, std::vector<std::string> extra = {}) {
        std::vector<std::string> a{"simulate", "--out", path(out), "--nodes", "15", "--days", "12", "--symptoms", "3"};
        a.insert(a.end(), extra.begin(), extra.end());
        return run(a);
    }

    void expect_same_files(const std::string &a, const std::string &b) {
        std::size_t files = 0;
        for (const auto &e : fs::directory_iterator(dir_ / a)) {
            ++files;
            EXPECT_EQ(slurp(e.path()), slurp(dir_ / b / e.path().filename())) << e.path().filename();
        }
        EXPECT_GT(files, 0u);
    }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, SimulateIsDeterministic) {
    ASSERT_EQ(simulate("a", {"--seed", "7"}), 0);
    ASSERT_EQ(simulate("b", {"--seed", "7"}), 0);
    ASSERT_EQ(simulate("c", {"--seed", "8"}), 0);
    expect_same_files("a", "b");
    EXPECT_NE(slurp(dir_ / "a" / "Y.csv"), slurp(dir_ / "c" / "Y.csv"));
    for (const char *f : {"contacts.csv", "covariates.csv", "covariates_raw.csv", "X.csv", "Y.csv", "id_map.csv",
                          "params.json", "eta_true.json"})
        EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
}

TEST_F(CliTest, RoundTripEmitsEveryFile) {
    ASSERT_EQ(simulate("s", {"--seed", "3", "--p-miss", "0.2"}), 0);
    const auto s = path("s");
    const std::vector<std::string> data{"--contacts", s + "/contacts.csv", "--symptoms", s + "/Y.csv",
                                        "--id-map", s + "/id_map.csv", "--days", "12"};
    auto infer = [&](std::vector<std::string> a, const std::string &out) {
        a.insert(a.begin(), "infer");
        a.insert(a.end(), data.begin(), data.end());
        a.insert(a.end(), {"--out", path(out), "--seed", "5"});
        return run(a);
    };
    ASSERT_EQ(infer({"--method", "gbw", "--em-iters", "3"}, "gbw"), 0);
    ASSERT_EQ(infer({"--method", "gibbs", "--samples", "30"}, "gibbs"), 0);
    ASSERT_EQ(infer({"--method", "bgem", "--covariates", s + "/covariates.csv", "--samples", "10", "--em-iters", "2"},
                    "bgem"),
              0);
    for (const char *d : {"gbw", "gibbs", "bgem"})
        for (const char *f : {"posterior.csv", "heatmap.csv", "states.csv", "params.json"})
            EXPECT_TRUE(fs::exists(dir_ / d / f)) << d << '/' << f;
    EXPECT_TRUE(fs::exists(dir_ / "gbw" / "diagnostics.json"));
    EXPECT_TRUE(fs::exists(dir_ / "gibbs" / "trace.jsonl"));
    EXPECT_TRUE(fs::exists(dir_ / "bgem" / "eta.json"));
    EXPECT_TRUE(fs::exists(dir_ / "bgem" / "diagnostics.json"));

    ASSERT_EQ(run({"evaluate", "--truth-states", s + "/X.csv", "--posterior", path("gibbs/posterior.csv"),
                   "--truth-params", s + "/params.json", "--params", path("gibbs/params.json"), "--symptoms",
                   s + "/Y.csv", "--contacts", s + "/contacts.csv", "--out", path("metrics.json")}),
              0);
    const auto m = io::json::parse(slurp(dir_ / "metrics.json"));
    for (const char *k : {"accuracy", "recall", "norm_gamma", "norm_alpha", "norm_beta", "y_onestep_accuracy"})
        EXPECT_TRUE(m.contains(k)) << k;
    EXPECT_GE(m["accuracy"].get<double>(), 0.0);
    EXPECT_LE(m["accuracy"].get<double>(), 1.0);

    ASSERT_EQ(run({"predict", "--contacts", s + "/contacts.csv", "--symptoms", s + "/Y.csv", "--params",
                   s + "/params.json", "--id-map", s + "/id_map.csv", "--days", "12", "--out", path("pred.csv")}),
              0);
    std::istringstream pred(slurp(dir_ / "pred.csv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(pred, line))
        ++rows;
    EXPECT_EQ(rows, 1u + 15u * 12u * 3u);
}

TEST_F(CliTest, KnownParamsGbwEqualsForwardBackward) {
    ASSERT_EQ(simulate("s", {"--seed", "4"}), 0);
    const auto s = path("s");
    ASSERT_EQ(run({"infer", "--method", "gbw", "--known-params", s + "/params.json", "--contacts", s + "/contacts.csv",
                   "--symptoms", s + "/Y.csv", "--id-map", s + "/id_map.csv", "--days", "12", "--out", path("o")}),
              0);
    const auto people = cli::resolve_people(s + "/id_map.csv", "", "");
    const auto g = load_network(s + "/contacts.csv", people, 12, 10.0);
    const auto params = io::load_params(s + "/params.json");
    const auto y = load_symptoms(s + "/Y.csv", people, 12, params.num_symptoms());
    FactorGraph fg(g, y, params);
    const auto p = posterior_vector(run_forward_backward(fg));
    std::ostringstream expect;
    io::write_posterior(expect, p, people.size(), 12, people);
    EXPECT_EQ(slurp(dir_ / "o" / "posterior.csv"), expect.str());
}

TEST_F(CliTest, InferAndPredictAreDeterministic) {
    ASSERT_EQ(simulate("s", {"--seed", "6"}), 0);
    const auto s = path("s");
    for (const char *out : {"r1", "r2"}) {
        ASSERT_EQ(run({"infer", "--method", "bgem", "--link", "beta-exp", "--covariates", s + "/covariates.csv",
                       "--contacts", s + "/contacts.csv", "--symptoms", s + "/Y.csv", "--samples", "10", "--em-iters",
                       "2", "--seed", "9", "--out", path(out)}),
                  0);
    }
    expect_same_files("r1", "r2");
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run({"simulate", "--out", path("x"), "--no-such-flag"}), 2);
    EXPECT_EQ(run({}), 2);
    EXPECT_EQ(run({"infer", "--method", "gbw", "--contacts", path("missing.csv"), "--symptoms", path("missing.csv"),
                   "--days", "3", "--out", path("o")}),
              2);
    EXPECT_EQ(simulate("bad", {"--p-miss", "1.5"}), 2);

    // Every symptom certain in both states makes any unreported symptom impossible.
    ASSERT_EQ(simulate("s", {"--seed", "2"}), 0);
    const auto s = path("s");
    auto p = io::load_params(s + "/params.json");
    for (auto &row : p.theta)
        std::fill(row.begin(), row.end(), 1.0);
    io::write_json(path("impossible.json"), io::params_json(p));
    EXPECT_EQ(run({"infer", "--method", "gbw", "--known-params", path("impossible.json"), "--contacts",
                   s + "/contacts.csv", "--symptoms", s + "/Y.csv", "--id-map", s + "/id_map.csv", "--days", "12",
                   "--out", path("o")}),
              3);
}

TEST_F(CliTest, CommandLineBeatsConfigBeatsDefault) {
    {
        std::ofstream cfg(path("cfg.json"));
        cfg << R"({"seed": 11, "nodes": 15, "days": 12, "symptoms": 3, "p-miss": 0.1})";
    }
    ASSERT_EQ(run({"simulate", "--config", path("cfg.json"), "--out", path("from_config")}), 0);
    ASSERT_EQ(simulate("flags", {"--seed", "11", "--p-miss", "0.1"}), 0);
    expect_same_files("from_config", "flags");

    ASSERT_EQ(run({"simulate", "--config", path("cfg.json"), "--seed", "12", "--out", path("override")}), 0);
    ASSERT_EQ(simulate("flags12", {"--seed", "12", "--p-miss", "0.1"}), 0);
    expect_same_files("override", "flags12");

    ASSERT_EQ(setenv("GCHMM_SEED", "11", 1), 0);
    const int rc = simulate("env", {"--p-miss", "0.1"});
    unsetenv("GCHMM_SEED");
    ASSERT_EQ(rc, 0);
    expect_same_files("env", "flags");
}
