#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cogmesh;
namespace fs = std::filesystem;

namespace {

const std::string kData = COGMESH_TEST_DATA;
const std::string kSnapshots = COGMESH_SNAPSHOTS;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::cli_run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("cogmesh-cli-" + std::string(::testing::UnitTest::GetInstance()
                                                 ->current_test_info()
                                                 ->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

} // namespace

TEST_F(CliTest, RunWritesTraceAndMetrics) {
    const auto out = (dir_ / "a").string();
    const auto r = invoke({"run", "--config", kData + "/pu_traffic.json", "--out", out, "--duration", "4000"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    std::ifstream trace(fs::path(out) / "trace.jsonl");
    const auto t = engine::read_trace(trace);
    EXPECT_EQ(t.seed, 11u);
    EXPECT_EQ(t.duration, 4000);
    const auto metrics = nlohmann::json::parse(slurp(fs::path(out) / "metrics.json"));
    EXPECT_EQ(metrics["schema"], "cogmesh-metrics/1");
    EXPECT_EQ(metrics["negotiations"].get<std::uint64_t>(), engine::compute_metrics(t).negotiations);
    EXPECT_EQ(slurp(fs::path(out) / "metrics.csv"), engine::metrics_csv(engine::compute_metrics(t)));
}

TEST_F(CliTest, RunIsByteIdenticalForTheSameSeed) {
    const auto a = (dir_ / "a").string(), b = (dir_ / "b").string();
    for (const auto& d : {a, b})
        ASSERT_EQ(invoke({"run", "--config", kData + "/learning_two_pu.json", "--seed", "5", "--out", d,
                       "--duration", "5000"})
                      .code,
                  0);
    for (const auto* f : {"trace.jsonl", "metrics.json", "metrics.csv"})
        EXPECT_EQ(slurp(fs::path(a) / f), slurp(fs::path(b) / f)) << f;
    const auto c = (dir_ / "c").string();
    invoke({"run", "--config", kData + "/learning_two_pu.json", "--seed", "6", "--out", c, "--duration", "5000"});
    EXPECT_NE(slurp(fs::path(a) / "trace.jsonl"), slurp(fs::path(c) / "trace.jsonl"));
}

TEST_F(CliTest, KnowledgeDumpLoadsBack) {
    const auto kb = (dir_ / "kb.json").string();
    ASSERT_EQ(invoke({"run", "--config", kData + "/learning_two_pu.json", "--out", (dir_ / "a").string(),
                   "--duration", "5000", "--dump-kb", kb})
                  .code,
              0);
    const auto j = nlohmann::json::parse(slurp(kb));
    EXPECT_EQ(j["schema"], "cogmesh-kb/1");
    EXPECT_EQ(invoke({"run", "--config", kData + "/learning_two_pu.json", "--out", (dir_ / "b").string(),
                   "--duration", "5000", "--load-kb", kb})
                  .code,
              0);
    std::ofstream(dir_ / "bad.json") << "{\"schema\":\"cogmesh-kb/1\"}";
    const auto bad = invoke({"run", "--config", kData + "/learning_two_pu.json", "--out",
                          (dir_ / "c").string(), "--load-kb", (dir_ / "bad.json").string()});
    EXPECT_EQ(bad.code, cli::kExitRuntime);
    EXPECT_NE(bad.err.find("cogmesh: input-error:"), std::string::npos);
}

TEST_F(CliTest, AnalyzePrintsHandSolvedValues) {
    const auto r = invoke({"analyze", "--config", kData + "/markov_c1.json"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "states=3\nblocking=0.666666667\nnoncompletion=0.500000000\n");
}

TEST_F(CliTest, AnalyzeNeedsAMarkovBlock) {
    const auto r = invoke({"analyze", "--config", kData + "/c1_single.json"});
    EXPECT_EQ(r.code, cli::kExitValidation);
    EXPECT_NE(r.err.find("$.markov"), std::string::npos);
}

TEST_F(CliTest, ValidateReportsEveryViolation) {
    EXPECT_EQ(invoke({"validate", "--config", kData + "/pu_traffic.json"}).code, 0);
    const auto r = invoke({"validate", "--config", kData + "/invalid.json"});
    EXPECT_EQ(r.code, cli::kExitValidation);
    EXPECT_GE(std::count(r.err.begin(), r.err.end(), '\n'), 6);
    std::istringstream lines(r.err);
    for (std::string line; std::getline(lines, line);)
        EXPECT_EQ(line.rfind("cogmesh: validation-error: ", 0), 0u) << line;
}

TEST_F(CliTest, MissingFileIsARuntimeError) {
    const auto r = invoke({"validate", "--config", (dir_ / "nope.json").string()});
    EXPECT_EQ(r.code, cli::kExitRuntime);
    EXPECT_NE(r.err.find("cogmesh: io-error:"), std::string::npos);
}

TEST_F(CliTest, MalformedJsonIsAValidationError) {
    std::ofstream(dir_ / "broken.json") << "{\"schema\": 1,";
    EXPECT_EQ(invoke({"validate", "--config", (dir_ / "broken.json").string()}).code,
              cli::kExitValidation);
}

TEST_F(CliTest, L2simEmitsTheDiscoveryMap) {
    const auto r = invoke({"l2sim", "--topology", kData + "/pair.json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["schema"], "cogmesh-l2/1");
    EXPECT_EQ(j["collisions"], 0);
    EXPECT_EQ(j["discovery"]["0"]["1"], nlohmann::json::array({2, 3}));
    EXPECT_EQ(j["discovery"]["1"]["0"], nlohmann::json::array({2, 3}));

    const auto file = (dir_ / "l2.json").string();
    ASSERT_EQ(invoke({"l2sim", "--topology", kData + "/mesh3.json", "--out", file}).code, 0);
    EXPECT_EQ(nlohmann::json::parse(slurp(file))["collisions"], 0);

    const auto asym = invoke({"l2sim", "--topology", kData + "/asymmetric.json"});
    EXPECT_EQ(asym.code, cli::kExitValidation);
    EXPECT_EQ(invoke({"l2sim", "--topology", kData + "/pair.json", "--rounds", "0"}).code,
              cli::kExitValidation);
}

TEST_F(CliTest, CompareLearningReportsPairedMeans) {
    const auto r = invoke({"compare-learning", "--config", kData + "/learning_two_pu.json", "--seeds", "3",
                        "--duration", "10000", "--jobs", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("seeds=3\npairs=3\nmean_failure_on=", 0), 0u) << r.out;
    EXPECT_NE(r.out.find("difference_std_error="), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExit64) {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {},
             {"frobnicate"},
             {"run", "--out", "x"},
             {"analyze", "--config"},
             {"compare-learning", "--config", "x", "--seeds", "0"},
             {"run", "--config", "x", "--out", "y", "--seed", "abc"}}) {
        const auto r = invoke(args);
        EXPECT_EQ(r.code, cli::kExitUsage);
        EXPECT_EQ(r.err.rfind("cogmesh: usage-error: ", 0), 0u) << r.err;
        EXPECT_TRUE(r.out.empty());
    }
}

TEST_F(CliTest, HelpMatchesSnapshots) {
    EXPECT_EQ(invoke({"--help"}).out, slurp(kSnapshots + "/help.txt"));
    for (const std::string c : {"run", "analyze", "l2sim", "compare-learning", "validate"}) {
        const auto r = invoke({c, "--help"});
        EXPECT_EQ(r.code, 0);
        EXPECT_EQ(r.out, slurp(kSnapshots + "/help_" + c + ".txt")) << c;
    }
}
