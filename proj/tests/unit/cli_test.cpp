#include <gtest/gtest.h>

#include <sstream>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/netflow_data.hpp"

using namespace nidsllm;
using namespace nidsllm::testing;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

std::vector<json> read_jsonl(const fs::path& p) {
    std::vector<json> out;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        data = dir / "flows.csv";
        write_file(data, synthetic_csv({.rows = 400, .overlap = 0.05, .seed = 3}));
    }

    std::vector<std::string> with_data(std::vector<std::string> args, const std::string& out) {
        args.insert(args.end(), {"--set", "dataset.path=" + data.string(), "--out",
                                 (dir / out).string(), "--seed", "7"});
        return args;
    }

    TempDir dir;
    fs::path data;
};

}  // namespace

TEST(CliConfig, ParseAndDigest) {
    auto c = cli::RunConfig::defaults();
    c.merge(cli::RunConfig::parse("[split]\ntest_fraction = 0.2\n[backend]\ntranscript = t.jsonl\n",
                                  "/base", "inline"));
    EXPECT_DOUBLE_EQ(c.real("split", "test_fraction"), 0.2);
    EXPECT_EQ(c.str("backend", "transcript"), "/base/t.jsonl");

    auto moved = c;
    moved.set("run.out=/elsewhere");
    EXPECT_EQ(c.digest(), moved.digest());
    auto changed = c;
    changed.set("split.test_fraction=0.3");
    EXPECT_NE(c.digest(), changed.digest());
}

TEST(CliConfig, RejectsUnknownAndMalformed) {
    EXPECT_THROW(cli::RunConfig::parse("[split]\ntest_frac = 0.2\n", "/", "x"), ConfigError);
    EXPECT_THROW(cli::RunConfig::parse("[nothing]\n", "/", "x"), ConfigError);
    EXPECT_THROW(cli::RunConfig::parse("key = 1\n", "/", "x"), ConfigError);
    EXPECT_THROW(cli::RunConfig::parse("[split]\nno equals\n", "/", "x"), ConfigError);
    auto c = cli::RunConfig::defaults();
    EXPECT_THROW(c.set("split.bogus=1"), ConfigError);
    EXPECT_THROW(c.set("nodot=1"), ConfigError);
    c.set("split.test_fraction=abc");
    EXPECT_THROW(c.real("split", "test_fraction"), ConfigError);
}

TEST(CliConfig, SeedsDeriveFromRunSeed) {
    auto a = cli::RunConfig::defaults();
    a.set("run.seed=5");
    auto b = a;
    EXPECT_EQ(a.resolve_seeds(), b.resolve_seeds());
    auto c = cli::RunConfig::defaults();
    c.set("run.seed=5");
    c.set("split.seed=99");
    const auto seeds = c.resolve_seeds();
    EXPECT_EQ(seeds.at("split.seed"), 99u);
    EXPECT_EQ(seeds.at("dataset.seed"), a.resolve_seeds().at("dataset.seed"));
}

TEST(CliUsage, VersionAndErrors) {
    auto r = invoke({"--version"});
    EXPECT_EQ(r.code, 0);
    EXPECT_FALSE(r.out.empty());
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"frobnicate"}).code, 2);
    EXPECT_EQ(invoke({"split", "--set", "split.nope=1"}).code, 2);
}

TEST_F(CliTest, SplitWritesManifests) {
    auto r = invoke(with_data({"split"}, "s1"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto train = load_dataset(dir / "s1/train.csv", builtin_schema(kUnswNb15V2));
    const auto test = load_dataset(dir / "s1/test.csv", builtin_schema(kUnswNb15V2));
    EXPECT_EQ(train.size() + test.size(), 400u);
    EXPECT_EQ(test.size(), 20u);

    const auto m = read_json(dir / "s1/split_manifest.json");
    EXPECT_EQ(m["train_rows"].size(), train.size());
    EXPECT_EQ(m["test_rows"].size(), test.size());
    EXPECT_EQ(m["seeds"]["run.seed"], 7);

    const auto run = read_json(dir / "s1/run_manifest.json");
    EXPECT_EQ(run["command"], "split");
    EXPECT_EQ(run["config_digest"], m["config_digest"]);
    EXPECT_TRUE(fs::exists(dir / "s1/run.conf"));

    r = invoke(with_data({"split"}, "s2"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(dir / "s1/test.csv"), read_file(dir / "s2/test.csv"));
    EXPECT_EQ(read_file(dir / "s1/split_manifest.json"), read_file(dir / "s2/split_manifest.json"));
}

TEST_F(CliTest, MissingInputFails) {
    auto r = invoke({"split", "--set", "dataset.path=/nonexistent.csv", "--out", (dir / "x").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
    EXPECT_NE(invoke({"split", "--out", (dir / "y").string()}).code, 0);
}

TEST_F(CliTest, ConfigFileAndOverrides) {
    write_file(dir / "run.conf", "[dataset]\npath = flows.csv\n[split]\ntest_fraction = 0.25\n");
    auto r = invoke({"split", "-c", (dir / "run.conf").string(), "--seed", "1", "--out",
                  (dir / "c").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json(dir / "c/split_manifest.json")["test_rows"].size(), 100u);
}

TEST_F(CliTest, ClassifyLabelEchoIsPerfect) {
    auto r = invoke(with_data({"classify", "--set", "backend.mock_rule=label-echo"}, "cls"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = read_json(dir / "cls/metrics.json");
    EXPECT_DOUBLE_EQ(m["macro_precision"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(m["macro_recall"].get<double>(), 1.0);
    EXPECT_EQ(read_jsonl(dir / "cls/predictions.jsonl").size(), 20u);
    EXPECT_FALSE(m["config_digest"].get<std::string>().empty());
}

TEST_F(CliTest, ClassifyRecordThenReplayIsIdentical) {
    const auto transcript = (dir / "t.jsonl").string();
    auto r = invoke(with_data({"classify", "--set", "backend.mock_rule=hash-random", "--set",
                            "backend.record_transcript=" + transcript},
                           "rec"));
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto* name : {"rp1", "rp2"}) {
        r = invoke(with_data({"classify", "--set", "backend.kind=replay", "--set",
                           "backend.transcript=" + transcript},
                          name));
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(read_file(dir / "rp1/metrics.json"), read_file(dir / "rp2/metrics.json"));
    EXPECT_EQ(read_file(dir / "rp1/predictions.jsonl"), read_file(dir / "rec/predictions.jsonl"));
    const auto a = read_json(dir / "rec/metrics.json");
    const auto b = read_json(dir / "rp1/metrics.json");
    EXPECT_EQ(a["confusion"], b["confusion"]);
}

TEST_F(CliTest, ClassifyCrossValidation) {
    auto r = invoke(with_data({"classify", "--set", "backend.mock_rule=label-echo", "--set",
                            "classify.cv_folds=4"},
                           "cv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = read_json(dir / "cv/metrics.json");
    EXPECT_EQ(m["folds"].size(), 4u);
    EXPECT_EQ(read_jsonl(dir / "cv/predictions.jsonl").size(), 400u);
}

TEST_F(CliTest, FinetuneExportIsReproducible) {
    for (const auto* method : {"orpo", "kto"}) {
        for (const auto* out : {"f1", "f2"}) {
            auto r = invoke(with_data({"finetune-export", "--set", std::string("finetune.method=") + method,
                                    "--set", "finetune.budgets=50,101"},
                                   std::string(out) + method));
            ASSERT_EQ(r.code, 0) << r.err;
        }
        for (const auto* budget : {"50", "101"}) {
            const auto name = std::string(method) + "-" + budget + ".jsonl";
            const auto a = read_file(dir / (std::string("f1") + method) / name);
            EXPECT_EQ(a, read_file(dir / (std::string("f2") + method) / name)) << name;
            EXPECT_EQ(read_jsonl(dir / (std::string("f1") + method) / name).size(),
                      std::stoul(budget));
        }
        const auto audit = read_json(dir / (std::string("f1") + method) / "corpus_audit.json");
        for (const auto& a : audit["audits"]) EXPECT_TRUE(a["ok"].get<bool>());
    }
}

TEST_F(CliTest, TrainBaselineAndBench) {
    auto r = invoke(with_data({"train-baseline", "--set", "baseline.kind=dt"}, "dt"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto summary = read_json(dir / "dt/baseline.json");
    EXPECT_EQ(summary["kind"], "dt");
    EXPECT_GT(summary["node_count"].get<std::size_t>(), 1u);
    EXPECT_GT(summary["test_weighted_f1"].get<double>(), 0.8);

    r = invoke(with_data({"train-baseline", "--set", "baseline.kind=rf", "--set", "baseline.n_trees=5"},
                      "rf"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json(dir / "rf/baseline.json")["n_trees"], 5);

    r = invoke(with_data({"bench", "--set", "bench.subjects=dt,rf,mock-llm", "--set",
                       "bench.dt_model=" + (dir / "dt/model.json").string(), "--set",
                       "bench.rf_model=" + (dir / "rf/model.json").string(), "--set",
                       "bench.mock_delay_us=100", "--set", "bench.runs=3"},
                      "bench"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lat = read_json(dir / "bench/latency.json");
    ASSERT_EQ(lat["reports"].size(), 3u);
    for (const auto& rep : lat["reports"]) {
        EXPECT_EQ(rep["runs"], 3);
        EXPECT_EQ(rep["samples_us"].size(), 3u);
    }

    r = invoke({"report", (dir / "dt/metrics.json").string(), (dir / "bench/latency.json").string(),
             "--out", (dir / "rep").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(r.out.empty());
    EXPECT_EQ(read_file(dir / "rep/report.txt"), r.out);
}

TEST_F(CliTest, BenchWithoutModelIsConfigError) {
    auto r = invoke(with_data({"bench", "--set", "bench.subjects=dt"}, "b"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("dt_model"), std::string::npos);
}

TEST_F(CliTest, ExplainWithFixedExplanations) {
    auto r = invoke(with_data({"classify", "--set", "backend.mock_rule=label-invert"}, "pred"));
    ASSERT_EQ(r.code, 0) << r.err;
    write_file(dir / "dns.txt", dns_explanation());
    r = invoke(with_data({"explain", "--set", "explain.predictions=" + (dir / "pred/predictions.jsonl").string(),
                       "--set", "backend.mock_rule=file:" + (dir / "dns.txt").string()},
                      "exp"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = read_json(dir / "exp/explanations.json");
    // Inverted verdicts leave only FP and FN rows.
    EXPECT_EQ(j["cells"]["FP"]["samples"].size(), 1u);
    EXPECT_EQ(j["cells"]["FN"]["samples"].size(), 1u);
    EXPECT_TRUE(j["cells"]["TP"]["samples"].empty());
    EXPECT_GT(j["overall"]["claims"].get<std::size_t>(), 0u);
    EXPECT_NE(read_file(dir / "exp/explanations.txt").find("no samples"), std::string::npos);

    r = invoke({"report", (dir / "exp/explanations.json").string()});
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, ReportRejectsUnknownJson) {
    write_file(dir / "junk.json", "{\"hello\": 1}");
    EXPECT_NE(invoke({"report", (dir / "junk.json").string()}).code, 0);
}
