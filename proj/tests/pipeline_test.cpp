/*
 * Copyright 2026 The dialeval Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dialeval/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dialeval/error.hpp"
#include "dialeval/stats.hpp"
#include "json.hpp"
#include "testing/synthetic.hpp"

namespace dialeval {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "dialeval_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = testing::write_cli_fixture(dir_, 7).string();
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  // Config variant written next to the fixture so relative paths still resolve.
  static std::string variant(const std::string& name, const std::function<void(json&)>& edit) {
    auto doc = json::parse(testing::read_file(config_));
    edit(doc);
    const auto path = dir_ / name;
    std::ofstream(path) << doc.dump(2);
    return path.string();
  }

  static std::string out_dir(const std::string& name) { return (dir_ / name).string(); }

  static inline fs::path dir_;
  static inline std::string config_;
};

TEST_F(CliTest, FitWeightsWritesTable) {
  const auto out = out_dir("fit");
  const auto r = run({"--config", config_, "--out", out, "fit-weights"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = weight_table_from_json(testing::read_file(fs::path(out) / "weights.json"));
  EXPECT_EQ(table.weights.size(), 3u);
  EXPECT_EQ(table.support.at("coherence"), 3u);
  EXPECT_EQ(table.support.at("engagement"), 2u);
  // Human coherence is driven by topic coherence in the fixture.
  const auto& w = table.weights.at("coherence");
  EXPECT_EQ(std::max_element(w.begin(), w.end()) - w.begin(),
            static_cast<std::ptrdiff_t>(index_of(SubMetric::TCM)));
}

TEST_F(CliTest, EndToEndIsDeterministic) {
  const auto a = out_dir("det_a");
  const auto b = out_dir("det_b");
  for (const auto& out : {a, b}) {
    ASSERT_EQ(run({"--config", config_, "--out", out, "score"}).code, 0);
    ASSERT_EQ(run({"--config", config_, "--out", out, "fit-weights"}).code, 0);
    ASSERT_EQ(run({"--config", config_, "--out", out, "compose", "--quality", "overall"}).code, 0);
    const auto e = run({"--config", config_, "--out", out, "evaluate"});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_NE(e.out.find("MME-CRS"), std::string::npos);
    EXPECT_NE(e.out.find("MME-Avg"), std::string::npos);
  }
  for (const auto* file : {"weights.json", "scores/test_x.csv", "composed/test_x.csv"}) {
    EXPECT_EQ(testing::read_file(fs::path(a) / file), testing::read_file(fs::path(b) / file)) << file;
  }
  auto ra = json::parse(testing::read_file(fs::path(a) / "report.json"));
  auto rb = json::parse(testing::read_file(fs::path(b) / "report.json"));
  ra.erase("generated_at");
  rb.erase("generated_at");
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(ra["reports"].size(), 2u);
}

TEST_F(CliTest, SeedChangesSample) {
  const auto a = out_dir("seed_a");
  const auto b = out_dir("seed_b");
  ASSERT_EQ(run({"--config", config_, "--out", a, "fit-weights"}).code, 0);
  ASSERT_EQ(run({"--config", config_, "--out", b, "--seed", "99", "fit-weights"}).code, 0);
  EXPECT_NE(testing::read_file(fs::path(a) / "weights.json"), testing::read_file(fs::path(b) / "weights.json"));
}

TEST_F(CliTest, ComposeNeedsQuality) {
  const auto out = out_dir("compose_usage");
  ASSERT_EQ(run({"--config", config_, "--out", out, "fit-weights"}).code, 0);
  EXPECT_EQ(run({"--config", config_, "--out", out, "compose"}).code, 2);
  EXPECT_EQ(run({"--config", config_, "--out", out, "compose", "--quality", "overall",
                 "--uniform-quality-average"}).code,
            2);
  EXPECT_EQ(run({"--config", config_, "--out", out, "compose", "--uniform-quality-average"}).code, 0);
  EXPECT_EQ(run({"--config", config_, "--out", out, "compose", "--quality", "nonexistent"}).code, 1);
}

TEST_F(CliTest, UnannotatedTestDatasetFails) {
  std::string stripped;
  std::istringstream lines(testing::read_file(dir_ / "test_x.jsonl"));
  for (std::string line; std::getline(lines, line);) {
    auto rec = json::parse(line);
    rec.erase("annotations");
    stripped += rec.dump() + "\n";
  }
  std::ofstream(dir_ / "test_bare.jsonl") << stripped;
  const auto cfg = variant("bare.json", [](json& c) { c["test_datasets"] = {"test_bare.jsonl"}; });
  const auto out = out_dir("bare");
  ASSERT_EQ(run({"--config", cfg, "--out", out, "fit-weights"}).code, 0);
  const auto r = run({"--config", cfg, "--out", out, "evaluate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("test_x"), std::string::npos);
  // Composing needs no annotations.
  EXPECT_EQ(run({"--config", cfg, "--out", out, "compose", "--quality", "overall"}).code, 0);
}

TEST_F(CliTest, ConfigAndUsageErrors) {
  EXPECT_EQ(run({"fit-weights"}).code, 2);
  EXPECT_EQ(run({"--config", config_}).code, 2);
  EXPECT_EQ(run({"--config", config_, "bogus"}).code, 2);
  EXPECT_EQ(run({"--config", (dir_ / "missing.json").string(), "fit-weights"}).code, 2);
  const auto unbound = variant("unbound.json", [](json& c) { c["scorers"].erase("EM"); });
  EXPECT_EQ(run({"--config", unbound, "--out", out_dir("unbound"), "score"}).code, 2);
  const auto bad_policy = variant("policy.json", [](json& c) { c["power_policy"]["mode"] = "sometimes"; });
  EXPECT_EQ(run({"--config", bad_policy, "fit-weights"}).code, 2);
  const auto builtin_tcm = variant("tcm.json", [](json& c) { c["scorers"]["TCM"] = "builtin"; });
  EXPECT_EQ(run({"--config", builtin_tcm, "--out", out_dir("tcm"), "score"}).code, 2);
  EXPECT_EQ(run({"--config", config_, "fit-weights", "--power", "0"}).code, 2);
}

TEST_F(CliTest, MissingExternalScoresNamed) {
  std::ofstream(dir_ / "short_external.jsonl") << R"({"dialogue_id": "dev_a_0", "metric": "TCM", "score": 0.5})"
                                               << "\n";
  const auto cfg = variant("short.json", [](json& c) { c["external_scores"]["dev_a"] = "short_external.jsonl"; });
  const auto r = run({"--config", cfg, "--out", out_dir("short"), "fit-weights"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dev_a"), std::string::npos);
}

TEST_F(CliTest, AblateWritesEveryVariant) {
  const auto out = out_dir("ablate");
  ASSERT_EQ(run({"--config", config_, "--out", out, "fit-weights"}).code, 0);
  const auto r = run({"--config", config_, "--out", out, "ablate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(testing::read_file(fs::path(out) / "ablation.json"));
  EXPECT_EQ(doc["reports"].size(), 7u);
  EXPECT_EQ(doc["reports"][6]["method"], "w/o relevance+topic_coherence");
  const auto one = run({"--config", config_, "--out", out, "ablate", "--drop", "specificity", "--drop",
                        "fluency,relevance", "--no-renormalize"});
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_EQ(json::parse(testing::read_file(fs::path(out) / "ablation.json"))["reports"].size(), 3u);
  EXPECT_EQ(run({"--config", config_, "--out", out, "ablate", "--drop", "nonsense"}).code, 2);
}

TEST_F(CliTest, FixedPowerOverridesPolicy) {
  const auto out = out_dir("power");
  ASSERT_EQ(run({"--config", config_, "--out", out, "fit-weights", "--power", "3"}).code, 0);
  const auto table = weight_table_from_json(testing::read_file(fs::path(out) / "weights.json"));
  EXPECT_EQ(table.policy.mode, PowerMode::fixed);
  for (const auto& [quality, per_ds] : table.d_used) {
    for (const auto& [ds, d] : per_ds) EXPECT_EQ(d, 3) << quality << " " << ds;
  }
}

TEST_F(CliTest, BuildTrainingData) {
  const auto a = out_dir("train_a");
  const auto b = out_dir("train_b");
  const auto r = run({"--config", config_, "--out", a, "build-training-data"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(run({"--config", config_, "--out", b, "build-training-data"}).code, 0);
  for (const auto* file : {"fluency.jsonl", "relevance.jsonl", "engagement.jsonl"}) {
    const auto text = testing::read_file(fs::path(a) / file);
    EXPECT_FALSE(text.empty()) << file;
    EXPECT_EQ(text, testing::read_file(fs::path(b) / file)) << file;
  }
  std::istringstream lines(testing::read_file(fs::path(a) / "engagement.jsonl"));
  for (std::string line; std::getline(lines, line);) {
    const double label = json::parse(line)["label"].get<double>();
    EXPECT_GE(label, 0.0);
    EXPECT_LE(label, 1.0);
  }
}

TEST(ParseConfig, ResolvesRelativePaths) {
  const auto cfg = parse_config(R"({
    "dev_datasets": ["a.jsonl"],
    "test_datasets": ["/abs/b.jsonl"],
    "scorers": {"FM": "external", "RM": "external", "TCM": "external", "EM": "external",
                "SM_LL": "external", "SM_NCE": "external", "SM_PPL": "external"},
    "power_policy": {"mode": "fixed", "d": 2},
    "seed": 5
  })",
                                "/base");
  EXPECT_EQ(cfg.dev_datasets.at(0), fs::path("/base/a.jsonl"));
  EXPECT_EQ(cfg.test_datasets.at(0), fs::path("/abs/b.jsonl"));
  EXPECT_EQ(cfg.power_policy.mode, PowerMode::fixed);
  EXPECT_EQ(cfg.power_policy.fixed_d, 2);
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_EQ(cfg.out_dir, fs::path("/base/out"));
  EXPECT_THROW(parse_config("[", "/"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dev_datasets": "x"})", "/"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scorers": {"FM": "maybe"}})", "/"), ConfigError);
}

TEST(SinglePositiveCorrelation, ComposedRankingIsTheSubMetric) {
  testing::SyntheticSpec spec;
  spec.dataset_id = "one";
  spec.dialogues = 300;
  spec.designated = {{"relevance", SubMetric::RM}};
  const auto syn = testing::make_synthetic(spec);
  MetricVector raw{};
  raw.fill(-0.2);
  raw[index_of(SubMetric::RM)] = 0.4;
  const auto q = weights_from_correlations(raw, PowerPolicy{});
  const auto composed = compose(syn.scores, q.weights, "relevance");
  const auto column = syn.scores.column(SubMetric::RM);
  const double rho = spearman(composed.scores, column).rho;
  EXPECT_NEAR(rho, 1.0, 1e-12);
}

}  // namespace
}  // namespace dialeval
