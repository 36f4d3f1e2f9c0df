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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dialeval/crs.hpp"
#include "dialeval/sampling.hpp"
#include "dialeval/submetrics.hpp"

namespace dialeval {

struct BuiltinScorerConfig {
  std::filesystem::path lm_corpus;  // one sentence per line
  int ngram_order = 3;
  double alpha = 0.1;
  std::optional<double> kappa;  // median corpus perplexity when unset
  std::filesystem::path embeddings;
};

struct TrainingDataConfig {
  std::filesystem::path dialogues;  // dataset JSONL
  std::optional<std::filesystem::path> response_pool;  // one response per line
  std::optional<std::filesystem::path> engagement;  // JSONL {"text", "score"}
  std::optional<std::filesystem::path> stopwords;
  double stopword_delete_prob = 0.5;
  double word_drop_fraction = 0.25;
  std::size_t candidate_pool_size = 10;
  std::size_t repeat_span_max = 3;
  int middle_offset = 0;
};

// Every relative path is resolved against the directory of the config file.
struct PipelineConfig {
  std::vector<std::filesystem::path> dev_datasets;
  std::vector<std::filesystem::path> test_datasets;
  ScorerBindings scorers;
  std::map<std::string, std::vector<std::filesystem::path>> external_scores;  // by dataset_id
  std::optional<BuiltinScorerConfig> builtin;
  PowerPolicy power_policy;
  std::size_t sample_n = kDefaultSampleSize;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  bool per_dataset_average = false;
  std::optional<TrainingDataConfig> training_data;
};

// Throws ConfigError.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// Runs one subcommand. `args` excludes the program name. Returns 0 on
// success, 1 on a pipeline failure and 2 on a usage or config error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dialeval
