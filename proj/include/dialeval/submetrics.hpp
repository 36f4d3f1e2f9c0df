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

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dialeval/corpus.hpp"
#include "dialeval/embedding.hpp"
#include "dialeval/ngram.hpp"
#include "dialeval/submetric.hpp"

namespace dialeval {

struct SpecificityScores {
  double log_likelihood;  // SM_LL: sum of token log-probabilities
  double neg_cross_entropy;  // SM_NCE: mean token log-probability
  double perplexity;  // SM_PPL: exp(-SM_NCE)
};

// Throws std::invalid_argument on empty input or a positive log-probability.
SpecificityScores specificity_scores(std::span<const double> logprobs);

// 1 / (1 + PPL / kappa). Equals 0.5 when the response perplexity is kappa.
double fluency_score(const NgramModel& model, std::span<const std::string> response, double kappa);

// (cos + 1) / 2 between the mean-pooled context and response embeddings.
// 0.5 when either side has no in-vocabulary token.
double relevance_score(const EmbeddingTable& embeddings, std::span<const Tokens> context,
                       std::span<const std::string> response);

// Raw sub-metric scores for one dataset, stored column-wise in dialogue order.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::string dataset_id, std::vector<std::string> dialogue_ids);

  const std::string& dataset_id() const { return dataset_id_; }
  const std::vector<std::string>& dialogue_ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  std::optional<std::size_t> row_of(std::string_view dialogue_id) const;

  // Throws DataError when the value is outside the sub-metric's range or the
  // dialogue is unknown.
  void set(std::size_t row, SubMetric m, double value);
  void set(std::string_view dialogue_id, SubMetric m, double value);

  std::optional<double> get(std::size_t row, SubMetric m) const;
  // Throws PipelineError when missing.
  double at(std::size_t row, SubMetric m) const;

  // Every dialogue has a value for `m`.
  bool has(SubMetric m) const;
  bool complete() const;
  std::size_t entry_count() const;
  std::vector<std::pair<std::string, SubMetric>> missing(std::span<const SubMetric> required) const;

  // Throws PipelineError when the column is incomplete.
  std::vector<double> column(SubMetric m) const;

  bool operator==(const ScoreMatrix&) const;

 private:
  std::string dataset_id_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  // NaN marks a missing entry; no sub-metric range admits NaN.
  std::array<std::vector<double>, kNumSubMetrics> columns_;
};

using ScoreKey = std::pair<std::string, SubMetric>;

struct ExternalScores {
  std::map<ScoreKey, double> scores;
  std::vector<ScoreKey> missing;  // expected but absent
  std::vector<ScoreKey> extra;  // present but not expected
};

// Reads `{"dialogue_id", "metric", "score"}` JSONL. The expected set is the
// product of `dialogue_ids` and `metrics`. Throws DataError on malformed
// lines, duplicate entries and out-of-range scores.
ExternalScores load_external_scores(const std::filesystem::path& path,
                                    std::span<const std::string> dialogue_ids,
                                    std::span<const SubMetric> metrics);
ExternalScores parse_external_scores(std::string_view jsonl, std::span<const std::string> dialogue_ids,
                                     std::span<const SubMetric> metrics,
                                     std::string_view source = "<memory>");

enum class ScoreSource { unbound, builtin, external };

struct ScorerBindings {
  std::array<ScoreSource, kNumSubMetrics> sources{};

  ScoreSource& operator[](SubMetric m) { return sources[index_of(m)]; }
  ScoreSource operator[](SubMetric m) const { return sources[index_of(m)]; }

  std::vector<SubMetric> bound() const;
  std::vector<SubMetric> with(ScoreSource s) const;
};

struct BuiltinResources {
  const NgramModel* language_model = nullptr;
  double kappa = 1.0;
  const EmbeddingTable* embeddings = nullptr;
};

// Builds the matrix over every bound sub-metric. Built-in scorers exist for
// FM, RM and the specificity triple; TCM and EM must come from files.
// Throws ConfigError for unresolvable bindings and PipelineError when the
// external files leave gaps.
ScoreMatrix score_dataset(const AnnotatedDataset& ds, const ScorerBindings& bindings,
                          const BuiltinResources& resources,
                          std::span<const std::filesystem::path> external_files = {});

// CSV `dialogue_id,FM,RM,TCM,EM,SM_LL,SM_NCE,SM_PPL`; missing cells are empty.
std::string write_score_csv(const ScoreMatrix& scores);
ScoreMatrix read_score_csv(std::string_view csv, std::string dataset_id,
                           std::string_view source = "<memory>");

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace dialeval
