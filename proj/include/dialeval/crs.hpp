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

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialeval/corpus.hpp"
#include "dialeval/submetric.hpp"
#include "dialeval/submetrics.hpp"

namespace dialeval {

enum class PowerMode { fixed, automatic };

// How the exponent d applied to the clipped correlations is chosen.
struct PowerPolicy {
  PowerMode mode = PowerMode::automatic;
  int fixed_d = 1;
  int d_max = 6;
  double target_low = 1.0 / 3.0;
  double target_high = 0.5;

  static PowerPolicy fixed(int d) { return {PowerMode::fixed, d, std::max(6, d), 1.0 / 3.0, 0.5}; }

  // Throws std::invalid_argument.
  void validate() const;
  bool operator==(const PowerPolicy&) const = default;
};

inline constexpr std::size_t kDefaultSampleSize = 300;

// S^d / sum(S^d). Requires a positive entry and no negative ones.
MetricVector power_weights(const MetricVector& clipped, int d);

// fixed: policy.fixed_d. automatic: the smallest d in [1, d_max] whose
// largest weight falls inside [target_low, target_high]; failing that, the
// d whose largest weight is closest to the interval midpoint (smaller d on
// ties). Throws std::invalid_argument when every entry is zero.
int select_power(const MetricVector& clipped, const PowerPolicy& policy);

struct QualityWeights {
  MetricVector weights{};
  int d_used = 0;  // 0 when the uniform fallback was taken
  MetricVector raw_correlations{};
  MetricVector clipped_correlations{};
  bool uniform_fallback = false;
  std::size_t sample_size = 0;
};

// Clip negatives to zero, choose d and normalize. All-zero input falls back
// to uniform weights.
QualityWeights weights_from_correlations(const MetricVector& raw, const PowerPolicy& policy);

struct DatasetWeights {
  std::string dataset_id;
  std::map<std::string, QualityWeights> per_quality;
  std::vector<std::string> warnings;
};

// Per quality: Spearman of every (oriented) sub-metric against the human
// scores on one shared sample of `sample_n` dialogues, then
// weights_from_correlations. A constant series correlates as 0, so a
// constant human score falls back to uniform weights with a warning. Throws
// PipelineError for incomplete scores, a dataset without annotations, or a
// quality with fewer than two annotated dialogues in the sample.
DatasetWeights fit_dataset_weights(const AnnotatedDataset& ds, const ScoreMatrix& scores,
                                   const PowerPolicy& policy,
                                   std::size_t sample_n = kDefaultSampleSize,
                                   std::uint64_t seed = 0);

struct WeightTable {
  std::map<std::string, MetricVector> weights;
  std::map<std::string, std::size_t> support;
  std::map<std::string, std::map<std::string, int>> d_used;
  PowerPolicy policy;

  bool contains(std::string_view quality) const { return weights.contains(std::string(quality)); }
  bool operator==(const WeightTable&) const = default;
};

// Mean of the per-dataset weight vectors of each quality over the datasets
// annotated with it. Datasets are folded in dataset_id order.
WeightTable average_weights(std::span<const DatasetWeights> per_dataset);

MetricVector uniform_weights();
// Mean over every quality's weights, renormalized to sum to one.
MetricVector uniform_quality_average(const WeightTable& table);

std::string weight_table_to_json(const WeightTable& table);
// Throws DataError on malformed input.
WeightTable weight_table_from_json(std::string_view text, std::string_view source = "<memory>");

struct ComposedScores {
  std::string dataset_id;
  std::string quality;
  std::vector<std::string> dialogue_ids;
  std::vector<double> scores;

  std::optional<double> find(std::string_view dialogue_id) const;
};

// Oriented sub-metric scores mapped to fractional rank / n within the dataset.
std::array<std::vector<double>, kNumSubMetrics> rank_normalized_columns(const ScoreMatrix& scores);

// Weighted sum of one dialogue's normalized sub-metric scores.
double weighted_sum(const MetricVector& weights, const MetricVector& normalized);

// Throws PipelineError when scores are incomplete.
ComposedScores compose(const ScoreMatrix& scores, const MetricVector& weights, std::string label);

// Uses the table's weights for `quality`, or `fallback` when the table lacks
// it. Throws PipelineError for an unknown quality without fallback.
ComposedScores compose(const ScoreMatrix& scores, const WeightTable& table, const std::string& quality,
                       const std::optional<MetricVector>& fallback = std::nullopt);

// CSV `dialogue_id,score`.
std::string write_composed_csv(const ComposedScores& composed);

}  // namespace dialeval
