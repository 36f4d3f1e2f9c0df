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
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dialeval/corpus.hpp"
#include "dialeval/crs.hpp"
#include "dialeval/submetrics.hpp"
#include "json.hpp"

namespace dialeval {

using CellKey = std::pair<std::string, std::string>;  // (dataset_id, quality)

struct EvaluationReport {
  std::string method;
  std::map<CellKey, double> cells;
  double average = 0.0;
  bool per_dataset_average = false;
  // Free-form run description (policy, seeds). Timestamps are kept out of
  // reports so that outputs stay reproducible.
  nlohmann::json metadata = nlohmann::json::object();
};

// Spearman between composed scores and the human scores of `quality` over
// every annotated dialogue. Throws PipelineError when the quality is absent
// or a dialogue has no composed score.
double evaluate_composed(const AnnotatedDataset& ds, const ComposedScores& composed,
                         const std::string& quality);

// Unweighted mean over cells. With per_dataset_average the cells are first
// averaged within each dataset. Throws std::invalid_argument on no cells.
EvaluationReport aggregate(const std::map<CellKey, double>& cells, bool per_dataset_average = false);

struct AblationSpec {
  std::set<MetricGroup> dropped_groups;
  bool renormalize = true;

  // Throws std::invalid_argument when every group is dropped.
  void validate() const;
  std::string label() const;
};

struct AblationResult {
  WeightTable table;
  std::vector<std::string> warnings;
};

AblationResult ablate(const WeightTable& table, const AblationSpec& spec);

// Equal weights over the rank-normalized sub-metrics.
ComposedScores baseline_avg(const ScoreMatrix& scores);

// Weight vector to use for a (dataset_id, quality) cell.
using WeightResolver = std::function<MetricVector(const std::string&, const std::string&)>;

// Composes and evaluates every annotated (dataset, quality) cell. `scores`
// is matched to `datasets` by position. Throws PipelineError when a dataset
// has no annotations.
EvaluationReport evaluate_datasets(std::span<const AnnotatedDataset> datasets,
                                   std::span<const ScoreMatrix> scores, const WeightResolver& weights,
                                   std::string method, bool per_dataset_average = false);

nlohmann::json report_to_json(const EvaluationReport& report);

// Methods as rows, dataset-quality cells as columns, values in percent.
std::string format_report_table(std::span<const EvaluationReport> reports);

}  // namespace dialeval
