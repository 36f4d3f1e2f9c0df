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

#include "dialeval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "dialeval/error.hpp"
#include "dialeval/stats.hpp"

namespace dialeval {

using nlohmann::json;

double evaluate_composed(const AnnotatedDataset& ds, const ComposedScores& composed,
                         const std::string& quality) {
  const auto* qa = ds.annotation(quality);
  if (qa == nullptr) {
    throw PipelineError("dataset \"" + ds.dataset_id() + "\" has no annotation for \"" + quality + "\"");
  }
  std::unordered_map<std::string, double> by_id;
  for (std::size_t i = 0; i < composed.dialogue_ids.size(); ++i) {
    by_id.emplace(composed.dialogue_ids[i], composed.scores[i]);
  }
  std::vector<double> predicted;
  std::vector<double> human;
  for (const auto& d : ds.dialogues()) {
    auto h = qa->scores.find(d.dialogue_id);
    if (h == qa->scores.end()) continue;
    auto p = by_id.find(d.dialogue_id);
    if (p == by_id.end()) {
      throw PipelineError("dataset \"" + ds.dataset_id() + "\": no composed score for dialogue \"" +
                          d.dialogue_id + "\"");
    }
    predicted.push_back(p->second);
    human.push_back(h->second);
  }
  try {
    return spearman(predicted, human).rho;
  } catch (const UndefinedCorrelation&) {
    return 0.0;
  }
}

EvaluationReport aggregate(const std::map<CellKey, double>& cells, bool per_dataset_average) {
  if (cells.empty()) throw std::invalid_argument("aggregate: no cells");
  EvaluationReport report;
  report.cells = cells;
  report.per_dataset_average = per_dataset_average;
  if (!per_dataset_average) {
    double sum = 0.0;
    for (const auto& [_, rho] : cells) sum += rho;
    report.average = sum / static_cast<double>(cells.size());
  } else {
    std::map<std::string, std::pair<double, std::size_t>> per_ds;
    for (const auto& [key, rho] : cells) {
      auto& acc = per_ds[key.first];
      acc.first += rho;
      ++acc.second;
    }
    double sum = 0.0;
    for (const auto& [_, acc] : per_ds) sum += acc.first / static_cast<double>(acc.second);
    report.average = sum / static_cast<double>(per_ds.size());
  }
  return report;
}

void AblationSpec::validate() const {
  if (dropped_groups.size() >= kNumGroups) {
    throw std::invalid_argument("ablation cannot drop every metric group");
  }
}

std::string AblationSpec::label() const {
  if (dropped_groups.empty()) return "full";
  std::string out = "w/o ";
  bool first = true;
  for (auto g : dropped_groups) {
    if (!first) out += "+";
    out += name_of(g);
    first = false;
  }
  return out;
}

AblationResult ablate(const WeightTable& table, const AblationSpec& spec) {
  spec.validate();
  AblationResult result{table, {}};
  for (auto& [quality, w] : result.table.weights) {
    double remaining = 0.0;
    std::size_t kept = 0;
    for (auto m : kAllSubMetrics) {
      if (spec.dropped_groups.contains(group_of(m))) {
        w[index_of(m)] = 0.0;
      } else {
        remaining += w[index_of(m)];
        ++kept;
      }
    }
    if (remaining <= 0.0) {
      for (auto m : kAllSubMetrics) {
        if (!spec.dropped_groups.contains(group_of(m))) w[index_of(m)] = 1.0 / static_cast<double>(kept);
      }
      result.warnings.push_back("quality \"" + quality + "\": no weight left after " + spec.label() +
                                ", using uniform weights over the remaining sub-metrics");
    } else if (spec.renormalize) {
      for (auto& x : w) x /= remaining;
    }
  }
  return result;
}

ComposedScores baseline_avg(const ScoreMatrix& scores) {
  return compose(scores, uniform_weights(), "MME-Avg");
}

EvaluationReport evaluate_datasets(std::span<const AnnotatedDataset> datasets,
                                   std::span<const ScoreMatrix> scores, const WeightResolver& weights,
                                   std::string method, bool per_dataset_average) {
  if (datasets.size() != scores.size()) {
    throw std::invalid_argument("evaluate_datasets: datasets and score matrices differ in count");
  }
  std::map<CellKey, double> cells;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto& ds = datasets[i];
    if (!ds.has_annotations()) {
      throw PipelineError("dataset \"" + ds.dataset_id() + "\" has no human annotations to evaluate against");
    }
    for (const auto& quality : ds.qualities()) {
      const auto composed = compose(scores[i], weights(ds.dataset_id(), quality), quality);
      cells[{ds.dataset_id(), quality}] = evaluate_composed(ds, composed, quality);
    }
  }
  auto report = aggregate(cells, per_dataset_average);
  report.method = std::move(method);
  return report;
}

json report_to_json(const EvaluationReport& report) {
  json cells = json::array();
  for (const auto& [key, rho] : report.cells) {
    cells.push_back({{"dataset", key.first}, {"quality", key.second}, {"rho", rho}});
  }
  return {{"method", report.method},
          {"cells", std::move(cells)},
          {"average", report.average},
          {"averaging", report.per_dataset_average ? "per_dataset" : "per_cell"},
          {"metadata", report.metadata}};
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::string format_report_table(std::span<const EvaluationReport> reports) {
  std::set<CellKey> columns;
  for (const auto& r : reports) {
    for (const auto& [key, _] : r.cells) columns.insert(key);
  }
  std::vector<std::string> header{"Method"};
  for (const auto& [ds, q] : columns) header.push_back(ds + "-" + q);
  header.emplace_back("Avg");

  std::vector<std::vector<std::string>> rows{header};
  for (const auto& r : reports) {
    std::vector<std::string> row{r.method};
    for (const auto& key : columns) {
      auto it = r.cells.find(key);
      row.push_back(it == r.cells.end() ? "-" : percent(it->second));
    }
    row.push_back(percent(r.average));
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const auto& cell = rows[r][c];
      const std::string pad(width[c] - cell.size(), ' ');
      if (c == 0) {
        out += cell + pad;
      } else {
        out += "  " + pad + cell;
      }
    }
    out.push_back('\n');
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out += std::string(total - 2, '-') + "\n";
    }
  }
  return out;
}

}  // namespace dialeval
