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

#include "dialeval/crs.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "dialeval/error.hpp"
#include "dialeval/stats.hpp"
#include "json.hpp"

namespace dialeval {

using nlohmann::json;

namespace {

constexpr double kIntervalSlack = 1e-12;

double max_of(const MetricVector& v) { return *std::max_element(v.begin(), v.end()); }

std::string_view mode_name(PowerMode m) { return m == PowerMode::fixed ? "fixed" : "auto"; }

}  // namespace

void PowerPolicy::validate() const {
  if (d_max < 1) throw std::invalid_argument("d_max must be >= 1");
  if (mode == PowerMode::fixed && (fixed_d < 1 || fixed_d > d_max)) {
    throw std::invalid_argument("fixed d must lie in [1, d_max]");
  }
  if (!(target_low > 0.0 && target_low <= target_high && target_high <= 1.0)) {
    throw std::invalid_argument("target interval must satisfy 0 < low <= high <= 1");
  }
}

MetricVector power_weights(const MetricVector& clipped, int d) {
  if (d < 1) throw std::invalid_argument("power must be >= 1");
  const double top = max_of(clipped);
  if (!(top > 0.0)) throw std::invalid_argument("power_weights: no positive correlation");
  MetricVector w{};
  double total = 0.0;
  for (std::size_t k = 0; k < kNumSubMetrics; ++k) {
    if (clipped[k] < 0.0) throw std::invalid_argument("power_weights: negative correlation");
    // Scaling by the maximum leaves the ratios unchanged and avoids underflow.
    w[k] = std::pow(clipped[k] / top, d);
    total += w[k];
  }
  for (auto& x : w) x /= total;
  return w;
}

int select_power(const MetricVector& clipped, const PowerPolicy& policy) {
  policy.validate();
  if (!(max_of(clipped) > 0.0)) {
    throw std::invalid_argument("select_power: all correlations are zero");
  }
  if (policy.mode == PowerMode::fixed) return policy.fixed_d;

  const double mid = 0.5 * (policy.target_low + policy.target_high);
  int best = 1;
  double best_gap = INFINITY;
  for (int d = 1; d <= policy.d_max; ++d) {
    const double top = max_of(power_weights(clipped, d));
    if (top >= policy.target_low - kIntervalSlack && top <= policy.target_high + kIntervalSlack) {
      return d;
    }
    const double gap = std::abs(top - mid);
    if (gap < best_gap) {
      best_gap = gap;
      best = d;
    }
  }
  return best;
}

QualityWeights weights_from_correlations(const MetricVector& raw, const PowerPolicy& policy) {
  QualityWeights q;
  q.raw_correlations = raw;
  for (std::size_t k = 0; k < kNumSubMetrics; ++k) {
    q.clipped_correlations[k] = clip_negative({raw[k], 2, false}).rho;
  }
  if (!(max_of(q.clipped_correlations) > 0.0)) {
    q.uniform_fallback = true;
    q.weights = uniform_weights();
    q.d_used = 0;
    return q;
  }
  q.d_used = select_power(q.clipped_correlations, policy);
  q.weights = power_weights(q.clipped_correlations, q.d_used);
  return q;
}

DatasetWeights fit_dataset_weights(const AnnotatedDataset& ds, const ScoreMatrix& scores,
                                   const PowerPolicy& policy, std::size_t sample_n,
                                   std::uint64_t seed) {
  policy.validate();
  if (!ds.has_annotations()) {
    throw PipelineError("dataset \"" + ds.dataset_id() + "\" has no annotations to fit against");
  }
  std::array<std::vector<double>, kNumSubMetrics> columns;
  for (auto m : kAllSubMetrics) columns[index_of(m)] = scores.column(m);

  const auto sample = sample_dialogues(ds, sample_n, seed);
  DatasetWeights out;
  out.dataset_id = ds.dataset_id();
  for (const auto& qa : sample.annotations()) {
    std::vector<double> human;
    std::array<std::vector<double>, kNumSubMetrics> metric;
    for (const auto& d : sample.dialogues()) {
      auto it = qa.scores.find(d.dialogue_id);
      if (it == qa.scores.end()) continue;
      auto row = scores.row_of(d.dialogue_id);
      if (!row) {
        throw PipelineError("dataset \"" + ds.dataset_id() + "\": no scores for dialogue \"" +
                            d.dialogue_id + "\"");
      }
      human.push_back(it->second);
      for (auto m : kAllSubMetrics) {
        metric[index_of(m)].push_back(orient(m, columns[index_of(m)][*row]));
      }
    }
    if (human.size() < 2) {
      throw PipelineError("dataset \"" + ds.dataset_id() + "\": fewer than two annotated dialogues for quality \"" +
                          qa.quality + "\" in the fitting sample");
    }
    // Undefined correlations (constant inputs) contribute 0.
    MetricVector raw{};
    for (auto m : kAllSubMetrics) {
      try {
        raw[index_of(m)] = spearman(metric[index_of(m)], human).rho;
      } catch (const UndefinedCorrelation&) {
        raw[index_of(m)] = 0.0;
      }
    }

    auto q = weights_from_correlations(raw, policy);
    q.sample_size = human.size();
    if (q.uniform_fallback) {
      out.warnings.push_back("dataset \"" + ds.dataset_id() + "\", quality \"" + qa.quality +
                             "\": no positive correlation, using uniform weights");
    }
    out.per_quality.emplace(qa.quality, q);
  }
  return out;
}

WeightTable average_weights(std::span<const DatasetWeights> per_dataset) {
  if (per_dataset.empty()) throw std::invalid_argument("average_weights: no datasets");
  std::vector<const DatasetWeights*> ordered;
  for (const auto& d : per_dataset) ordered.push_back(&d);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->dataset_id < b->dataset_id; });

  WeightTable table;
  for (const auto* dw : ordered) {
    for (const auto& [quality, q] : dw->per_quality) {
      auto& acc = table.weights[quality];
      for (std::size_t k = 0; k < kNumSubMetrics; ++k) acc[k] += q.weights[k];
      ++table.support[quality];
      table.d_used[quality][dw->dataset_id] = q.d_used;
    }
  }
  for (auto& [quality, w] : table.weights) {
    const double n = static_cast<double>(table.support[quality]);
    for (auto& x : w) x /= n;
  }
  return table;
}

MetricVector uniform_weights() {
  MetricVector w;
  w.fill(1.0 / static_cast<double>(kNumSubMetrics));
  return w;
}

MetricVector uniform_quality_average(const WeightTable& table) {
  if (table.weights.empty()) throw PipelineError("weight table is empty");
  MetricVector acc{};
  for (const auto& [_, w] : table.weights) {
    for (std::size_t k = 0; k < kNumSubMetrics; ++k) acc[k] += w[k];
  }
  double total = 0.0;
  for (double x : acc) total += x;
  for (auto& x : acc) x /= total;
  return acc;
}

std::string weight_table_to_json(const WeightTable& table) {
  json qualities = json::object();
  for (const auto& [quality, w] : table.weights) {
    json weights = json::object();
    for (auto m : kAllSubMetrics) weights[std::string(name_of(m))] = w[index_of(m)];
    json d_used = json::object();
    if (auto it = table.d_used.find(quality); it != table.d_used.end()) {
      for (const auto& [ds, d] : it->second) d_used[ds] = d;
    }
    qualities[quality] = {{"weights", std::move(weights)},
                          {"support", table.support.at(quality)},
                          {"d_used", std::move(d_used)}};
  }
  const auto& p = table.policy;
  json policy = {{"mode", std::string(mode_name(p.mode))},
                 {"fixed_d", p.fixed_d},
                 {"d_max", p.d_max},
                 {"target_interval", {p.target_low, p.target_high}}};
  json doc = {{"qualities", std::move(qualities)}, {"policy", std::move(policy)}};
  return doc.dump(2) + "\n";
}

WeightTable weight_table_from_json(std::string_view text, std::string_view source) {
  const std::string where(source);
  WeightTable table;
  try {
    const json doc = json::parse(text);
    for (const auto& [quality, entry] : doc.at("qualities").items()) {
      MetricVector w{};
      const auto& weights = entry.at("weights");
      for (auto m : kAllSubMetrics) {
        w[index_of(m)] = weights.at(std::string(name_of(m))).get<double>();
      }
      for (const auto& [key, _] : weights.items()) {
        if (!parse_submetric(key)) throw DataError(where + ": unknown metric \"" + key + "\"");
      }
      table.weights[quality] = w;
      table.support[quality] = entry.at("support").get<std::size_t>();
      if (auto it = entry.find("d_used"); it != entry.end()) {
        for (const auto& [ds, d] : it->items()) table.d_used[quality][ds] = d.get<int>();
      }
    }
    if (auto it = doc.find("policy"); it != doc.end()) {
      const auto mode = it->value("mode", std::string("auto"));
      if (mode != "auto" && mode != "fixed") throw DataError(where + ": unknown power mode");
      table.policy.mode = mode == "fixed" ? PowerMode::fixed : PowerMode::automatic;
      table.policy.fixed_d = it->value("fixed_d", 1);
      table.policy.d_max = it->value("d_max", 6);
      if (auto ti = it->find("target_interval"); ti != it->end()) {
        table.policy.target_low = ti->at(0).get<double>();
        table.policy.target_high = ti->at(1).get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw DataError(where + ": malformed weight table (" + e.what() + ")");
  }
  return table;
}

std::optional<double> ComposedScores::find(std::string_view dialogue_id) const {
  for (std::size_t i = 0; i < dialogue_ids.size(); ++i) {
    if (dialogue_ids[i] == dialogue_id) return scores[i];
  }
  return std::nullopt;
}

std::array<std::vector<double>, kNumSubMetrics> rank_normalized_columns(const ScoreMatrix& scores) {
  std::array<std::vector<double>, kNumSubMetrics> out;
  const double n = static_cast<double>(scores.size());
  for (auto m : kAllSubMetrics) {
    auto col = scores.column(m);
    for (auto& v : col) v = orient(m, v);
    auto ranks = rank_average(col);
    for (auto& r : ranks) r /= n;
    out[index_of(m)] = std::move(ranks);
  }
  return out;
}

double weighted_sum(const MetricVector& weights, const MetricVector& normalized) {
  double s = 0.0;
  for (std::size_t k = 0; k < kNumSubMetrics; ++k) s += weights[k] * normalized[k];
  return s;
}

ComposedScores compose(const ScoreMatrix& scores, const MetricVector& weights, std::string label) {
  if (scores.size() == 0) throw PipelineError("compose: empty score matrix");
  const auto columns = rank_normalized_columns(scores);
  ComposedScores out{scores.dataset_id(), std::move(label), scores.dialogue_ids(), {}};
  out.scores.reserve(scores.size());
  for (std::size_t row = 0; row < scores.size(); ++row) {
    MetricVector normalized{};
    for (std::size_t k = 0; k < kNumSubMetrics; ++k) normalized[k] = columns[k][row];
    out.scores.push_back(weighted_sum(weights, normalized));
  }
  return out;
}

ComposedScores compose(const ScoreMatrix& scores, const WeightTable& table, const std::string& quality,
                       const std::optional<MetricVector>& fallback) {
  if (auto it = table.weights.find(quality); it != table.weights.end()) {
    return compose(scores, it->second, quality);
  }
  if (!fallback) throw PipelineError("no weights for quality \"" + quality + "\"");
  return compose(scores, *fallback, quality);
}

std::string write_composed_csv(const ComposedScores& composed) {
  std::string out = "dialogue_id,score\n";
  for (std::size_t i = 0; i < composed.scores.size(); ++i) {
    out += composed.dialogue_ids[i];
    out.push_back(',');
    out += format_double(composed.scores[i]);
    out.push_back('\n');
  }
  return out;
}

}  // namespace dialeval
