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
#include <optional>
#include <string_view>

namespace dialeval {

enum class SubMetric : std::size_t { FM, RM, TCM, EM, SM_LL, SM_NCE, SM_PPL };
enum class MetricGroup : std::size_t { fluency, relevance, topic_coherence, engagement, specificity };

inline constexpr std::size_t kNumSubMetrics = 7;
inline constexpr std::size_t kNumGroups = 5;

inline constexpr std::array<SubMetric, kNumSubMetrics> kAllSubMetrics = {
    SubMetric::FM,    SubMetric::RM,     SubMetric::TCM,   SubMetric::EM,
    SubMetric::SM_LL, SubMetric::SM_NCE, SubMetric::SM_PPL};

inline constexpr std::array<MetricGroup, kNumGroups> kAllGroups = {
    MetricGroup::fluency, MetricGroup::relevance, MetricGroup::topic_coherence,
    MetricGroup::engagement, MetricGroup::specificity};

// One value per sub-metric, indexed in kAllSubMetrics order.
using MetricVector = std::array<double, kNumSubMetrics>;

constexpr std::size_t index_of(SubMetric m) { return static_cast<std::size_t>(m); }

constexpr MetricGroup group_of(SubMetric m) {
  switch (m) {
    case SubMetric::FM: return MetricGroup::fluency;
    case SubMetric::RM: return MetricGroup::relevance;
    case SubMetric::TCM: return MetricGroup::topic_coherence;
    case SubMetric::EM: return MetricGroup::engagement;
    default: return MetricGroup::specificity;
  }
}

constexpr std::string_view name_of(SubMetric m) {
  constexpr std::array<std::string_view, kNumSubMetrics> names = {
      "FM", "RM", "TCM", "EM", "SM_LL", "SM_NCE", "SM_PPL"};
  return names[index_of(m)];
}

constexpr std::string_view name_of(MetricGroup g) {
  constexpr std::array<std::string_view, kNumGroups> names = {
      "fluency", "relevance", "topic_coherence", "engagement", "specificity"};
  return names[static_cast<std::size_t>(g)];
}

constexpr std::optional<SubMetric> parse_submetric(std::string_view s) {
  for (auto m : kAllSubMetrics) {
    if (name_of(m) == s) return m;
  }
  return std::nullopt;
}

constexpr std::optional<MetricGroup> parse_group(std::string_view s) {
  for (auto g : kAllGroups) {
    if (name_of(g) == s) return g;
  }
  return std::nullopt;
}

// Classifier-style scores live in [0,1]; the specificity triple follows
// log-likelihood and perplexity ranges.
constexpr bool in_range(SubMetric m, double v) {
  switch (m) {
    case SubMetric::SM_LL:
    case SubMetric::SM_NCE: return v <= 0.0;
    case SubMetric::SM_PPL: return v >= 1.0;
    default: return v >= 0.0 && v <= 1.0;
  }
}

constexpr std::string_view range_text(SubMetric m) {
  switch (m) {
    case SubMetric::SM_LL:
    case SubMetric::SM_NCE: return "<= 0";
    case SubMetric::SM_PPL: return ">= 1";
    default: return "[0, 1]";
  }
}

// Perplexity is the only "lower is better" sub-metric; it is negated
// wherever scores are ranked.
constexpr double orient(SubMetric m, double v) { return m == SubMetric::SM_PPL ? -v : v; }

}  // namespace dialeval
