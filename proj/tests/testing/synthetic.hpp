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

// Test-only helpers: independent oracles and synthetic data generators.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dialeval/corpus.hpp"
#include "dialeval/submetric.hpp"
#include "dialeval/submetrics.hpp"

namespace dialeval::testing {

// O(n^2) fractional ranks by counting: 1 + #less + (#equal - 1) / 2.
std::vector<double> brute_force_ranks(std::span<const double> v);

// Single-pass textbook Pearson formula on brute-force ranks.
double brute_force_spearman(std::span<const double> x, std::span<const double> y);

// 1 - 6 sum(d^2) / (n (n^2 - 1)); only valid without ties.
double closed_form_spearman(std::span<const double> x, std::span<const double> y);

// Noise scale for which a Gaussian latent plus noise has Spearman ~= rho
// against the latent (bivariate normal: rho_s = 6/pi * asin(r/2)).
double rank_noise_sigma(double target_spearman);

double inverse_normal_cdf(double p);

struct SyntheticSpec {
  std::string dataset_id;
  std::size_t dialogues = 1000;
  // quality -> sub-metric whose ranking drives the human score
  std::map<std::string, SubMetric> designated;
  double target_spearman = 0.7;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  AnnotatedDataset dataset;
  ScoreMatrix scores;
};

// Sub-metric scores are independent draws in each metric's range (the
// specificity triple obeys its identities). Each human score is the normal
// quantile of the designated metric's rank plus Gaussian noise.
SyntheticDataset make_synthetic(const SyntheticSpec& spec);

// Qualities used by the recovery suite and their driving sub-metrics.
const std::map<std::string, SubMetric>& recovery_qualities();

// Writes a small self-contained pipeline (text corpus, embeddings, datasets
// with external TCM/EM scores) and returns the config path.
std::filesystem::path write_cli_fixture(const std::filesystem::path& dir, std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);

}  // namespace dialeval::testing
