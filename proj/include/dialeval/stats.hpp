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

#include <cstddef>
#include <span>
#include <vector>

namespace dialeval {

struct CorrelationEstimate {
  double rho = 0.0;
  std::size_t n = 0;
  bool clipped = false;
};

// Fractional ranking: ties share the mean of the 1-based positions they
// occupy, so the ranks always sum to n(n+1)/2.
std::vector<double> rank_average(std::span<const double> values);

// Pearson correlation of raw values. Returns 0 when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Spearman's rho as the Pearson correlation of fractional ranks.
// Throws std::invalid_argument on length mismatch or n < 2, and
// UndefinedCorrelation when both inputs are constant. If exactly one input
// is constant the ranks carry no ordering information and rho is 0.
CorrelationEstimate spearman(std::span<const double> x, std::span<const double> y);

CorrelationEstimate clip_negative(CorrelationEstimate c);

}  // namespace dialeval
