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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dialeval {

// Token embeddings; out-of-vocabulary tokens embed as the zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  // Text format, one `token v1 ... vd` per line. The first line fixes d.
  static EmbeddingTable load(const std::filesystem::path& path);
  static EmbeddingTable parse(std::string_view text, std::string_view source = "<memory>");

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }

  // Throws std::invalid_argument on a dimension mismatch.
  void add(std::string token, std::vector<double> vector);
  // nullptr for OOV.
  const std::vector<double>* find(std::string_view token) const;

  // Mean of the token vectors (OOV count as zero). nullopt when every token
  // is OOV.
  std::optional<std::vector<double>> mean_pool(std::span<const std::string> tokens) const;

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Cosine similarity; 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace dialeval
