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

#include "dialeval/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dialeval/error.hpp"

namespace dialeval {

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

EmbeddingTable EmbeddingTable::parse(std::string_view text, std::string_view source) {
  std::optional<EmbeddingTable> table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> vec;
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw DataError(std::string(source) + ":" + std::to_string(line_no) +
                        ": bad number \"" + field + "\"");
      }
      vec.push_back(v);
    }
    if (vec.empty()) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": no vector values");
    }
    if (!table) table.emplace(vec.size());
    if (vec.size() != table->dimension()) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table->dimension()) + " values, got " +
                      std::to_string(vec.size()));
    }
    table->add(std::move(token), std::move(vec));
  }
  if (!table) throw DataError(std::string(source) + ": empty embedding table");
  return std::move(*table);
}

void EmbeddingTable::add(std::string token, std::vector<double> vector) {
  if (vector.size() != dimension_) {
    throw std::invalid_argument("embedding dimension mismatch for \"" + token + "\"");
  }
  vectors_.insert_or_assign(std::move(token), std::move(vector));
}

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::optional<std::vector<double>> EmbeddingTable::mean_pool(
    std::span<const std::string> tokens) const {
  std::vector<double> acc(dimension_, 0.0);
  bool any = false;
  for (const auto& t : tokens) {
    if (const auto* v = find(t)) {
      any = true;
      for (std::size_t i = 0; i < dimension_; ++i) acc[i] += (*v)[i];
    }
  }
  if (!any) return std::nullopt;
  const double n = static_cast<double>(tokens.size());
  for (auto& a : acc) a /= n;
  return acc;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

}  // namespace dialeval
