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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dialeval/corpus.hpp"

namespace dialeval {

// Add-alpha smoothed n-gram model over a closed vocabulary. The vocabulary
// always contains the end-of-sentence and unknown symbols; out-of-vocabulary
// tokens are mapped to the unknown symbol before lookup.
//
//   p(w | ctx) = (count(ctx, w) + alpha) / (count(ctx) + alpha * |V|)
class NgramModel {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kUnk = "<unk>";

  // Each sentence is padded with order-1 start symbols and one end symbol.
  // Throws std::invalid_argument on an empty corpus, order < 1 or alpha <= 0.
  static NgramModel train(std::span<const Tokens> corpus, int order, double alpha);

  // A model with no counts: every conditional is 1/|V|.
  static NgramModel uniform(std::span<const std::string> words, int order, double alpha = 1.0);

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  std::size_t vocabulary_size() const { return vocabulary_.size(); }
  // Sorted.
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  bool contains(std::string_view word) const;

  // `history` holds the preceding tokens, most recent last; only the last
  // order-1 of them are used, and missing positions count as start symbols.
  double prob(std::span<const std::string> history, std::string_view word) const;
  double logprob(std::span<const std::string> history, std::string_view word) const;

  std::uint64_t context_count(std::span<const std::string> history) const;

 private:
  NgramModel(int order, double alpha) : order_(order), alpha_(alpha) {}

  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<std::string, std::uint64_t> next;
  };

  std::string context_key(std::span<const std::string> history) const;
  const std::string& canonical(const std::string& word) const;
  void finalize_vocabulary(std::vector<std::string> words);

  int order_;
  double alpha_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, ContextCounts> counts_;
};

// Natural-log conditional probability of every token given its predecessors
// (sentence start padded, no end symbol). Throws on empty input.
std::vector<double> token_logprobs(const NgramModel& model, std::span<const std::string> tokens);

// exp(-mean log-probability).
double perplexity(const NgramModel& model, std::span<const std::string> tokens);

// Median sentence perplexity; the default fluency scale.
double median_perplexity(const NgramModel& model, std::span<const Tokens> corpus);

}  // namespace dialeval
