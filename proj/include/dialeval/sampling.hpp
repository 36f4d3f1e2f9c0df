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
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dialeval/corpus.hpp"
#include "dialeval/embedding.hpp"
#include "dialeval/rng.hpp"

namespace dialeval {

using StopwordSet = std::unordered_set<std::string>;

// Built-in English stopword list.
const StopwordSet& default_stopwords();
// One token per line; blank lines and surrounding whitespace are ignored.
StopwordSet load_stopwords(const std::filesystem::path& path);

struct SamplingParams {
  std::uint64_t seed = 0;
  StopwordSet stopwords = default_stopwords();
  double stopword_delete_prob = 0.5;
  double word_drop_fraction = 0.25;
  std::size_t candidate_pool_size = 10;
  std::size_t repeat_span_max = 3;
  // Added to the ascending middle index floor(pool/2) - 1.
  int middle_offset = 0;

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

enum class Perturbation { none, stopword_delete, reorder, drop, repeat };
enum class PairProvenance { original, stopwords_removed, middle_negative };

std::string_view name_of(Perturbation p);
std::string_view name_of(PairProvenance p);

// Positive (label 1) iff the perturbation keeps the response fluent.
constexpr int label_for(Perturbation p) {
  return p == Perturbation::none || p == Perturbation::stopword_delete ? 1 : 0;
}
constexpr int label_for(PairProvenance p) { return p == PairProvenance::middle_negative ? 0 : 1; }

struct LabeledUtterance {
  std::size_t source_index = 0;
  Tokens tokens;
  int label = 1;
  Perturbation perturbation = Perturbation::none;

  bool operator==(const LabeledUtterance&) const = default;
};

struct LabeledPair {
  std::size_t source_index = 0;
  std::vector<Utterance> context;
  Utterance response;
  int label = 1;
  PairProvenance provenance = PairProvenance::original;

  bool operator==(const LabeledPair&) const = default;
};

// The perturbation would leave an empty response.
class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Applies one corruption rule:
//   stopword_delete  each stopword dropped with stopword_delete_prob
//   reorder          uniform random permutation
//   drop             exactly max(1, round(x * n)) tokens removed
//   repeat           one span of length U[1, repeat_span_max] duplicated in place
// Throws std::invalid_argument on empty input, DegenerateInput when the
// result would be empty.
Tokens perturb_response(std::span<const std::string> tokens, Perturbation kind,
                        const SamplingParams& params, Rng& rng);

struct FluencySet {
  std::vector<LabeledUtterance> items;
  std::vector<std::size_t> skipped;  // source indices dropped as degenerate
};

// Each response is labeled fluent with probability 1/2 and perturbed by a
// rule drawn uniformly from its label's rule set. Item i draws from a
// generator seeded with (seed, i), so the output does not depend on order
// of evaluation.
FluencySet build_fluency_set(std::span<const Tokens> responses, const SamplingParams& params);

using Similarity =
    std::function<double(std::span<const std::string>, std::span<const std::string>)>;

// Cosine of mean-pooled embeddings; 0 when either side is fully OOV.
Similarity embedding_similarity(const EmbeddingTable& table);

// Draws candidate_pool_size candidates without replacement, sorts them
// ascending by (similarity to `reference`, joined text) and returns the one
// at index floor(size/2) - 1 + middle_offset.
Tokens middle_negative(std::span<const std::string> reference, std::span<const Tokens> pool,
                       const SamplingParams& params, const Similarity& similarity, Rng& rng);

struct RelevanceSet {
  std::vector<LabeledPair> items;
  std::vector<std::size_t> skipped;
};

// Valid pairs keep the response as-is or with stopwords removed; invalid
// pairs swap in a middle negative chosen against the gold reference, or the
// original response when the dialogue has none.
RelevanceSet build_relevance_set(std::span<const Dialogue> dialogues, std::span<const Tokens> pool,
                                 const SamplingParams& params, const Similarity& similarity);

// Maps a 0-5 engagement rating onto [0, 1]. Throws std::out_of_range.
double scale_engagement(double score);

std::string to_jsonl(std::span<const LabeledUtterance> items);
std::string to_jsonl(std::span<const LabeledPair> items);

}  // namespace dialeval
