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

#include "dialeval/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dialeval/error.hpp"
#include "json.hpp"

namespace dialeval {

using nlohmann::json;

const StopwordSet& default_stopwords() {
  // Tokens as produced by tokenize(): contractions are split at the
  // apostrophe, so their fragments ("don", "t", "ll", ...) are listed too.
  static const StopwordSet words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
      "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
      "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
      "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
      "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
      "for", "with", "about", "against", "between", "into", "through", "during", "before",
      "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
      "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
      "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
      "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can",
      "will", "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain",
      "aren", "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn",
      "mustn", "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn"};
  return words;
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file " + path.string());
  StopwordSet out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.insert(line.substr(b, e - b + 1));
  }
  return out;
}

void SamplingParams::validate() const {
  if (!(stopword_delete_prob >= 0.0 && stopword_delete_prob <= 1.0)) {
    throw std::invalid_argument("stopword_delete_prob must lie in [0, 1]");
  }
  if (!(word_drop_fraction > 0.0 && word_drop_fraction < 1.0)) {
    throw std::invalid_argument("word_drop_fraction must lie in (0, 1)");
  }
  if (candidate_pool_size < 3) throw std::invalid_argument("candidate_pool_size must be >= 3");
  if (repeat_span_max < 1) throw std::invalid_argument("repeat_span_max must be >= 1");
  const auto middle = static_cast<long>(candidate_pool_size / 2) - 1 + middle_offset;
  if (middle < 0 || middle >= static_cast<long>(candidate_pool_size)) {
    throw std::invalid_argument("middle_offset points outside the candidate pool");
  }
}

std::string_view name_of(Perturbation p) {
  switch (p) {
    case Perturbation::none: return "none";
    case Perturbation::stopword_delete: return "stopword_delete";
    case Perturbation::reorder: return "reorder";
    case Perturbation::drop: return "drop";
    case Perturbation::repeat: return "repeat";
  }
  return "?";
}

std::string_view name_of(PairProvenance p) {
  switch (p) {
    case PairProvenance::original: return "original";
    case PairProvenance::stopwords_removed: return "stopwords_removed";
    case PairProvenance::middle_negative: return "middle_negative";
  }
  return "?";
}

Tokens perturb_response(std::span<const std::string> tokens, Perturbation kind,
                        const SamplingParams& params, Rng& rng) {
  if (tokens.empty()) throw std::invalid_argument("perturb_response: empty token list");
  const std::size_t n = tokens.size();
  Tokens out;
  switch (kind) {
    case Perturbation::none:
      out.assign(tokens.begin(), tokens.end());
      break;
    case Perturbation::stopword_delete:
      for (const auto& t : tokens) {
        if (params.stopwords.contains(t) && rng.bernoulli(params.stopword_delete_prob)) continue;
        out.push_back(t);
      }
      break;
    case Perturbation::reorder:
      out.assign(tokens.begin(), tokens.end());
      rng.shuffle(std::span<std::string>(out));
      break;
    case Perturbation::drop: {
      const auto k = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(params.word_drop_fraction * static_cast<double>(n))));
      if (k >= n) {
        throw DegenerateInput("word drop of " + std::to_string(k) + " from " + std::to_string(n) +
                              " tokens leaves nothing");
      }
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
      std::vector<bool> dropped(n, false);
      for (std::size_t i = 0; i < k; ++i) dropped[idx[i]] = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (!dropped[i]) out.push_back(tokens[i]);
      }
      break;
    }
    case Perturbation::repeat: {
      const std::size_t max_len = std::min(params.repeat_span_max, n);
      const std::size_t len = 1 + rng.below(max_len);
      const std::size_t start = rng.below(n - len + 1);
      out.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(start + len));
      out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(start), tokens.end());
      break;
    }
  }
  if (out.empty()) throw DegenerateInput("perturbation removed every token");
  return out;
}

FluencySet build_fluency_set(std::span<const Tokens> responses, const SamplingParams& params) {
  if (responses.empty()) throw std::invalid_argument("build_fluency_set: no responses");
  params.validate();
  static constexpr Perturbation kPositive[] = {Perturbation::none, Perturbation::stopword_delete};
  static constexpr Perturbation kNegative[] = {Perturbation::reorder, Perturbation::drop,
                                               Perturbation::repeat};
  FluencySet set;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    Rng rng(mix_seed(params.seed, i));
    const bool fluent = rng.bernoulli(0.5);
    const Perturbation kind = fluent ? kPositive[rng.below(2)] : kNegative[rng.below(3)];
    if (responses[i].empty()) {
      set.skipped.push_back(i);
      continue;
    }
    try {
      set.items.push_back({i, perturb_response(responses[i], kind, params, rng), label_for(kind), kind});
    } catch (const DegenerateInput&) {
      set.skipped.push_back(i);
    }
  }
  return set;
}

Similarity embedding_similarity(const EmbeddingTable& table) {
  return [&table](std::span<const std::string> a, std::span<const std::string> b) {
    const auto pa = table.mean_pool(a);
    const auto pb = table.mean_pool(b);
    if (!pa || !pb) return 0.0;
    return cosine(*pa, *pb);
  };
}

Tokens middle_negative(std::span<const std::string> reference, std::span<const Tokens> pool,
                       const SamplingParams& params, const Similarity& similarity, Rng& rng) {
  if (reference.empty()) throw std::invalid_argument("middle_negative: empty reference");
  const std::size_t k = params.candidate_pool_size;
  if (pool.size() < k) {
    throw std::invalid_argument("middle_negative: pool of " + std::to_string(pool.size()) +
                                " is smaller than candidate_pool_size " + std::to_string(k));
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(pool.size() - i)]);

  struct Candidate {
    double similarity;
    std::string text;
    std::size_t index;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = pool[idx[i]];
    candidates.push_back({similarity(reference, c), join_tokens(c), idx[i]});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.similarity != b.similarity) return a.similarity < b.similarity;
    if (a.text != b.text) return a.text < b.text;
    return a.index < b.index;
  });
  const auto middle = static_cast<std::size_t>(static_cast<long>(k / 2) - 1 + params.middle_offset);
  return pool[candidates.at(middle).index];
}

RelevanceSet build_relevance_set(std::span<const Dialogue> dialogues, std::span<const Tokens> pool,
                                 const SamplingParams& params, const Similarity& similarity) {
  if (dialogues.empty()) throw std::invalid_argument("build_relevance_set: no dialogues");
  params.validate();
  if (pool.size() < params.candidate_pool_size) {
    throw std::invalid_argument("build_relevance_set: response pool smaller than candidate_pool_size");
  }
  RelevanceSet set;
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    const auto& d = dialogues[i];
    Rng rng(mix_seed(params.seed, i));
    LabeledPair pair;
    pair.source_index = i;
    pair.context = d.context;
    pair.response = d.response;
    if (d.response.tokens.empty()) {
      set.skipped.push_back(i);
      continue;
    }
    if (rng.bernoulli(0.5)) {
      if (rng.bernoulli(0.5)) {
        Tokens kept;
        for (const auto& t : d.response.tokens) {
          if (!params.stopwords.contains(t)) kept.push_back(t);
        }
        // Nothing removed, or nothing left: the pair stays original.
        if (!kept.empty() && kept.size() < d.response.tokens.size()) {
          pair.response.raw_text = join_tokens(kept);
          pair.response.tokens = std::move(kept);
          pair.provenance = PairProvenance::stopwords_removed;
        }
      }
    } else {
      const auto& reference = d.reference ? d.reference->tokens : d.response.tokens;
      auto negative = middle_negative(reference, pool, params, similarity, rng);
      pair.response.raw_text = join_tokens(negative);
      pair.response.tokens = std::move(negative);
      pair.provenance = PairProvenance::middle_negative;
    }
    pair.label = label_for(pair.provenance);
    set.items.push_back(std::move(pair));
  }
  return set;
}

double scale_engagement(double score) {
  if (!(score >= 0.0 && score <= 5.0)) {
    throw std::out_of_range("engagement score must lie in [0, 5]");
  }
  return score / 5.0;
}

std::string to_jsonl(std::span<const LabeledUtterance> items) {
  std::string out;
  for (const auto& item : items) {
    json rec{{"tokens", item.tokens},
             {"label", item.label},
             {"provenance", std::string(name_of(item.perturbation))}};
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

std::string to_jsonl(std::span<const LabeledPair> items) {
  std::string out;
  for (const auto& item : items) {
    json context = json::array();
    for (const auto& u : item.context) context.push_back(u.tokens);
    json rec{{"context", std::move(context)},
             {"tokens", item.response.tokens},
             {"label", item.label},
             {"provenance", std::string(name_of(item.provenance))}};
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace dialeval
