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

#include "dialeval/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace dialeval {

namespace {

constexpr char kSep = '\x1f';

}  // namespace

NgramModel NgramModel::train(std::span<const Tokens> corpus, int order, double alpha) {
  if (corpus.empty()) throw std::invalid_argument("ngram: empty training corpus");
  if (order < 1) throw std::invalid_argument("ngram: order must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("ngram: alpha must be positive");

  NgramModel model(order, alpha);
  std::vector<std::string> words;
  for (const auto& sentence : corpus) {
    words.insert(words.end(), sentence.begin(), sentence.end());
  }
  model.finalize_vocabulary(std::move(words));

  const auto ctx_len = static_cast<std::size_t>(order - 1);
  for (const auto& sentence : corpus) {
    std::vector<std::string> padded(ctx_len, std::string(kBos));
    padded.insert(padded.end(), sentence.begin(), sentence.end());
    padded.emplace_back(kEos);
    for (std::size_t i = ctx_len; i < padded.size(); ++i) {
      std::span<const std::string> history(padded.data() + i - ctx_len, ctx_len);
      auto& slot = model.counts_[model.context_key(history)];
      ++slot.total;
      ++slot.next[padded[i]];
    }
  }
  return model;
}

NgramModel NgramModel::uniform(std::span<const std::string> words, int order, double alpha) {
  if (order < 1) throw std::invalid_argument("ngram: order must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("ngram: alpha must be positive");
  NgramModel model(order, alpha);
  model.finalize_vocabulary({words.begin(), words.end()});
  return model;
}

void NgramModel::finalize_vocabulary(std::vector<std::string> words) {
  words.emplace_back(kEos);
  words.emplace_back(kUnk);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  // The start symbol is conditioned on, never predicted.
  std::erase(words, std::string(kBos));
  vocabulary_ = std::move(words);
}

bool NgramModel::contains(std::string_view word) const {
  return std::binary_search(vocabulary_.begin(), vocabulary_.end(), word);
}

const std::string& NgramModel::canonical(const std::string& word) const {
  static const std::string unk(kUnk);
  static const std::string bos(kBos);
  if (word == bos || contains(word)) return word;
  return unk;
}

std::string NgramModel::context_key(std::span<const std::string> history) const {
  const auto ctx_len = static_cast<std::size_t>(order_ - 1);
  std::string key;
  for (std::size_t i = 0; i < ctx_len; ++i) {
    // Right-align the history; positions before the sentence are start symbols.
    const std::size_t missing = ctx_len > history.size() ? ctx_len - history.size() : 0;
    if (i > 0) key.push_back(kSep);
    if (i < missing) {
      key += kBos;
    } else {
      key += canonical(history[history.size() - ctx_len + i]);
    }
  }
  return key;
}

std::uint64_t NgramModel::context_count(std::span<const std::string> history) const {
  auto it = counts_.find(context_key(history));
  return it == counts_.end() ? 0 : it->second.total;
}

double NgramModel::prob(std::span<const std::string> history, std::string_view word) const {
  const std::string w = canonical(std::string(word));
  const double v = static_cast<double>(vocabulary_.size());
  std::uint64_t joint = 0;
  std::uint64_t total = 0;
  if (auto it = counts_.find(context_key(history)); it != counts_.end()) {
    total = it->second.total;
    if (auto jt = it->second.next.find(w); jt != it->second.next.end()) joint = jt->second;
  }
  return (static_cast<double>(joint) + alpha_) / (static_cast<double>(total) + alpha_ * v);
}

double NgramModel::logprob(std::span<const std::string> history, std::string_view word) const {
  return std::log(prob(history, word));
}

std::vector<double> token_logprobs(const NgramModel& model, std::span<const std::string> tokens) {
  if (tokens.empty()) throw std::invalid_argument("token_logprobs: empty input");
  std::vector<double> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.push_back(model.logprob(tokens.first(i), tokens[i]));
  }
  return out;
}

double perplexity(const NgramModel& model, std::span<const std::string> tokens) {
  const auto lps = token_logprobs(model, tokens);
  double sum = 0.0;
  for (double lp : lps) sum += lp;
  return std::exp(-sum / static_cast<double>(lps.size()));
}

double median_perplexity(const NgramModel& model, std::span<const Tokens> corpus) {
  std::vector<double> ppl;
  for (const auto& s : corpus) {
    if (!s.empty()) ppl.push_back(perplexity(model, s));
  }
  if (ppl.empty()) throw std::invalid_argument("median_perplexity: no non-empty sentences");
  std::sort(ppl.begin(), ppl.end());
  const std::size_t mid = ppl.size() / 2;
  return ppl.size() % 2 == 1 ? ppl[mid] : 0.5 * (ppl[mid - 1] + ppl[mid]);
}

}  // namespace dialeval
