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

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

namespace dialeval {
namespace {

std::map<std::string, int> multiset(const Tokens& t) {
  std::map<std::string, int> m;
  for (const auto& s : t) ++m[s];
  return m;
}

bool is_subsequence(const Tokens& small, const Tokens& big) {
  std::size_t j = 0;
  for (const auto& t : big) {
    if (j < small.size() && small[j] == t) ++j;
  }
  return j == small.size();
}

Tokens random_sentence(Rng& rng) {
  static const Tokens words{"the", "cat", "sat", "on", "a", "mat", "and", "it", "was", "happy", "dog", "ran"};
  Tokens out;
  const std::size_t n = 1 + rng.below(12);
  for (std::size_t i = 0; i < n; ++i) out.push_back(words[rng.below(words.size())]);
  return out;
}

TEST(PerturbResponse, ReorderPreservesMultiset) {
  SamplingParams params;
  Rng rng(1);
  const Tokens in{"how", "are", "you"};
  const auto out = perturb_response(in, Perturbation::reorder, params, rng);
  EXPECT_EQ(out.size(), 3u);
  EXPECT_EQ(multiset(out), multiset(in));
}

TEST(PerturbResponse, DropForcedCount) {
  SamplingParams params;
  params.word_drop_fraction = 0.5;
  Rng rng(2);
  const Tokens in{"a", "b", "c", "d"};
  const auto out = perturb_response(in, Perturbation::drop, params, rng);
  EXPECT_EQ(out.size(), 2u);
  EXPECT_TRUE(is_subsequence(out, in));
}

TEST(PerturbResponse, DropRemovesAtLeastOne) {
  SamplingParams params;
  params.word_drop_fraction = 0.05;
  Rng rng(3);
  EXPECT_EQ(perturb_response(Tokens{"a", "b", "c"}, Perturbation::drop, params, rng).size(), 2u);
}

TEST(PerturbResponse, DropOnSingleTokenIsDegenerate) {
  SamplingParams params;
  Rng rng(4);
  EXPECT_THROW(perturb_response(Tokens{"hi"}, Perturbation::drop, params, rng), DegenerateInput);
}

TEST(PerturbResponse, StopwordDeleteLimits) {
  SamplingParams params;
  params.stopwords = {"the"};
  params.stopword_delete_prob = 1.0;
  Rng rng(5);
  EXPECT_EQ(perturb_response(Tokens{"the", "cat", "sat"}, Perturbation::stopword_delete, params, rng),
            (Tokens{"cat", "sat"}));
  params.stopword_delete_prob = 0.0;
  EXPECT_EQ(perturb_response(Tokens{"the", "cat", "sat"}, Perturbation::stopword_delete, params, rng),
            (Tokens{"the", "cat", "sat"}));
}

TEST(PerturbResponse, RepeatGrowsAndKeepsInputAsSubsequence) {
  SamplingParams params;
  Rng rng(6);
  const Tokens in{"a", "b"};
  const auto out = perturb_response(in, Perturbation::repeat, params, rng);
  EXPECT_GT(out.size(), in.size());
  EXPECT_TRUE(is_subsequence(in, out));
}

TEST(PerturbResponse, PropertiesOverRandomInputs) {
  SamplingParams params;
  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto in = random_sentence(rng);
    const auto reordered = perturb_response(in, Perturbation::reorder, params, rng);
    EXPECT_EQ(multiset(reordered), multiset(in));
    const auto repeated = perturb_response(in, Perturbation::repeat, params, rng);
    EXPECT_TRUE(is_subsequence(in, repeated));
    EXPECT_LE(repeated.size(), in.size() + params.repeat_span_max);
    const auto k = std::max<std::size_t>(1, std::lround(params.word_drop_fraction * in.size()));
    if (k < in.size()) {
      EXPECT_EQ(perturb_response(in, Perturbation::drop, params, rng).size(), in.size() - k);
    }
  }
}

TEST(PerturbResponse, EmptyInputRejected) {
  SamplingParams params;
  Rng rng(8);
  EXPECT_THROW(perturb_response(Tokens{}, Perturbation::reorder, params, rng), std::invalid_argument);
}

TEST(BuildFluencySet, BalancedDeterministicAndConsistent) {
  Rng gen(9);
  std::vector<Tokens> responses;
  for (int i = 0; i < 10000; ++i) responses.push_back(random_sentence(gen));
  SamplingParams params;
  params.seed = 42;
  const auto a = build_fluency_set(responses, params);
  const auto b = build_fluency_set(responses, params);
  EXPECT_EQ(a.items, b.items);
  EXPECT_EQ(a.skipped, b.skipped);

  std::size_t positives = 0;
  for (const auto& item : a.items) {
    EXPECT_EQ(item.label, label_for(item.perturbation));
    positives += item.label;
    if (item.perturbation == Perturbation::reorder) {
      EXPECT_EQ(multiset(item.tokens), multiset(responses[item.source_index]));
    }
  }
  const double frac = static_cast<double>(positives) / static_cast<double>(a.items.size());
  EXPECT_GE(frac, 0.48);
  EXPECT_LE(frac, 0.52);
}

TEST(BuildFluencySet, SkipsDegenerateResponses) {
  SamplingParams params;
  std::vector<Tokens> responses(200, Tokens{"hi"});
  const auto set = build_fluency_set(responses, params);
  EXPECT_EQ(set.items.size() + set.skipped.size(), 200u);
  EXPECT_FALSE(set.skipped.empty());
  for (const auto& item : set.items) EXPECT_NE(item.perturbation, Perturbation::drop);
}

Similarity fixed_similarity(std::map<std::string, double> table) {
  return [table](std::span<const std::string>, std::span<const std::string> c) {
    return table.at(c.front());
  };
}

TEST(MiddleNegative, ReturnsFifthAscending) {
  std::vector<Tokens> pool;
  std::map<std::string, double> sims;
  for (int i = 1; i <= 10; ++i) {
    pool.push_back({"c" + std::to_string(i)});
    sims["c" + std::to_string(i)] = i / 10.0;
  }
  SamplingParams params;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(middle_negative(Tokens{"ref"}, pool, params, fixed_similarity(sims), rng), Tokens{"c5"});
  }
}

TEST(MiddleNegative, TiesBrokenByText) {
  std::vector<Tokens> pool;
  for (char c = 'a'; c < 'a' + 10; ++c) pool.push_back({std::string(1, c)});
  SamplingParams params;
  auto constant = [](std::span<const std::string>, std::span<const std::string>) { return 1.0; };
  Rng rng(1);
  EXPECT_EQ(middle_negative(Tokens{"ref"}, pool, params, constant, rng), Tokens{"e"});
}

TEST(MiddleNegative, DeterministicForSeedAndOffsetConfigurable) {
  Rng gen(10);
  std::vector<Tokens> pool;
  for (int i = 0; i < 60; ++i) pool.push_back(random_sentence(gen));
  auto sim = [](std::span<const std::string> a, std::span<const std::string> b) {
    return -std::abs(static_cast<double>(a.size()) - static_cast<double>(b.size()));
  };
  SamplingParams params;
  Rng r1(99), r2(99);
  EXPECT_EQ(middle_negative(Tokens{"x", "y"}, pool, params, sim, r1),
            middle_negative(Tokens{"x", "y"}, pool, params, sim, r2));

  std::vector<Tokens> ten;
  std::map<std::string, double> sims;
  for (int i = 1; i <= 10; ++i) {
    ten.push_back({"c" + std::to_string(i)});
    sims["c" + std::to_string(i)] = i / 10.0;
  }
  params.middle_offset = 1;
  Rng r3(0);
  EXPECT_EQ(middle_negative(Tokens{"ref"}, ten, params, fixed_similarity(sims), r3), Tokens{"c6"});
}

TEST(MiddleNegative, PoolTooSmall) {
  SamplingParams params;
  Rng rng(0);
  std::vector<Tokens> pool(5, Tokens{"x"});
  EXPECT_THROW(middle_negative(Tokens{"r"}, pool, params,
                               [](auto, auto) { return 0.0; }, rng),
               std::invalid_argument);
}

TEST(BuildRelevanceSet, LabelsAndProvenance) {
  Rng gen(12);
  std::vector<Dialogue> dialogues;
  std::vector<Tokens> pool;
  for (int i = 0; i < 10000; ++i) {
    Dialogue d;
    d.dialogue_id = std::to_string(i);
    d.context.push_back(Utterance::from_text("A", "how was your day"));
    d.response.tokens = random_sentence(gen);
    d.response.raw_text = join_tokens(d.response.tokens);
    dialogues.push_back(std::move(d));
  }
  for (int i = 0; i < 30; ++i) pool.push_back({"pool" + std::to_string(i), "zebra"});
  auto sim = [](std::span<const std::string>, std::span<const std::string> b) {
    return static_cast<double>(b.front().size());
  };
  SamplingParams params;
  params.seed = 5;
  const auto set = build_relevance_set(dialogues, pool, params, sim);
  std::size_t valid = 0;
  for (const auto& pair : set.items) {
    EXPECT_EQ(pair.label, label_for(pair.provenance));
    const auto& original = dialogues[pair.source_index].response.tokens;
    valid += pair.label;
    switch (pair.provenance) {
      case PairProvenance::original: EXPECT_EQ(pair.response.tokens, original); break;
      case PairProvenance::stopwords_removed:
        EXPECT_TRUE(is_subsequence(pair.response.tokens, original));
        EXPECT_LT(pair.response.tokens.size(), original.size());
        break;
      case PairProvenance::middle_negative: EXPECT_NE(pair.response.tokens, original); break;
    }
  }
  const double frac = static_cast<double>(valid) / static_cast<double>(set.items.size());
  EXPECT_GE(frac, 0.48);
  EXPECT_LE(frac, 0.52);

  const auto again = build_relevance_set(dialogues, pool, params, sim);
  EXPECT_EQ(to_jsonl(std::span<const LabeledPair>(again.items)),
            to_jsonl(std::span<const LabeledPair>(set.items)));
}

TEST(ScaleEngagement, AffineMap) {
  EXPECT_EQ(scale_engagement(0.0), 0.0);
  EXPECT_EQ(scale_engagement(5.0), 1.0);
  EXPECT_EQ(scale_engagement(2.5), 0.5);
  EXPECT_LT(scale_engagement(1.0), scale_engagement(1.5));
  EXPECT_THROW(scale_engagement(-0.1), std::out_of_range);
  EXPECT_THROW(scale_engagement(5.1), std::out_of_range);
}

TEST(SamplingParams, Validation) {
  SamplingParams p;
  EXPECT_NO_THROW(p.validate());
  p.word_drop_fraction = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.candidate_pool_size = 2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.stopword_delete_prob = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Jsonl, FluencyRecordShape) {
  const std::vector<LabeledUtterance> items{{0, {"a", "b"}, 0, Perturbation::reorder}};
  EXPECT_EQ(to_jsonl(std::span<const LabeledUtterance>(items)),
            "{\"label\":0,\"provenance\":\"reorder\",\"tokens\":[\"a\",\"b\"]}\n");
}

}  // namespace
}  // namespace dialeval
