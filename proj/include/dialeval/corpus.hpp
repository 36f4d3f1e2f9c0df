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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dialeval {

using Tokens = std::vector<std::string>;

// Lowercases ASCII letters, detaches ASCII punctuation into single-character
// tokens and splits on whitespace. Non-ASCII bytes pass through untouched.
Tokens tokenize(std::string_view text);

std::string join_tokens(const Tokens& tokens);

struct Utterance {
  std::string speaker;
  Tokens tokens;
  std::string raw_text;

  static Utterance from_text(std::string speaker, std::string text);

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::string dialogue_id;
  std::vector<Utterance> context;
  Utterance response;
  std::optional<Utterance> reference;

  bool operator==(const Dialogue&) const = default;
};

// Human scores for one quality, keyed by dialogue id.
struct QualityAnnotation {
  std::string quality;
  std::map<std::string, double> scores;

  bool operator==(const QualityAnnotation&) const = default;
};

class AnnotatedDataset {
 public:
  AnnotatedDataset() = default;
  AnnotatedDataset(std::string dataset_id, std::vector<Dialogue> dialogues,
                   std::vector<QualityAnnotation> annotations);

  const std::string& dataset_id() const { return dataset_id_; }
  const std::vector<Dialogue>& dialogues() const { return dialogues_; }
  const std::vector<QualityAnnotation>& annotations() const { return annotations_; }

  std::size_t size() const { return dialogues_.size(); }
  bool has_annotations() const { return !annotations_.empty(); }

  // nullptr when absent.
  const Dialogue* find(std::string_view dialogue_id) const;
  const QualityAnnotation* annotation(std::string_view quality) const;

  std::vector<std::string> dialogue_ids() const;
  std::vector<std::string> qualities() const;

  bool operator==(const AnnotatedDataset& other) const {
    return dataset_id_ == other.dataset_id_ && dialogues_ == other.dialogues_ &&
           annotations_ == other.annotations_;
  }

 private:
  std::string dataset_id_;
  std::vector<Dialogue> dialogues_;
  std::vector<QualityAnnotation> annotations_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads a JSONL dataset. Throws DataError on I/O failure, malformed lines
// (with the 1-based line number), duplicate dialogue ids, inconsistent
// dataset ids or an empty file.
AnnotatedDataset load_dataset(const std::filesystem::path& path);
AnnotatedDataset parse_dataset(std::string_view jsonl, std::string_view source = "<memory>");

// One JSON object per dialogue, newline terminated.
std::string serialize_dataset(const AnnotatedDataset& ds);

struct Violation {
  std::string invariant;
  std::string id;

  bool operator==(const Violation&) const = default;
};

// Empty iff every dataset invariant holds. Never throws.
std::vector<Violation> validate_dataset(const AnnotatedDataset& ds);

// min(n, |dialogues|) dialogues drawn uniformly without replacement, kept in
// their original order; annotations are restricted to the sampled ids.
// Throws std::invalid_argument when n < 2.
AnnotatedDataset sample_dialogues(const AnnotatedDataset& ds, std::size_t n, std::uint64_t seed);

}  // namespace dialeval
