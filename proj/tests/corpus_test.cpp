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

#include "dialeval/corpus.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "dialeval/error.hpp"

namespace dialeval {
namespace {

const char* kThree =
    R"({"dataset_id": "ds", "dialogue_id": "d1", "context": [{"speaker": "A", "text": "Hi there!"}], "response": {"speaker": "B", "text": "Hello, friend."}, "annotations": {"overall": 4}}
{"dataset_id": "ds", "dialogue_id": "d2", "context": [], "response": {"speaker": "B", "text": "How are you?"}, "annotations": {"overall": 2}, "extra": true}
{"dataset_id": "ds", "dialogue_id": "d3", "context": [], "response": {"speaker": "B", "text": "fine"}, "reference": {"speaker": "B", "text": "Fine thanks"}, "annotations": {"overall": 3}}
)";

std::string make_lines(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out += R"({"dataset_id": "big", "dialogue_id": "d)" + std::to_string(i) +
           R"(", "context": [], "response": {"speaker": "B", "text": "reply )" + std::to_string(i) +
           R"("}, "annotations": {"q": )" + std::to_string(i % 5) + "}}\n";
  }
  return out;
}

TEST(Tokenize, LowercasesAndDetachesPunctuation) {
  EXPECT_EQ(tokenize("Hello, World!  It's"),
            (Tokens{"hello", ",", "world", "!", "it", "'", "s"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Tokenize, KeepsNonAsciiBytes) {
  EXPECT_EQ(tokenize("Café au LAIT"), (Tokens{"café", "au", "lait"}));
}

TEST(LoadDataset, ParsesRecords) {
  const auto ds = parse_dataset(kThree);
  EXPECT_EQ(ds.dataset_id(), "ds");
  ASSERT_EQ(ds.size(), 3u);
  ASSERT_EQ(ds.annotations().size(), 1u);
  EXPECT_EQ(ds.annotations()[0].scores.size(), 3u);
  EXPECT_EQ(ds.dialogues()[0].response.tokens, (Tokens{"hello", ",", "friend", "."}));
  ASSERT_TRUE(ds.dialogues()[2].reference.has_value());
  EXPECT_EQ(ds.dialogues()[2].reference->tokens, (Tokens{"fine", "thanks"}));
  EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(LoadDataset, DuplicateIdNamed) {
  const std::string text =
      R"({"dataset_id": "ds", "dialogue_id": "d1", "response": {"text": "a"}}
{"dataset_id": "ds", "dialogue_id": "d1", "response": {"text": "b"}}
)";
  try {
    parse_dataset(text);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("\"d1\""), std::string::npos);
  }
}

TEST(LoadDataset, EmptyFile) {
  try {
    parse_dataset("\n\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
  }
}

TEST(LoadDataset, MalformedLineReportsLineNumber) {
  const std::string text =
      R"({"dataset_id": "ds", "dialogue_id": "d1", "response": {"text": "a"}}
{"dataset_id": "ds", "dialogue_id": )";
  try {
    parse_dataset(text, "x.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("x.jsonl:2"), std::string::npos);
  }
}

TEST(LoadDataset, RejectsMixedDatasetIdsAndEmptyResponses) {
  EXPECT_THROW(parse_dataset(R"({"dataset_id": "a", "dialogue_id": "1", "response": {"text": "x"}}
{"dataset_id": "b", "dialogue_id": "2", "response": {"text": "y"}})"),
               DataError);
  EXPECT_THROW(parse_dataset(R"({"dataset_id": "a", "dialogue_id": "1", "response": {"text": " "}})"),
               DataError);
  EXPECT_THROW(parse_dataset(R"({"dataset_id": "a", "dialogue_id": "1", "response": {"text": "x"}, "annotations": {"q": "high"}})"),
               DataError);
}

TEST(LoadDataset, MissingAnnotationsAllowed) {
  const auto ds = parse_dataset(R"({"dataset_id": "t", "dialogue_id": "1", "response": {"text": "x"}})");
  EXPECT_FALSE(ds.has_annotations());
}

TEST(LoadDataset, MissingFileIsDataError) {
  EXPECT_THROW(load_dataset("/nonexistent/file.jsonl"), DataError);
}

TEST(LoadDataset, SerializeRoundTrip) {
  const auto ds = parse_dataset(kThree);
  const auto again = parse_dataset(serialize_dataset(ds));
  EXPECT_EQ(ds, again);
  EXPECT_EQ(serialize_dataset(again), serialize_dataset(ds));

  const auto path = std::filesystem::temp_directory_path() / "dialeval_corpus_roundtrip.jsonl";
  std::ofstream(path) << serialize_dataset(ds);
  EXPECT_EQ(load_dataset(path), ds);
  std::filesystem::remove(path);
}

TEST(ValidateDataset, UnknownIdAndConstantAnnotation) {
  std::vector<Dialogue> dialogues(2);
  dialogues[0].dialogue_id = "a";
  dialogues[0].response = Utterance::from_text("B", "yes");
  dialogues[1].dialogue_id = "b";
  dialogues[1].response = Utterance::from_text("B", "no");
  AnnotatedDataset ds("x", dialogues,
                      {{"q1", {{"a", 1.0}, {"b", 2.0}, {"ghost", 3.0}}}, {"q2", {{"a", 1.0}, {"b", 1.0}}}});
  const auto report = validate_dataset(ds);
  ASSERT_EQ(report.size(), 2u);
  EXPECT_EQ(report[0], (Violation{"unknown dialogue_id", "q1/ghost"}));
  EXPECT_EQ(report[1], (Violation{"constant annotation", "q2"}));
}

TEST(SampleDialogues, DeterministicAndSized) {
  const auto ds = parse_dataset(make_lines(500));
  const auto a = sample_dialogues(ds, 300, 7);
  const auto b = sample_dialogues(ds, 300, 7);
  EXPECT_EQ(a.size(), 300u);
  EXPECT_EQ(serialize_dataset(a), serialize_dataset(b));
  std::set<std::string> ids;
  for (const auto& d : a.dialogues()) ids.insert(d.dialogue_id);
  EXPECT_EQ(ids.size(), 300u);
  EXPECT_EQ(a.annotations()[0].scores.size(), 300u);
  for (const auto& [id, _] : a.annotations()[0].scores) EXPECT_TRUE(ids.contains(id));
}

TEST(SampleDialogues, ClampsToDatasetSize) {
  const auto ds = parse_dataset(make_lines(120));
  EXPECT_EQ(sample_dialogues(ds, 300, 1).size(), 120u);
}

TEST(SampleDialogues, SeedsProduceDifferentSubsets) {
  const auto ds = parse_dataset(make_lines(10000));
  EXPECT_NE(sample_dialogues(ds, 300, 1).dialogue_ids(), sample_dialogues(ds, 300, 2).dialogue_ids());
}

TEST(SampleDialogues, RejectsTinySample) {
  const auto ds = parse_dataset(make_lines(5));
  EXPECT_THROW(sample_dialogues(ds, 1, 0), std::invalid_argument);
}

}  // namespace
}  // namespace dialeval
