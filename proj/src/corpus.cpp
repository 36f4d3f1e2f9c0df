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

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dialeval/error.hpp"
#include "dialeval/rng.hpp"
#include "json.hpp"

namespace dialeval {

using nlohmann::json;

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else if (c < 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return tokens;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Utterance Utterance::from_text(std::string speaker, std::string text) {
  Utterance u;
  u.speaker = std::move(speaker);
  u.tokens = tokenize(text);
  u.raw_text = std::move(text);
  return u;
}

AnnotatedDataset::AnnotatedDataset(std::string dataset_id, std::vector<Dialogue> dialogues,
                                   std::vector<QualityAnnotation> annotations)
    : dataset_id_(std::move(dataset_id)),
      dialogues_(std::move(dialogues)),
      annotations_(std::move(annotations)) {
  std::sort(annotations_.begin(), annotations_.end(),
            [](const auto& a, const auto& b) { return a.quality < b.quality; });
  for (std::size_t i = 0; i < dialogues_.size(); ++i) {
    index_.try_emplace(dialogues_[i].dialogue_id, i);
  }
}

const Dialogue* AnnotatedDataset::find(std::string_view dialogue_id) const {
  auto it = index_.find(std::string(dialogue_id));
  return it == index_.end() ? nullptr : &dialogues_[it->second];
}

const QualityAnnotation* AnnotatedDataset::annotation(std::string_view quality) const {
  for (const auto& a : annotations_) {
    if (a.quality == quality) return &a;
  }
  return nullptr;
}

std::vector<std::string> AnnotatedDataset::dialogue_ids() const {
  std::vector<std::string> ids;
  ids.reserve(dialogues_.size());
  for (const auto& d : dialogues_) ids.push_back(d.dialogue_id);
  return ids;
}

std::vector<std::string> AnnotatedDataset::qualities() const {
  std::vector<std::string> out;
  for (const auto& a : annotations_) out.push_back(a.quality);
  return out;
}

namespace {

Utterance parse_utterance(const json& j, const std::string& where) {
  if (!j.is_object()) throw DataError(where + ": utterance must be an object");
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) {
    throw DataError(where + ": utterance requires a string \"text\"");
  }
  std::string speaker;
  if (auto s = j.find("speaker"); s != j.end()) {
    if (!s->is_string()) throw DataError(where + ": \"speaker\" must be a string");
    speaker = s->get<std::string>();
  }
  return Utterance::from_text(std::move(speaker), text->get<std::string>());
}

json utterance_json(const Utterance& u) {
  return json{{"speaker", u.speaker}, {"text", u.raw_text}};
}

}  // namespace

AnnotatedDataset parse_dataset(std::string_view jsonl, std::string_view source) {
  std::string dataset_id;
  std::vector<Dialogue> dialogues;
  std::map<std::string, QualityAnnotation> annotations;
  std::set<std::string> seen;

  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!rec.is_object()) throw DataError(where + ": record must be a JSON object");

    auto ds = rec.find("dataset_id");
    auto id = rec.find("dialogue_id");
    if (ds == rec.end() || !ds->is_string()) throw DataError(where + ": missing \"dataset_id\"");
    if (id == rec.end() || !id->is_string()) throw DataError(where + ": missing \"dialogue_id\"");
    if (dialogues.empty()) {
      dataset_id = ds->get<std::string>();
    } else if (ds->get<std::string>() != dataset_id) {
      throw DataError(where + ": dataset_id \"" + ds->get<std::string>() +
                      "\" differs from \"" + dataset_id + "\"");
    }

    Dialogue d;
    d.dialogue_id = id->get<std::string>();
    if (!seen.insert(d.dialogue_id).second) {
      throw DataError(where + ": duplicate dialogue_id \"" + d.dialogue_id + "\"");
    }
    if (auto ctx = rec.find("context"); ctx != rec.end() && !ctx->is_null()) {
      if (!ctx->is_array()) throw DataError(where + ": \"context\" must be an array");
      for (const auto& u : *ctx) d.context.push_back(parse_utterance(u, where));
    }
    auto resp = rec.find("response");
    if (resp == rec.end()) throw DataError(where + ": missing \"response\"");
    d.response = parse_utterance(*resp, where);
    if (d.response.tokens.empty()) {
      throw DataError(where + ": empty response in dialogue \"" + d.dialogue_id + "\"");
    }
    if (auto ref = rec.find("reference"); ref != rec.end() && !ref->is_null()) {
      d.reference = parse_utterance(*ref, where);
    }
    if (auto ann = rec.find("annotations"); ann != rec.end() && !ann->is_null()) {
      if (!ann->is_object()) throw DataError(where + ": \"annotations\" must be an object");
      for (const auto& [quality, value] : ann->items()) {
        if (!value.is_number()) {
          throw DataError(where + ": annotation \"" + quality + "\" is not a number");
        }
        auto& qa = annotations[quality];
        qa.quality = quality;
        qa.scores[d.dialogue_id] = value.get<double>();
      }
    }
    dialogues.push_back(std::move(d));
  }
  if (dialogues.empty()) throw DataError(std::string(source) + ": empty dataset");

  std::vector<QualityAnnotation> anns;
  for (auto& [_, qa] : annotations) anns.push_back(std::move(qa));
  return AnnotatedDataset(std::move(dataset_id), std::move(dialogues), std::move(anns));
}

AnnotatedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw DataError("failed reading " + path.string());
  return parse_dataset(buf.str(), path.string());
}

std::string serialize_dataset(const AnnotatedDataset& ds) {
  std::string out;
  for (const auto& d : ds.dialogues()) {
    json rec;
    rec["dataset_id"] = ds.dataset_id();
    rec["dialogue_id"] = d.dialogue_id;
    rec["context"] = json::array();
    for (const auto& u : d.context) rec["context"].push_back(utterance_json(u));
    rec["response"] = utterance_json(d.response);
    if (d.reference) rec["reference"] = utterance_json(*d.reference);
    json ann = json::object();
    for (const auto& qa : ds.annotations()) {
      if (auto it = qa.scores.find(d.dialogue_id); it != qa.scores.end()) {
        ann[qa.quality] = it->second;
      }
    }
    if (!ann.empty()) rec["annotations"] = std::move(ann);
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<Violation> validate_dataset(const AnnotatedDataset& ds) {
  std::vector<Violation> out;
  if (ds.dialogues().empty()) out.push_back({"empty dataset", ds.dataset_id()});
  std::set<std::string> ids;
  for (const auto& d : ds.dialogues()) {
    if (!ids.insert(d.dialogue_id).second) out.push_back({"duplicate dialogue_id", d.dialogue_id});
    if (d.response.tokens.empty()) out.push_back({"empty response", d.dialogue_id});
  }
  for (const auto& qa : ds.annotations()) {
    for (const auto& [id, _] : qa.scores) {
      if (!ids.contains(id)) out.push_back({"unknown dialogue_id", qa.quality + "/" + id});
    }
    std::set<double> distinct;
    for (const auto& [_, v] : qa.scores) distinct.insert(v);
    if (distinct.size() < 2) out.push_back({"constant annotation", qa.quality});
  }
  return out;
}

AnnotatedDataset sample_dialogues(const AnnotatedDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample size must be at least 2");
  const std::size_t total = ds.size();
  const std::size_t k = std::min(n, total);

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (k < total) {
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + rng.below(total - i);
      std::swap(order[i], order[j]);
    }
    order.resize(k);
    std::sort(order.begin(), order.end());
  }

  std::vector<Dialogue> picked;
  picked.reserve(k);
  std::set<std::string> keep;
  for (std::size_t idx : order) {
    picked.push_back(ds.dialogues()[idx]);
    keep.insert(ds.dialogues()[idx].dialogue_id);
  }
  std::vector<QualityAnnotation> anns;
  for (const auto& qa : ds.annotations()) {
    QualityAnnotation sub{qa.quality, {}};
    for (const auto& [id, v] : qa.scores) {
      if (keep.contains(id)) sub.scores.emplace(id, v);
    }
    anns.push_back(std::move(sub));
  }
  return AnnotatedDataset(ds.dataset_id(), std::move(picked), std::move(anns));
}

}  // namespace dialeval
