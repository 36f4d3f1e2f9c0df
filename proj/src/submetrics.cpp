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

#include "dialeval/submetrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dialeval/error.hpp"
#include "json.hpp"

namespace dialeval {

using nlohmann::json;

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string describe(const ScoreKey& key) {
  return "(" + key.first + ", " + std::string(name_of(key.second)) + ")";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

SpecificityScores specificity_scores(std::span<const double> logprobs) {
  if (logprobs.empty()) throw std::invalid_argument("specificity_scores: empty input");
  double sum = 0.0;
  for (double lp : logprobs) {
    if (!(lp <= 0.0)) throw std::invalid_argument("specificity_scores: log-probability > 0");
    sum += lp;
  }
  const double nce = sum / static_cast<double>(logprobs.size());
  return {sum, nce, std::exp(-nce)};
}

double fluency_score(const NgramModel& model, std::span<const std::string> response, double kappa) {
  if (response.empty()) throw std::invalid_argument("fluency_score: empty response");
  if (!(kappa > 0.0)) throw std::invalid_argument("fluency_score: kappa must be positive");
  return 1.0 / (1.0 + perplexity(model, response) / kappa);
}

double relevance_score(const EmbeddingTable& embeddings, std::span<const Tokens> context,
                       std::span<const std::string> response) {
  if (response.empty()) throw std::invalid_argument("relevance_score: empty response");
  Tokens flat;
  for (const auto& u : context) flat.insert(flat.end(), u.begin(), u.end());
  const auto ctx = embeddings.mean_pool(flat);
  const auto resp = embeddings.mean_pool(response);
  if (!ctx || !resp) return 0.5;
  return (cosine(*ctx, *resp) + 1.0) / 2.0;
}

// --- ScoreMatrix ---

ScoreMatrix::ScoreMatrix(std::string dataset_id, std::vector<std::string> dialogue_ids)
    : dataset_id_(std::move(dataset_id)), ids_(std::move(dialogue_ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.try_emplace(ids_[i], i).second) {
      throw DataError("score matrix: duplicate dialogue_id \"" + ids_[i] + "\"");
    }
  }
  for (auto& col : columns_) col.assign(ids_.size(), kMissing);
}

std::optional<std::size_t> ScoreMatrix::row_of(std::string_view dialogue_id) const {
  auto it = index_.find(std::string(dialogue_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void ScoreMatrix::set(std::size_t row, SubMetric m, double value) {
  if (row >= ids_.size()) throw std::out_of_range("score matrix row out of range");
  if (!in_range(m, value)) {
    throw DataError("score " + format_double(value) + " for " + describe({ids_[row], m}) +
                    " outside " + std::string(range_text(m)));
  }
  columns_[index_of(m)][row] = value;
}

void ScoreMatrix::set(std::string_view dialogue_id, SubMetric m, double value) {
  auto row = row_of(dialogue_id);
  if (!row) throw DataError("score for unknown dialogue_id \"" + std::string(dialogue_id) + "\"");
  set(*row, m, value);
}

std::optional<double> ScoreMatrix::get(std::size_t row, SubMetric m) const {
  const double v = columns_[index_of(m)].at(row);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

double ScoreMatrix::at(std::size_t row, SubMetric m) const {
  auto v = get(row, m);
  if (!v) throw PipelineError("missing score " + describe({ids_.at(row), m}));
  return *v;
}

bool ScoreMatrix::has(SubMetric m) const {
  const auto& col = columns_[index_of(m)];
  return std::none_of(col.begin(), col.end(), [](double v) { return std::isnan(v); });
}

bool ScoreMatrix::complete() const {
  return std::all_of(kAllSubMetrics.begin(), kAllSubMetrics.end(),
                     [&](SubMetric m) { return has(m); });
}

std::size_t ScoreMatrix::entry_count() const {
  std::size_t n = 0;
  for (const auto& col : columns_) {
    n += static_cast<std::size_t>(
        std::count_if(col.begin(), col.end(), [](double v) { return !std::isnan(v); }));
  }
  return n;
}

std::vector<ScoreKey> ScoreMatrix::missing(std::span<const SubMetric> required) const {
  std::vector<ScoreKey> out;
  for (std::size_t row = 0; row < ids_.size(); ++row) {
    for (auto m : required) {
      if (std::isnan(columns_[index_of(m)][row])) out.emplace_back(ids_[row], m);
    }
  }
  return out;
}

std::vector<double> ScoreMatrix::column(SubMetric m) const {
  if (!has(m)) {
    throw PipelineError("dataset \"" + dataset_id_ + "\": incomplete scores for " +
                        std::string(name_of(m)));
  }
  return columns_[index_of(m)];
}

bool ScoreMatrix::operator==(const ScoreMatrix& other) const {
  if (dataset_id_ != other.dataset_id_ || ids_ != other.ids_) return false;
  for (std::size_t k = 0; k < kNumSubMetrics; ++k) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      const double a = columns_[k][i];
      const double b = other.columns_[k][i];
      if (std::isnan(a) != std::isnan(b)) return false;
      if (!std::isnan(a) && a != b) return false;
    }
  }
  return true;
}

// --- external scores ---

ExternalScores parse_external_scores(std::string_view jsonl, std::span<const std::string> dialogue_ids,
                                     std::span<const SubMetric> metrics, std::string_view source) {
  const std::set<std::string> ids(dialogue_ids.begin(), dialogue_ids.end());
  const std::set<SubMetric> wanted(metrics.begin(), metrics.end());

  ExternalScores out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!rec.is_object() || !rec.contains("dialogue_id") || !rec["dialogue_id"].is_string() ||
        !rec.contains("metric") || !rec["metric"].is_string() || !rec.contains("score") ||
        !rec["score"].is_number()) {
      throw DataError(where + ": expected {\"dialogue_id\": str, \"metric\": str, \"score\": number}");
    }
    const auto metric_name = rec["metric"].get<std::string>();
    const auto metric = parse_submetric(metric_name);
    if (!metric) throw DataError(where + ": unknown metric \"" + metric_name + "\"");
    ScoreKey key{rec["dialogue_id"].get<std::string>(), *metric};
    const double score = rec["score"].get<double>();
    if (!in_range(*metric, score)) {
      throw DataError(where + ": score " + format_double(score) + " for " + describe(key) +
                      " outside " + std::string(range_text(*metric)));
    }
    if (!out.scores.emplace(key, score).second) {
      throw DataError(where + ": duplicate score for " + describe(key));
    }
    if (!ids.contains(key.first) || !wanted.contains(key.second)) out.extra.push_back(key);
  }
  for (const auto& id : dialogue_ids) {
    for (auto m : metrics) {
      if (!out.scores.contains({id, m})) out.missing.emplace_back(id, m);
    }
  }
  return out;
}

ExternalScores load_external_scores(const std::filesystem::path& path,
                                    std::span<const std::string> dialogue_ids,
                                    std::span<const SubMetric> metrics) {
  return parse_external_scores(read_file(path), dialogue_ids, metrics, path.string());
}

// --- bindings ---

std::vector<SubMetric> ScorerBindings::bound() const {
  std::vector<SubMetric> out;
  for (auto m : kAllSubMetrics) {
    if ((*this)[m] != ScoreSource::unbound) out.push_back(m);
  }
  return out;
}

std::vector<SubMetric> ScorerBindings::with(ScoreSource s) const {
  std::vector<SubMetric> out;
  for (auto m : kAllSubMetrics) {
    if ((*this)[m] == s) out.push_back(m);
  }
  return out;
}

ScoreMatrix score_dataset(const AnnotatedDataset& ds, const ScorerBindings& bindings,
                          const BuiltinResources& resources,
                          std::span<const std::filesystem::path> external_files) {
  const auto builtin = bindings.with(ScoreSource::builtin);
  const auto external = bindings.with(ScoreSource::external);

  bool needs_lm = false;
  bool needs_embeddings = false;
  for (auto m : builtin) {
    switch (m) {
      case SubMetric::TCM:
      case SubMetric::EM:
        throw ConfigError("no built-in scorer for " + std::string(name_of(m)) +
                          "; bind it to an external score file");
      case SubMetric::RM: needs_embeddings = true; break;
      default: needs_lm = true; break;
    }
  }
  if (needs_lm && resources.language_model == nullptr) {
    throw ConfigError("built-in FM/SM scorers need a language model");
  }
  if (needs_embeddings && resources.embeddings == nullptr) {
    throw ConfigError("built-in RM scorer needs an embedding table");
  }

  ScoreMatrix matrix(ds.dataset_id(), ds.dialogue_ids());
  const auto want = [&](SubMetric m) {
    return std::find(builtin.begin(), builtin.end(), m) != builtin.end();
  };
  const bool want_sm = want(SubMetric::SM_LL) || want(SubMetric::SM_NCE) || want(SubMetric::SM_PPL);

  for (std::size_t row = 0; row < ds.size(); ++row) {
    const auto& d = ds.dialogues()[row];
    const auto& resp = d.response.tokens;
    if (want(SubMetric::FM)) {
      matrix.set(row, SubMetric::FM, fluency_score(*resources.language_model, resp, resources.kappa));
    }
    if (want(SubMetric::RM)) {
      std::vector<Tokens> ctx;
      for (const auto& u : d.context) ctx.push_back(u.tokens);
      matrix.set(row, SubMetric::RM, relevance_score(*resources.embeddings, ctx, resp));
    }
    if (want_sm) {
      const auto sm = specificity_scores(token_logprobs(*resources.language_model, resp));
      if (want(SubMetric::SM_LL)) matrix.set(row, SubMetric::SM_LL, sm.log_likelihood);
      if (want(SubMetric::SM_NCE)) matrix.set(row, SubMetric::SM_NCE, sm.neg_cross_entropy);
      if (want(SubMetric::SM_PPL)) matrix.set(row, SubMetric::SM_PPL, sm.perplexity);
    }
  }

  if (!external.empty()) {
    const auto ids = ds.dialogue_ids();
    for (const auto& file : external_files) {
      const auto ext = load_external_scores(file, ids, external);
      for (const auto& [key, score] : ext.scores) {
        if (std::find(external.begin(), external.end(), key.second) == external.end()) continue;
        if (auto row = matrix.row_of(key.first)) matrix.set(*row, key.second, score);
      }
    }
    const auto gaps = matrix.missing(external);
    if (!gaps.empty()) {
      std::string msg = "dataset \"" + ds.dataset_id() + "\": " + std::to_string(gaps.size()) +
                        " external scores missing, first " + describe(gaps.front());
      throw PipelineError(msg);
    }
  }
  return matrix;
}

// --- CSV ---

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string write_score_csv(const ScoreMatrix& scores) {
  std::string out = "dialogue_id";
  for (auto m : kAllSubMetrics) {
    out.push_back(',');
    out += name_of(m);
  }
  out.push_back('\n');
  for (std::size_t row = 0; row < scores.size(); ++row) {
    out += scores.dialogue_ids()[row];
    for (auto m : kAllSubMetrics) {
      out.push_back(',');
      if (auto v = scores.get(row, m)) out += format_double(*v);
    }
    out.push_back('\n');
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

ScoreMatrix read_score_csv(std::string_view csv, std::string dataset_id, std::string_view source) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ": empty score file");
  const auto header = split_csv_line(line);
  if (header.size() != kNumSubMetrics + 1 || header[0] != "dialogue_id") {
    throw DataError(std::string(source) + ": unexpected header \"" + line + "\"");
  }
  for (std::size_t k = 0; k < kNumSubMetrics; ++k) {
    if (header[k + 1] != name_of(kAllSubMetrics[k])) {
      throw DataError(std::string(source) + ": unexpected header \"" + line + "\"");
    }
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != kNumSubMetrics + 1) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(kNumSubMetrics + 1) + " fields");
    }
    ids.push_back(fields[0]);
    rows.push_back(std::move(fields));
  }
  ScoreMatrix matrix(std::move(dataset_id), ids);
  for (std::size_t row = 0; row < rows.size(); ++row) {
    for (std::size_t k = 0; k < kNumSubMetrics; ++k) {
      const auto& cell = rows[row][k + 1];
      if (cell.empty()) continue;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw DataError(std::string(source) + ":" + std::to_string(row + 2) + ": bad number \"" +
                        cell + "\"");
      }
      matrix.set(row, kAllSubMetrics[k], v);
    }
  }
  return matrix;
}

}  // namespace dialeval
