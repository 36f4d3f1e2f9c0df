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

#include "dialeval/pipeline.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dialeval/corpus.hpp"
#include "dialeval/error.hpp"
#include "dialeval/ngram.hpp"
#include "dialeval/report.hpp"
#include "dialeval/rng.hpp"
#include "json.hpp"

namespace dialeval {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const json& value, const std::string& what) {
  if (!value.is_string()) throw ConfigError(what + " must be a path string");
  fs::path p = value.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

std::vector<fs::path> resolve_list(const fs::path& base, const json& doc, const char* key) {
  std::vector<fs::path> out;
  auto it = doc.find(key);
  if (it == doc.end()) return out;
  if (!it->is_array()) throw ConfigError(std::string(key) + " must be an array of paths");
  for (const auto& v : *it) out.push_back(resolve(base, v, key));
  return out;
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

PowerPolicy parse_policy(const json& j) {
  PowerPolicy p;
  const auto mode = get_or<std::string>(j, "mode", "auto", "power_policy");
  if (mode == "fixed") {
    p.mode = PowerMode::fixed;
  } else if (mode != "auto") {
    throw ConfigError("power_policy.mode must be \"auto\" or \"fixed\"");
  }
  p.fixed_d = get_or<int>(j, "d", 1, "power_policy");
  p.d_max = get_or<int>(j, "d_max", std::max(6, p.fixed_d), "power_policy");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("power_policy: ") + e.what());
  }
  return p;
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  PipelineConfig cfg;
  cfg.dev_datasets = resolve_list(base_dir, doc, "dev_datasets");
  cfg.test_datasets = resolve_list(base_dir, doc, "test_datasets");

  if (auto it = doc.find("scorers"); it != doc.end()) {
    if (!it->is_object()) throw ConfigError("scorers must be an object");
    for (const auto& [name, source] : it->items()) {
      auto metric = parse_submetric(name);
      if (!metric) throw ConfigError("scorers: unknown sub-metric \"" + name + "\"");
      const auto s = source.is_string() ? source.get<std::string>() : std::string();
      if (s == "builtin") {
        cfg.scorers[*metric] = ScoreSource::builtin;
      } else if (s == "external") {
        cfg.scorers[*metric] = ScoreSource::external;
      } else {
        throw ConfigError("scorers." + name + " must be \"builtin\" or \"external\"");
      }
    }
  }
  if (auto it = doc.find("external_scores"); it != doc.end()) {
    if (!it->is_object()) throw ConfigError("external_scores must map dataset ids to paths");
    for (const auto& [ds, files] : it->items()) {
      auto& list = cfg.external_scores[ds];
      if (files.is_string()) {
        list.push_back(resolve(base_dir, files, "external_scores." + ds));
      } else if (files.is_array()) {
        for (const auto& f : files) list.push_back(resolve(base_dir, f, "external_scores." + ds));
      } else {
        throw ConfigError("external_scores." + ds + " must be a path or a list of paths");
      }
    }
  }
  if (auto it = doc.find("builtin"); it != doc.end() && !it->is_null()) {
    BuiltinScorerConfig b;
    if (it->contains("lm_corpus")) b.lm_corpus = resolve(base_dir, it->at("lm_corpus"), "builtin.lm_corpus");
    if (it->contains("embeddings")) b.embeddings = resolve(base_dir, it->at("embeddings"), "builtin.embeddings");
    b.ngram_order = get_or<int>(*it, "ngram_order", 3, "builtin");
    b.alpha = get_or<double>(*it, "alpha", 0.1, "builtin");
    if (auto k = it->find("kappa"); k != it->end() && !k->is_null()) {
      if (!k->is_number() || !(k->get<double>() > 0.0)) throw ConfigError("builtin.kappa must be positive");
      b.kappa = k->get<double>();
    }
    if (b.ngram_order < 1) throw ConfigError("builtin.ngram_order must be >= 1");
    if (!(b.alpha > 0.0)) throw ConfigError("builtin.alpha must be positive");
    cfg.builtin = b;
  }
  if (auto it = doc.find("power_policy"); it != doc.end()) cfg.power_policy = parse_policy(*it);

  cfg.sample_n = get_or<std::size_t>(doc, "sample_n", kDefaultSampleSize, "config");
  if (cfg.sample_n < 2) throw ConfigError("sample_n must be >= 2");
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0, "config");
  if (auto it = doc.find("out_dir"); it != doc.end()) cfg.out_dir = resolve(base_dir, *it, "out_dir");
  else cfg.out_dir = base_dir / "out";
  cfg.per_dataset_average = get_or<bool>(doc, "per_dataset_average", false, "config");

  if (auto it = doc.find("training_data"); it != doc.end() && !it->is_null()) {
    TrainingDataConfig t;
    if (!it->contains("dialogues")) throw ConfigError("training_data.dialogues is required");
    t.dialogues = resolve(base_dir, it->at("dialogues"), "training_data.dialogues");
    if (it->contains("response_pool")) {
      t.response_pool = resolve(base_dir, it->at("response_pool"), "training_data.response_pool");
    }
    if (it->contains("engagement")) {
      t.engagement = resolve(base_dir, it->at("engagement"), "training_data.engagement");
    }
    if (it->contains("stopwords")) {
      t.stopwords = resolve(base_dir, it->at("stopwords"), "training_data.stopwords");
    }
    t.stopword_delete_prob = get_or<double>(*it, "stopword_delete_prob", 0.5, "training_data");
    t.word_drop_fraction = get_or<double>(*it, "word_drop_fraction", 0.25, "training_data");
    t.candidate_pool_size = get_or<std::size_t>(*it, "candidate_pool_size", 10, "training_data");
    t.repeat_span_max = get_or<std::size_t>(*it, "repeat_span_max", 3, "training_data");
    t.middle_offset = get_or<int>(*it, "middle_offset", 0, "training_data");
    cfg.training_data = t;
  }
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot write " + path.string());
  out << text;
  if (!out) throw PipelineError("failed writing " + path.string());
}

std::string file_stem_for(const std::string& dataset_id) {
  std::string s = dataset_id;
  for (auto& c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (!(std::isalnum(u) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string policy_name(const PowerPolicy& p) {
  return p.mode == PowerMode::fixed ? "fixed d=" + std::to_string(p.fixed_d) : std::string("auto");
}

struct Options {
  fs::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out_dir;
  std::optional<fs::path> weights_path;
  std::optional<std::string> quality;
  bool uniform_quality_average = false;
  bool per_dataset_average = false;
  std::optional<int> power_d;
  std::vector<std::string> drops;
  bool no_renormalize = false;
};

class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, const Options& opts, std::ostream& out, std::ostream& err)
      : cfg_(std::move(cfg)), opts_(opts), out_(out), err_(err) {
    if (opts.seed) cfg_.seed = *opts.seed;
    if (opts.out_dir) cfg_.out_dir = *opts.out_dir;
    if (opts.power_d) cfg_.power_policy = PowerPolicy::fixed(*opts.power_d);
    if (opts.per_dataset_average) cfg_.per_dataset_average = true;
  }

  void build_training_data();
  void score();
  void fit_weights();
  void compose_scores();
  void evaluate();
  void ablate_groups();

 private:
  fs::path weights_path() const {
    return opts_.weights_path ? *opts_.weights_path : cfg_.out_dir / "weights.json";
  }
  fs::path scores_path(const std::string& dataset_id) const {
    return cfg_.out_dir / "scores" / (file_stem_for(dataset_id) + ".csv");
  }

  std::vector<AnnotatedDataset> load_all(const std::vector<fs::path>& paths, const char* what) const;
  ScoreMatrix compute_scores(const AnnotatedDataset& ds);
  ScoreMatrix obtain_scores(const AnnotatedDataset& ds);
  const BuiltinResources& builtin_resources();
  void require_bindings() const;
  json run_metadata() const;
  MetricVector single_weights(const WeightTable& table) const;
  WeightResolver resolver_for(const WeightTable& table);

  PipelineConfig cfg_;
  const Options& opts_;
  std::ostream& out_;
  std::ostream& err_;

  std::unique_ptr<NgramModel> lm_;
  std::unique_ptr<EmbeddingTable> embeddings_;
  std::optional<BuiltinResources> resources_;
};

std::vector<AnnotatedDataset> Pipeline::load_all(const std::vector<fs::path>& paths,
                                                 const char* what) const {
  if (paths.empty()) throw ConfigError(std::string("config lists no ") + what);
  std::vector<AnnotatedDataset> out;
  std::set<std::string> ids;
  for (const auto& p : paths) {
    auto ds = load_dataset(p);
    if (!ids.insert(ds.dataset_id()).second) {
      throw DataError("dataset id \"" + ds.dataset_id() + "\" appears twice among " + what);
    }
    for (const auto& v : validate_dataset(ds)) {
      if (v.invariant == "constant annotation") {
        err_ << "warning: " << ds.dataset_id() << ": " << v.invariant << " (" << v.id << ")\n";
      } else {
        throw DataError("dataset \"" + ds.dataset_id() + "\": " + v.invariant + " (" + v.id + ")");
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

void Pipeline::require_bindings() const {
  std::string missing;
  for (auto m : kAllSubMetrics) {
    if (cfg_.scorers[m] == ScoreSource::unbound) missing += " " + std::string(name_of(m));
  }
  if (!missing.empty()) throw ConfigError("scorers: unbound sub-metrics:" + missing);
}

const BuiltinResources& Pipeline::builtin_resources() {
  if (resources_) return *resources_;
  BuiltinResources r;
  const auto builtin = cfg_.scorers.with(ScoreSource::builtin);
  const bool needs_lm = std::any_of(builtin.begin(), builtin.end(), [](SubMetric m) {
    return m == SubMetric::FM || group_of(m) == MetricGroup::specificity;
  });
  const bool needs_emb =
      std::find(builtin.begin(), builtin.end(), SubMetric::RM) != builtin.end();
  if ((needs_lm || needs_emb) && !cfg_.builtin) {
    throw ConfigError("built-in scorers are bound but the config has no \"builtin\" section");
  }
  if (needs_lm) {
    if (cfg_.builtin->lm_corpus.empty()) throw ConfigError("builtin.lm_corpus is required");
    std::vector<Tokens> corpus;
    std::istringstream in(read_text(cfg_.builtin->lm_corpus));
    std::string line;
    while (std::getline(in, line)) {
      auto t = tokenize(line);
      if (!t.empty()) corpus.push_back(std::move(t));
    }
    if (corpus.empty()) throw DataError("language-model corpus " + cfg_.builtin->lm_corpus.string() + " is empty");
    lm_ = std::make_unique<NgramModel>(
        NgramModel::train(corpus, cfg_.builtin->ngram_order, cfg_.builtin->alpha));
    r.language_model = lm_.get();
    r.kappa = cfg_.builtin->kappa ? *cfg_.builtin->kappa : median_perplexity(*lm_, corpus);
  }
  if (needs_emb) {
    if (cfg_.builtin->embeddings.empty()) throw ConfigError("builtin.embeddings is required");
    embeddings_ = std::make_unique<EmbeddingTable>(EmbeddingTable::load(cfg_.builtin->embeddings));
    r.embeddings = embeddings_.get();
  }
  resources_ = r;
  return *resources_;
}

ScoreMatrix Pipeline::compute_scores(const AnnotatedDataset& ds) {
  require_bindings();
  std::vector<fs::path> files;
  if (auto it = cfg_.external_scores.find(ds.dataset_id()); it != cfg_.external_scores.end()) {
    files = it->second;
  }
  if (!cfg_.scorers.with(ScoreSource::external).empty() && files.empty()) {
    throw ConfigError("external_scores has no file for dataset \"" + ds.dataset_id() + "\"");
  }
  return score_dataset(ds, cfg_.scorers, builtin_resources(), files);
}

ScoreMatrix Pipeline::obtain_scores(const AnnotatedDataset& ds) {
  const auto path = scores_path(ds.dataset_id());
  if (!fs::exists(path)) return compute_scores(ds);
  auto scores = read_score_csv(read_text(path), ds.dataset_id(), path.string());
  for (const auto& d : ds.dialogues()) {
    if (!scores.row_of(d.dialogue_id)) {
      throw PipelineError(path.string() + " has no row for dialogue \"" + d.dialogue_id + "\"");
    }
  }
  return scores;
}

json Pipeline::run_metadata() const {
  const auto& p = cfg_.power_policy;
  return {{"seed", cfg_.seed},
          {"sample_n", cfg_.sample_n},
          {"policy", {{"mode", p.mode == PowerMode::fixed ? "fixed" : "auto"},
                      {"fixed_d", p.fixed_d},
                      {"d_max", p.d_max}}}};
}

void Pipeline::build_training_data() {
  if (!cfg_.training_data) throw ConfigError("config has no \"training_data\" section");
  const auto& t = *cfg_.training_data;
  const auto ds = load_dataset(t.dialogues);

  SamplingParams params;
  if (t.stopwords) params.stopwords = load_stopwords(*t.stopwords);
  params.stopword_delete_prob = t.stopword_delete_prob;
  params.word_drop_fraction = t.word_drop_fraction;
  params.candidate_pool_size = t.candidate_pool_size;
  params.repeat_span_max = t.repeat_span_max;
  params.middle_offset = t.middle_offset;
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("training_data: ") + e.what());
  }

  std::vector<Tokens> responses;
  for (const auto& d : ds.dialogues()) responses.push_back(d.response.tokens);

  params.seed = stage_seed(cfg_.seed, "fluency");
  const auto fluency = build_fluency_set(responses, params);
  for (auto i : fluency.skipped) {
    err_ << "warning: fluency: skipped degenerate response " << ds.dialogues()[i].dialogue_id << "\n";
  }
  write_text(cfg_.out_dir / "fluency.jsonl", to_jsonl(std::span<const LabeledUtterance>(fluency.items)));

  std::vector<Tokens> pool;
  if (t.response_pool) {
    std::istringstream in(read_text(*t.response_pool));
    std::string line;
    while (std::getline(in, line)) {
      auto tokens = tokenize(line);
      if (!tokens.empty()) pool.push_back(std::move(tokens));
    }
  } else {
    pool = responses;
  }
  if (pool.size() < params.candidate_pool_size) {
    throw PipelineError("response pool has " + std::to_string(pool.size()) +
                        " responses, fewer than candidate_pool_size");
  }

  std::unique_ptr<EmbeddingTable> table;
  Similarity similarity;
  if (cfg_.builtin && !cfg_.builtin->embeddings.empty()) {
    table = std::make_unique<EmbeddingTable>(EmbeddingTable::load(cfg_.builtin->embeddings));
    similarity = embedding_similarity(*table);
  } else {
    throw ConfigError("build-training-data needs builtin.embeddings for middle-negative sampling");
  }
  params.seed = stage_seed(cfg_.seed, "relevance");
  const auto relevance = build_relevance_set(ds.dialogues(), pool, params, similarity);
  write_text(cfg_.out_dir / "relevance.jsonl", to_jsonl(std::span<const LabeledPair>(relevance.items)));

  std::size_t engagement_count = 0;
  if (t.engagement) {
    std::string jsonl;
    std::istringstream in(read_text(*t.engagement));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = t.engagement->string() + ":" + std::to_string(line_no);
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        throw DataError(where + ": malformed JSON");
      }
      if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string() ||
          !rec.contains("score") || !rec["score"].is_number()) {
        throw DataError(where + ": expected {\"text\": str, \"score\": number}");
      }
      double scaled = 0.0;
      try {
        scaled = scale_engagement(rec["score"].get<double>());
      } catch (const std::out_of_range& e) {
        throw DataError(where + ": " + e.what());
      }
      json outrec{{"tokens", tokenize(rec["text"].get<std::string>())},
                  {"label", scaled},
                  {"provenance", "engagement_scaled"}};
      jsonl += outrec.dump() + "\n";
      ++engagement_count;
    }
    write_text(cfg_.out_dir / "engagement.jsonl", jsonl);
  }
  out_ << "fluency: " << fluency.items.size() << " examples (" << fluency.skipped.size()
       << " skipped)\nrelevance: " << relevance.items.size() << " examples\n";
  if (t.engagement) out_ << "engagement: " << engagement_count << " examples\n";
}

void Pipeline::score() {
  require_bindings();
  auto datasets = load_all(cfg_.dev_datasets, "dev_datasets");
  if (!cfg_.test_datasets.empty()) {
    auto test = load_all(cfg_.test_datasets, "test_datasets");
    std::set<std::string> seen;
    for (const auto& d : datasets) seen.insert(d.dataset_id());
    for (auto& d : test) {
      if (seen.insert(d.dataset_id()).second) datasets.push_back(std::move(d));
    }
  }
  for (const auto& ds : datasets) {
    const auto matrix = compute_scores(ds);
    write_text(scores_path(ds.dataset_id()), write_score_csv(matrix));
    out_ << ds.dataset_id() << ": " << matrix.entry_count() << " scores\n";
  }
}

void Pipeline::fit_weights() {
  const auto datasets = load_all(cfg_.dev_datasets, "dev_datasets");
  std::vector<DatasetWeights> fitted;
  const auto base = stage_seed(cfg_.seed, "fit-sample");
  for (const auto& ds : datasets) {
    const auto scores = obtain_scores(ds);
    auto dw = fit_dataset_weights(ds, scores, cfg_.power_policy, cfg_.sample_n,
                                  mix_seed(base, hash_name(ds.dataset_id())));
    for (const auto& w : dw.warnings) err_ << "warning: " << w << "\n";
    fitted.push_back(std::move(dw));
  }
  auto table = average_weights(fitted);
  table.policy = cfg_.power_policy;
  write_text(weights_path(), weight_table_to_json(table));
  out_ << "fitted " << table.weights.size() << " qualities over " << fitted.size()
       << " datasets (" << policy_name(cfg_.power_policy) << ") -> " << weights_path().string() << "\n";
}

MetricVector Pipeline::single_weights(const WeightTable& table) const {
  if (opts_.uniform_quality_average) return uniform_quality_average(table);
  auto it = table.weights.find(*opts_.quality);
  if (it == table.weights.end()) {
    throw PipelineError("weight table has no quality \"" + *opts_.quality + "\"");
  }
  return it->second;
}

void Pipeline::compose_scores() {
  if (!opts_.quality && !opts_.uniform_quality_average) {
    throw ConfigError("compose needs --quality NAME or --uniform-quality-average");
  }
  const auto table = weight_table_from_json(read_text(weights_path()), weights_path().string());
  const auto weights = single_weights(table);
  const std::string label = opts_.quality ? *opts_.quality : "uniform-quality-average";
  for (const auto& ds : load_all(cfg_.test_datasets, "test_datasets")) {
    const auto composed = compose(obtain_scores(ds), weights, label);
    const auto path = cfg_.out_dir / "composed" / (file_stem_for(ds.dataset_id()) + ".csv");
    write_text(path, write_composed_csv(composed));
    out_ << ds.dataset_id() << ": " << composed.scores.size() << " composed scores -> "
         << path.string() << "\n";
  }
}

WeightResolver Pipeline::resolver_for(const WeightTable& table) {
  if (opts_.quality || opts_.uniform_quality_average) {
    const auto w = single_weights(table);
    return [w](const std::string&, const std::string&) { return w; };
  }
  auto fallback = uniform_quality_average(table);
  return [&table, fallback, this](const std::string& ds, const std::string& quality) {
    auto it = table.weights.find(quality);
    if (it != table.weights.end()) return it->second;
    err_ << "warning: " << ds << ": no fitted weights for quality \"" << quality
         << "\", using the quality-averaged weights\n";
    return fallback;
  };
}

void Pipeline::evaluate() {
  const auto table = weight_table_from_json(read_text(weights_path()), weights_path().string());
  const auto datasets = load_all(cfg_.test_datasets, "test_datasets");
  for (const auto& ds : datasets) {
    if (!ds.has_annotations()) {
      throw PipelineError("test dataset \"" + ds.dataset_id() + "\" has no human annotations");
    }
  }
  std::vector<ScoreMatrix> scores;
  for (const auto& ds : datasets) scores.push_back(obtain_scores(ds));

  std::vector<EvaluationReport> reports;
  reports.push_back(evaluate_datasets(datasets, scores, resolver_for(table), "MME-CRS",
                                      cfg_.per_dataset_average));
  reports.push_back(evaluate_datasets(
      datasets, scores, [](const std::string&, const std::string&) { return uniform_weights(); },
      "MME-Avg", cfg_.per_dataset_average));
  json docs = json::array();
  for (auto& r : reports) {
    r.metadata = run_metadata();
    docs.push_back(report_to_json(r));
  }
  const json doc{{"reports", std::move(docs)}, {"generated_at", utc_timestamp()}};
  write_text(cfg_.out_dir / "report.json", doc.dump(2) + "\n");
  out_ << format_report_table(reports);
}

void Pipeline::ablate_groups() {
  const auto table = weight_table_from_json(read_text(weights_path()), weights_path().string());
  const auto datasets = load_all(cfg_.test_datasets, "test_datasets");
  for (const auto& ds : datasets) {
    if (!ds.has_annotations()) {
      throw PipelineError("test dataset \"" + ds.dataset_id() + "\" has no human annotations");
    }
  }
  std::vector<ScoreMatrix> scores;
  for (const auto& ds : datasets) scores.push_back(obtain_scores(ds));

  std::vector<AblationSpec> specs;
  for (const auto& drop : opts_.drops) {
    AblationSpec spec;
    std::stringstream ss(drop);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      auto g = parse_group(name);
      if (!g) throw ConfigError("--drop: unknown metric group \"" + name + "\"");
      spec.dropped_groups.insert(*g);
    }
    specs.push_back(spec);
  }
  if (specs.empty()) {
    for (auto g : kAllGroups) specs.push_back({{g}, true});
    specs.push_back({{MetricGroup::relevance, MetricGroup::topic_coherence}, true});
  }
  for (auto& s : specs) {
    s.renormalize = !opts_.no_renormalize;
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  std::vector<EvaluationReport> reports;
  reports.push_back(evaluate_datasets(datasets, scores, resolver_for(table), "MME-CRS",
                                      cfg_.per_dataset_average));
  for (const auto& spec : specs) {
    auto ablated = ablate(table, spec);
    for (const auto& w : ablated.warnings) err_ << "warning: " << w << "\n";
    // The resolver keeps a reference to the table it was built from.
    auto owned = std::make_shared<WeightTable>(std::move(ablated.table));
    auto resolve = resolver_for(*owned);
    reports.push_back(evaluate_datasets(
        datasets, scores,
        [owned, resolve](const std::string& ds, const std::string& q) { return resolve(ds, q); },
        spec.label(), cfg_.per_dataset_average));
  }
  json docs = json::array();
  for (auto& r : reports) {
    r.metadata = run_metadata();
    docs.push_back(report_to_json(r));
  }
  const json doc{{"reports", std::move(docs)}, {"generated_at", utc_timestamp()}};
  write_text(cfg_.out_dir / "ablation.json", doc.dump(2) + "\n");
  out_ << format_report_table(reports);
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reference-free dialogue evaluation with correlation re-scaled metric composition",
               "dialeval"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opts;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string weights;
  app.add_option("--config", opts.config_path, "Pipeline configuration (JSON)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (overrides the config)");
  auto* weights_opt = app.add_option("--weights", weights, "Weight table path (default OUT/weights.json)");

  auto add_quality_flags = [&](CLI::App* cmd) {
    auto* q = cmd->add_option("--quality", opts.quality, "Compose with this quality's weights");
    auto* u = cmd->add_flag("--uniform-quality-average", opts.uniform_quality_average,
                            "Compose with the mean of all per-quality weights");
    q->excludes(u);
  };

  auto* build = app.add_subcommand("build-training-data", "Sample labeled fluency/relevance/engagement sets");
  auto* score = app.add_subcommand("score", "Score every dataset with the bound sub-metrics");
  auto* fit = app.add_subcommand("fit-weights", "Fit per-quality sub-metric weights on dev datasets");
  fit->add_option("--power", opts.power_d, "Use a fixed power d instead of the configured policy")
      ->check(CLI::Range(1, 64));
  auto* comp = app.add_subcommand("compose", "Write one composed score per test dialogue");
  add_quality_flags(comp);
  auto* eval = app.add_subcommand("evaluate", "Spearman of composed scores against human scores");
  add_quality_flags(eval);
  eval->add_flag("--per-dataset-average", opts.per_dataset_average,
                 "Average within each dataset before averaging datasets");
  auto* abl = app.add_subcommand("ablate", "Evaluate with metric groups removed");
  add_quality_flags(abl);
  abl->add_option("--drop", opts.drops, "Comma-separated groups to drop (repeatable)");
  abl->add_flag("--no-renormalize", opts.no_renormalize, "Keep the surviving weights unscaled");
  abl->add_flag("--per-dataset-average", opts.per_dataset_average,
                "Average within each dataset before averaging datasets");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (*seed_opt) opts.seed = seed;
  if (*out_opt) opts.out_dir = fs::path(out_dir);
  if (*weights_opt) opts.weights_path = fs::path(weights);

  try {
    Pipeline pipeline(load_config(opts.config_path), opts, out, err);
    if (build->parsed()) pipeline.build_training_data();
    else if (score->parsed()) pipeline.score();
    else if (fit->parsed()) pipeline.fit_weights();
    else if (comp->parsed()) pipeline.compose_scores();
    else if (eval->parsed()) pipeline.evaluate();
    else if (abl->parsed()) pipeline.ablate_groups();
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dialeval
