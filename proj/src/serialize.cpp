// Copyright 2026 The dialogue-debias Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "debias/serialize.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace debias {

namespace {

Json tokens_json(const TokenSeq& tokens) { return Json(tokens); }

TokenSeq tokens_from(const Json& j) { return j.get<TokenSeq>(); }

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

Json matrix_json(const std::vector<double>& data, size_t rows, size_t cols) {
  Json out = Json::array();
  for (size_t r = 0; r < rows; ++r) {
    out.push_back(std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                      data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
  }
  return out;
}

std::vector<double> matrix_from(const Json& j, size_t rows, size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows) throw ParseError(std::string(what) + ": wrong row count");
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const Json& row : j) {
    if (!row.is_array() || row.size() != cols) throw ParseError(std::string(what) + ": wrong row width");
    for (const Json& v : row) out.push_back(v.get<double>());
  }
  return out;
}

std::string hex(const unsigned char* bytes, size_t n) {
  std::ostringstream out;
  for (size_t i = 0; i < n; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(bytes[i]);
  return out.str();
}

}  // namespace

Json meta_json(const ArtifactMeta& meta) {
  return Json{{"config_hash", meta.config_hash}, {"seed", meta.seed}};
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("SHA-256 computation failed");
  }
  return hex(digest, len);
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const Json& json) {
  write_file(path, json.dump(2) + "\n");
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Json to_json(const BiasedTokenSet& set) {
  Json entries = Json::array();
  for (const BiasedEntry& e : set.entries) {
    entries.push_back(Json{{"ngram", tokens_json(e.ngram.tokens)}, {"score", e.score}});
  }
  return Json{{"criterion", criterion_name(set.criterion)},
              {"n", set.n},
              {"cutoff", set.cutoff_fraction},
              {"entries", entries}};
}

BiasedTokenSet biased_set_from_json(const Json& json) {
  try {
    BiasedTokenSet set;
    set.criterion = parse_criterion(json.at("criterion").get<std::string>());
    set.n = json.at("n").get<size_t>();
    set.cutoff_fraction = json.at("cutoff").get<double>();
    for (const Json& e : json.at("entries")) {
      set.entries.push_back({NGram{tokens_from(e.at("ngram"))}, e.at("score").get<double>()});
    }
    return set;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("biased set: ") + e.what());
  }
}

std::string pairs_to_jsonl(const std::vector<PositivePair>& pairs) {
  std::string out;
  for (const PositivePair& p : pairs) {
    out += Json{{"original", tokens_json(p.original)},
                {"debiased", tokens_json(p.debiased)},
                {"dialogue_id", p.dialogue_id},
                {"timestep", p.timestep},
                {"turn", p.turn}}
               .dump();
    out += "\n";
  }
  return out;
}

std::vector<PositivePair> pairs_from_jsonl(const std::string& text) {
  std::vector<PositivePair> pairs;
  size_t line_no = 0;
  for (const std::string& line : split_lines(text)) {
    ++line_no;
    try {
      const Json j = Json::parse(line);
      pairs.push_back({tokens_from(j.at("original")), tokens_from(j.at("debiased")),
                       j.at("dialogue_id").get<std::string>(), j.at("timestep").get<int>(),
                       j.value("turn", 0)});
    } catch (const Json::exception& e) {
      throw ParseError("pairs line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

std::string instances_to_jsonl(const std::vector<TimestepInstance>& instances) {
  std::string out;
  for (const TimestepInstance& inst : instances) {
    out += Json{{"dialogue_id", inst.dialogue_id},
                {"timestep", inst.timestep},
                {"turn", inst.turn},
                {"context", tokens_json(inst.context)},
                {"label", inst.label.key()}}
               .dump();
    out += "\n";
  }
  return out;
}

Json to_json(const EncoderModel& model) {
  return Json{{"format", "debias-encoder-v1"},
              {"vocab", model.vocab.tokens()},
              {"d", model.dim},
              {"embeddings", matrix_json(model.embeddings, model.vocab.size(), model.dim)},
              {"projection", matrix_json(model.projection, model.dim, model.dim)}};
}

EncoderModel encoder_from_json(const Json& json) {
  try {
    EncoderModel m;
    m.vocab = Vocab(json.at("vocab").get<std::vector<std::string>>());
    m.dim = json.at("d").get<size_t>();
    m.embeddings = matrix_from(json.at("embeddings"), m.vocab.size(), m.dim, "embeddings");
    m.projection = matrix_from(json.at("projection"), m.dim, m.dim, "projection");
    return m;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("encoder model: ") + e.what());
  }
}

std::string loss_curve_csv(const std::vector<LossPoint>& curve) {
  std::string out = "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const LossPoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", p.epoch, p.train_loss, p.val_loss);
    out += buf;
  }
  return out;
}

Json to_json(const LinearClassifier& c, const Featurizer& featurizer) {
  Json feat;
  if (const NgramVocab* vocab = featurizer.vocab()) {
    Json grams = Json::array();
    for (const NGram& g : vocab->ngrams()) grams.push_back(tokens_json(g.tokens));
    feat = Json{{"kind", "bag"}, {"n", vocab->n()}, {"ngrams", grams}};
  } else {
    feat = Json{{"kind", "encoder"}, {"d", featurizer.dim()}};
  }
  return Json{{"format", "debias-classifier-v1"},
              {"classes", c.classes},
              {"dim", c.dim},
              {"weights", matrix_json(c.weights, c.classes.size(), c.dim)},
              {"bias", c.bias},
              {"feature_mean", c.feature_mean},
              {"feature_scale", c.feature_scale},
              {"class_support", c.class_support},
              {"featurizer", feat}};
}

LinearClassifier classifier_from_json(const Json& json) {
  try {
    LinearClassifier c;
    c.classes = json.at("classes").get<std::vector<std::string>>();
    c.dim = json.at("dim").get<size_t>();
    c.weights = matrix_from(json.at("weights"), c.classes.size(), c.dim, "weights");
    c.bias = json.at("bias").get<std::vector<double>>();
    c.feature_mean = json.at("feature_mean").get<std::vector<double>>();
    c.feature_scale = json.at("feature_scale").get<std::vector<double>>();
    c.class_support = json.at("class_support").get<std::vector<int64_t>>();
    if (c.bias.size() != c.classes.size()) throw ParseError("classifier: bias size mismatch");
    return c;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("classifier: ") + e.what());
  }
}

Featurizer featurizer_from_json(const Json& json, const EncoderModel* encoder) {
  const Json& feat = json.at("featurizer");
  if (feat.at("kind") == "bag") {
    std::vector<NGram> grams;
    for (const Json& g : feat.at("ngrams")) grams.push_back(NGram{tokens_from(g)});
    return Featurizer(NgramVocab(feat.at("n").get<size_t>(), std::move(grams)));
  }
  if (encoder == nullptr) throw ConfigError("classifier uses encoder features; pass --encoder");
  if (encoder->dim != feat.at("d").get<size_t>()) {
    throw DomainError("encoder dimension does not match the classifier");
  }
  return Featurizer(*encoder);
}

Json to_json(const FilterReport& report) {
  Json iterations = Json::array();
  for (const FilterIteration& it : report.iterations) {
    iterations.push_back(Json{{"filtered", it.filtered},
                              {"retained", it.retained},
                              {"min_evaluations", it.min_evaluations},
                              {"entity_counts", it.entity_counts}});
  }
  return Json{{"initial", Json{{"retained", report.initial_size},
                               {"entity_counts", report.initial_counts}}},
              {"iterations", iterations},
              {"termination", termination_name(report.termination)}};
}

std::string retained_ids_text(const std::vector<TimestepInstance>& instances,
                              const std::vector<size_t>& retained) {
  std::string out;
  for (size_t i : retained) {
    const TimestepInstance& inst = instances.at(i);
    out += inst.dialogue_id + "\t" + std::to_string(inst.timestep) + "\t" +
           std::to_string(inst.turn) + "\n";
  }
  return out;
}

std::vector<size_t> retained_from_text(const std::vector<TimestepInstance>& instances,
                                       const std::string& text) {
  std::map<std::tuple<std::string, int, int>, size_t> index;
  for (size_t i = 0; i < instances.size(); ++i) {
    index.emplace(std::make_tuple(instances[i].dialogue_id, instances[i].timestep, instances[i].turn), i);
  }
  std::vector<size_t> out;
  size_t line_no = 0;
  for (const std::string& line : split_lines(text)) {
    ++line_no;
    std::istringstream in(line);
    std::string id;
    int timestep = 0;
    int turn = 0;
    if (!std::getline(in, id, '\t') || !(in >> timestep)) {
      throw ParseError("retained ids line " + std::to_string(line_no) + ": expected id<TAB>timestep");
    }
    if (!(in >> turn)) turn = -1;
    auto match = turn >= 0 ? index.find({id, timestep, turn}) : index.end();
    if (turn < 0) {
      for (auto it = index.lower_bound({id, timestep, 0}); it != index.end(); ++it) {
        if (std::get<0>(it->first) == id && std::get<1>(it->first) == timestep) {
          match = it;
          break;
        }
        if (std::get<0>(it->first) != id) break;
      }
    }
    if (match == index.end()) {
      throw ParseError("retained ids line " + std::to_string(line_no) + ": unknown instance");
    }
    out.push_back(match->second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Json to_json(const ResplitResult& r) {
  return Json{{"train", r.assignment.train_ids},
              {"test", r.assignment.test_ids},
              {"report", Json{{"overlap_after", r.report.overlap_after},
                              {"overlap_random_baseline", r.report.overlap_random_baseline},
                              {"train_dialogues", r.report.train_dialogues},
                              {"test_dialogues", r.report.test_dialogues},
                              {"qualifying_types", r.report.qualifying_types},
                              {"train_types", r.report.train_types},
                              {"test_types", r.report.test_types}}}};
}

Json to_json(const EvalReport& report) {
  Json per = Json::object();
  for (const auto& [entity, s] : report.per_entity) {
    per[entity] = Json{{"tp", s.tp}, {"predicted", s.predicted}, {"gold", s.gold},
                       {"precision", s.precision}, {"recall", s.recall}};
  }
  return Json{{"entity_f1", report.entity_f1},
              {"precision", report.precision},
              {"recall", report.recall},
              {"bleu", report.bleu},
              {"tp", report.tp},
              {"predicted_total", report.predicted_total},
              {"gold_total", report.gold_total},
              {"responses", report.responses},
              {"per_entity", per}};
}

std::string predictions_to_jsonl(const std::vector<PredictionRecord>& predictions) {
  std::string out;
  for (const PredictionRecord& p : predictions) {
    out += Json{{"dialogue_id", p.dialogue_id},
                {"turn", p.turn},
                {"timestep", p.timestep},
                {"predicted", p.predicted},
                {"gold", p.gold}}
               .dump();
    out += "\n";
  }
  return out;
}

Json to_json(const EntityHistogram& h, size_t head_k) {
  Json ranked = Json::array();
  for (const auto& [entity, count] : h.ranked) ranked.push_back(Json{{"entity", entity}, {"count", count}});
  return Json{{"total", h.total},
              {"head_k", head_k},
              {"head_share", h.head_share(head_k)},
              {"ranked", ranked}};
}

Json profile_summary_json(const NGramProfile& profile, size_t top) {
  const BiasedTokenSet ranked = rank_frequency(profile, 1.0);
  Json grams = Json::array();
  for (size_t i = 0; i < std::min(top, ranked.entries.size()); ++i) {
    grams.push_back(Json{{"ngram", tokens_json(ranked.entries[i].ngram.tokens)},
                         {"count", static_cast<int64_t>(ranked.entries[i].score)}});
  }
  return Json{{"n", profile.n},
              {"types", profile.counts.size()},
              {"occurrences", profile.total_occurrences},
              {"instances", profile.total_instances},
              {"label_counts", profile.entity_counts},
              {"top", grams}};
}

Json to_json(const EntityTrajectory& t) {
  Json rows = Json::array();
  for (size_t i = 0; i < t.entities.size(); ++i) {
    rows.push_back(Json{{"entity", t.entities[i]}, {"counts", t.counts[i]}});
  }
  return rows;
}

}  // namespace debias
