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

#include "debias/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "debias/corpus.hpp"
#include "debias/rng.hpp"

namespace debias {

namespace {

const char* feature_kind_name(FeatureKind k) { return k == FeatureKind::kEncoder ? "encoder" : "bag"; }

const char* standardize_name(Standardize s) {
  switch (s) {
    case Standardize::kOn: return "on";
    case Standardize::kOff: return "off";
    case Standardize::kAuto: break;
  }
  return "auto";
}

Standardize parse_standardize(const std::string& s) {
  if (s == "auto") return Standardize::kAuto;
  if (s == "on") return Standardize::kOn;
  if (s == "off") return Standardize::kOff;
  throw ConfigError("classifier.standardize must be auto, on or off");
}

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "encoder") return FeatureKind::kEncoder;
  if (s == "bag") return FeatureKind::kBag;
  throw ConfigError("unknown feature kind '" + s + "' (expected encoder or bag)");
}

void reject_unknown(const Json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const Json& obj, const char* key, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

Json PipelineConfig::to_json() const {
  std::vector<std::string> kinds;
  for (PerturbKind k : perturb_kinds) kinds.push_back(perturb_kind_name(k));
  return Json{
      {"corpus", Json{{"train", train_path.string()},
                      {"test", test_path.string()},
                      {"decorrelated_test", decorrelated_test_path.string()},
                      {"schema", schema}}},
      {"seed", seed},
      {"stages", stages},
      {"bias", Json{{"n", n}, {"cutoff", cutoff}, {"criterion", criterion_name(criterion)}}},
      {"contrastive", Json{{"epochs", contrastive.epochs},
                           {"learning_rate", contrastive.learning_rate},
                           {"batch_size", contrastive.batch_size},
                           {"temperature", contrastive.temperature},
                           {"dim", contrastive.dim},
                           {"validation_fraction", contrastive.validation_fraction}}},
      {"classifier", Json{{"epochs", classifier.epochs},
                          {"learning_rate", classifier.learning_rate},
                          {"l2", classifier.l2},
                          {"standardize", standardize_name(classifier.standardize)},
                          {"tolerance", classifier.tolerance},
                          {"features", feature_kind_name(classifier_features)},
                          {"bag_order", bag_order}}},
      {"filter", Json{{"num_learners", filter.num_learners},
                      {"train_fraction", filter.train_fraction},
                      {"accuracy_threshold", filter.accuracy_threshold},
                      {"min_filtered", filter.min_filtered},
                      {"max_iterations", filter.max_iterations},
                      {"denominator", filter.denominator == EasinessDenominator::kEvaluators
                                          ? "evaluators"
                                          : "all_learners"},
                      {"features", feature_kind_name(af_features)},
                      {"learner_epochs", filter.learner.epochs},
                      {"learner_learning_rate", filter.learner.learning_rate},
                      {"learner_tolerance", filter.learner.tolerance}}},
      {"perturb", Json{{"kinds", kinds},
                       {"rate", perturb_rate},
                       {"lexicon", lexicon_path.string()},
                       {"distractors", distractors_path.string()}}},
      {"resplit", Json{{"min_freq", resplit.min_freq},
                       {"train_share", resplit.train_share},
                       {"weighting", resplit.weighting == OverlapWeighting::kOccurrence ? "occurrence"
                                                                                       : "type"},
                       {"baseline_splits", resplit.baseline_splits}}},
      {"head_k", head_k}};
}

std::string PipelineConfig::hash() const { return sha256_hex(to_json().dump()); }

PipelineConfig pipeline_config_from_json(const Json& json, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  reject_unknown(json, {"corpus", "output_dir", "seed", "stages", "bias", "contrastive",
                        "classifier", "filter", "perturb", "resplit", "head_k"},
                 "config");
  if (!json.contains("corpus")) throw ConfigError("config needs a corpus section");
  const Json& corpus = json.at("corpus");
  reject_unknown(corpus, {"train", "test", "decorrelated_test", "schema"}, "corpus");
  std::string train, test, decor, out = "out";
  read(corpus, "train", train);
  read(corpus, "test", test);
  read(corpus, "decorrelated_test", decor);
  read(corpus, "schema", c.schema);
  if (train.empty()) throw ConfigError("corpus.train is required");
  c.train_path = resolve(base_dir, train);
  c.test_path = resolve(base_dir, test);
  c.decorrelated_test_path = resolve(base_dir, decor);
  read(json, "output_dir", out);
  c.output_dir = resolve(base_dir, out);
  read(json, "seed", c.seed);
  read(json, "head_k", c.head_k);
  if (json.contains("stages")) {
    read(json, "stages", c.stages);
    for (const std::string& s : c.stages) {
      if (std::find(kAllStages.begin(), kAllStages.end(), s) == kAllStages.end()) {
        throw ConfigError("unknown stage '" + s + "'");
      }
    }
  }

  if (json.contains("bias")) {
    const Json& b = json.at("bias");
    reject_unknown(b, {"n", "cutoff", "criterion"}, "bias");
    read(b, "n", c.n);
    read(b, "cutoff", c.cutoff);
    std::string crit = criterion_name(c.criterion);
    read(b, "criterion", crit);
    c.criterion = parse_criterion(crit);
  }
  if (c.n < 1) throw ConfigError("bias.n must be >= 1");
  cutoff_count(c.cutoff, 1);

  if (json.contains("contrastive")) {
    const Json& t = json.at("contrastive");
    reject_unknown(t, {"epochs", "learning_rate", "batch_size", "temperature", "dim",
                       "validation_fraction"},
                   "contrastive");
    read(t, "epochs", c.contrastive.epochs);
    read(t, "learning_rate", c.contrastive.learning_rate);
    read(t, "batch_size", c.contrastive.batch_size);
    read(t, "temperature", c.contrastive.temperature);
    read(t, "dim", c.contrastive.dim);
    read(t, "validation_fraction", c.contrastive.validation_fraction);
  }
  if (json.contains("classifier")) {
    const Json& k = json.at("classifier");
    reject_unknown(k, {"epochs", "learning_rate", "l2", "standardize", "tolerance", "features",
                       "bag_order"},
                   "classifier");
    read(k, "epochs", c.classifier.epochs);
    read(k, "learning_rate", c.classifier.learning_rate);
    read(k, "l2", c.classifier.l2);
    std::string st = standardize_name(c.classifier.standardize);
    read(k, "standardize", st);
    c.classifier.standardize = parse_standardize(st);
    read(k, "tolerance", c.classifier.tolerance);
    read(k, "bag_order", c.bag_order);
    std::string f = feature_kind_name(c.classifier_features);
    read(k, "features", f);
    c.classifier_features = parse_feature_kind(f);
  }
  if (json.contains("filter")) {
    const Json& f = json.at("filter");
    reject_unknown(f, {"num_learners", "train_fraction", "accuracy_threshold", "min_filtered",
                       "max_iterations", "denominator", "features", "learner_epochs",
                       "learner_learning_rate", "learner_tolerance"},
                   "filter");
    read(f, "num_learners", c.filter.num_learners);
    read(f, "train_fraction", c.filter.train_fraction);
    read(f, "accuracy_threshold", c.filter.accuracy_threshold);
    read(f, "min_filtered", c.filter.min_filtered);
    read(f, "max_iterations", c.filter.max_iterations);
    read(f, "learner_epochs", c.filter.learner.epochs);
    read(f, "learner_learning_rate", c.filter.learner.learning_rate);
    read(f, "learner_tolerance", c.filter.learner.tolerance);
    std::string denom = "evaluators";
    read(f, "denominator", denom);
    if (denom == "evaluators") c.filter.denominator = EasinessDenominator::kEvaluators;
    else if (denom == "all_learners") c.filter.denominator = EasinessDenominator::kAllLearners;
    else throw ConfigError("filter.denominator must be evaluators or all_learners");
    std::string feat = feature_kind_name(c.af_features);
    read(f, "features", feat);
    c.af_features = parse_feature_kind(feat);
  }
  c.filter.validate();
  if (json.contains("perturb")) {
    const Json& p = json.at("perturb");
    reject_unknown(p, {"kinds", "rate", "lexicon", "distractors"}, "perturb");
    if (p.contains("kinds")) {
      c.perturb_kinds.clear();
      std::vector<std::string> kinds;
      read(p, "kinds", kinds);
      for (const std::string& k : kinds) c.perturb_kinds.push_back(parse_perturb_kind(k));
    }
    read(p, "rate", c.perturb_rate);
    std::string lex, dis;
    read(p, "lexicon", lex);
    read(p, "distractors", dis);
    c.lexicon_path = resolve(base_dir, lex);
    c.distractors_path = resolve(base_dir, dis);
  }
  if (json.contains("resplit")) {
    const Json& r = json.at("resplit");
    reject_unknown(r, {"min_freq", "train_share", "weighting", "baseline_splits"}, "resplit");
    read(r, "min_freq", c.resplit.min_freq);
    read(r, "train_share", c.resplit.train_share);
    read(r, "baseline_splits", c.resplit.baseline_splits);
    std::string w = "occurrence";
    read(r, "weighting", w);
    if (w == "occurrence") c.resplit.weighting = OverlapWeighting::kOccurrence;
    else if (w == "type") c.resplit.weighting = OverlapWeighting::kType;
    else throw ConfigError("resplit.weighting must be occurrence or type");
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  Json json;
  try {
    json = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return pipeline_config_from_json(json, path.parent_path());
}

namespace {

class Runner {
 public:
  explicit Runner(const PipelineConfig& cfg)
      : cfg_(cfg), out_(cfg.output_dir), meta_{cfg.hash(), cfg.seed} {}

  RunOutcome run() {
    RunOutcome outcome;
    std::filesystem::create_directories(out_);
    for (const std::string& stage : kAllStages) {
      if (std::find(cfg_.stages.begin(), cfg_.stages.end(), stage) == cfg_.stages.end()) continue;
      try {
        dispatch(stage);
      } catch (const std::exception& e) {
        outcome.ok = false;
        outcome.failed_stage = stage;
        outcome.error = e.what();
        break;
      }
    }
    outcome.artifacts.assign(artifacts_.begin(), artifacts_.end());
    write_manifest(outcome);
    return outcome;
  }

 private:
  bool enabled(const std::string& stage) const {
    return std::find(cfg_.stages.begin(), cfg_.stages.end(), stage) != cfg_.stages.end();
  }

  void dispatch(const std::string& stage) {
    if (stage == "analyze") analyze();
    else if (stage == "bias_id") bias_id();
    else if (stage == "pairs") pairs_stage();
    else if (stage == "pretrain") pretrain();
    else if (stage == "af") af();
    else if (stage == "finetune") finetune();
    else if (stage == "resplit") resplit_stage();
    else if (stage == "perturb") perturb_stage();
    else if (stage == "evaluate") evaluate();
    else if (stage == "probe") probe();
    else if (stage == "report") report();
  }

  Json stamp(Json body) const {
    body["meta"] = meta_json(meta_);
    body["config"] = cfg_.to_json();
    return body;
  }

  void emit(const std::string& rel, std::string_view bytes) {
    write_file(out_ / rel, bytes);
    if (std::find(artifacts_.begin(), artifacts_.end(), rel) == artifacts_.end()) {
      artifacts_.push_back(rel);
    }
  }
  void emit_json(const std::string& rel, const Json& j) { emit(rel, j.dump(2) + "\n"); }

  const std::vector<Dialogue>& train() {
    if (!train_) train_ = load_corpus(cfg_.train_path, schema_by_id(cfg_.schema));
    return *train_;
  }
  const std::vector<Dialogue>& test() {
    if (cfg_.test_path.empty()) throw ConfigError("this stage needs corpus.test");
    if (!test_) test_ = load_corpus(cfg_.test_path, schema_by_id(cfg_.schema));
    return *test_;
  }
  const std::vector<TimestepInstance>& instances() {
    if (!instances_) instances_ = build_corpus_instances(train());
    return *instances_;
  }
  const BiasedTokenSet& biased() {
    if (!biased_) biased_ = biased_set_from_json(read_json(out_ / "biased_set.json"));
    return *biased_;
  }
  const std::vector<PositivePair>& pairs() {
    if (!pairs_) pairs_ = pairs_from_jsonl(read_file(out_ / "pairs.jsonl"));
    return *pairs_;
  }
  const EncoderModel& encoder() {
    if (!encoder_) encoder_ = encoder_from_json(read_json(out_ / "encoder.json"));
    return *encoder_;
  }

  Featurizer make_featurizer(FeatureKind kind) {
    if (kind == FeatureKind::kEncoder) return Featurizer(encoder());
    std::vector<TokenSeq> contexts;
    for (const TimestepInstance& inst : instances()) contexts.push_back(inst.context);
    return Featurizer(NgramVocab::build(contexts, cfg_.bag_order));
  }

  void analyze() {
    const EntityHistogram h = entity_histogram(train());
    emit_json("histogram.json", stamp(Json{{"histogram", to_json(h, cfg_.head_k)}}));
    emit_json("profile.json",
              stamp(Json{{"profile", profile_summary_json(build_profile(instances(), cfg_.n), 50)}}));
    emit("instances.jsonl", instances_to_jsonl(instances()));
  }

  void bias_id() {
    biased_ = identify_biased(instances(), cfg_.criterion, cfg_.n, cfg_.cutoff);
    Json j = to_json(*biased_);
    j["meta"] = meta_json(meta_);
    emit_json("biased_set.json", j);
  }

  void pairs_stage() {
    pairs_ = build_positive_pairs(instances(), biased());
    emit("pairs.jsonl", pairs_to_jsonl(*pairs_));
  }

  void pretrain() {
    TrainConfig tc = cfg_.contrastive;
    tc.seed = derive_seed(cfg_.seed, "contrastive");
    const ContrastiveResult r = train_contrastive(pairs(), tc);
    encoder_ = r.model;
    Json model = to_json(r.model);
    model["meta"] = meta_json(meta_);
    emit_json("encoder.json", model);
    emit("loss_curve.csv", loss_curve_csv(r.curve));
    const std::vector<size_t>& held = r.validation_indices;
    pretrain_summary_ = Json{{"best_epoch", r.best_epoch},
                             {"validation_pairs", held.size()},
                             {"cosine_before", mean_pair_cosine(r.initial, pairs(), held)},
                             {"cosine_after", mean_pair_cosine(r.model, pairs(), held)}};
    emit_json("pretrain.json", stamp(Json{{"pretrain", pretrain_summary_}}));
  }

  void af() {
    const Featurizer featurizer = make_featurizer(cfg_.af_features);
    std::vector<std::string> labels;
    for (const TimestepInstance& inst : instances()) labels.push_back(inst.label.key());
    FilterConfig fc = cfg_.filter;
    fc.seed = derive_seed(cfg_.seed, "af");
    const FilterResult r = af_lite(featurizer.matrix(instances()), labels, fc);
    retained_ = r.retained;
    const std::map<std::string, int64_t> final_counts =
        r.report.iterations.empty() ? r.report.initial_counts : r.report.iterations.back().entity_counts;
    size_t support = 0;
    for (const auto& [label, c] : r.report.initial_counts) support += label != kNullLabel ? 1 : 0;
    const std::vector<std::string> exclude{std::string(kNullLabel)};
    Json j = to_json(r.report);
    j["trajectory"] = to_json(entity_trajectory(r.report, cfg_.head_k));
    j["normalized_entropy"] =
        Json{{"before", normalized_entropy(r.report.initial_counts, support, exclude)},
             {"after", normalized_entropy(final_counts, support, exclude)}};
    emit_json("filter_report.json", stamp(j));
    emit("retained_ids.tsv", retained_ids_text(instances(), r.retained));
  }

  std::vector<size_t> retained() {
    if (retained_) return *retained_;
    const std::filesystem::path p = out_ / "retained_ids.tsv";
    if (std::filesystem::exists(p)) return retained_from_text(instances(), read_file(p));
    std::vector<size_t> all(instances().size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }

  void finetune() {
    featurizer_.emplace(make_featurizer(cfg_.classifier_features));
    ClassifierConfig cc = cfg_.classifier;
    cc.seed = derive_seed(cfg_.seed, "classifier");
    const std::vector<size_t> kept = retained();
    classifier_ = finetune_on_retained(*featurizer_, instances(), kept, cc);
    Json j = to_json(*classifier_, *featurizer_);
    j["meta"] = meta_json(meta_);
    j["trained_on"] = kept.size();
    emit_json("classifier.json", j);
  }

  void resplit_stage() {
    std::vector<Dialogue> all = train();
    if (!cfg_.test_path.empty()) {
      const std::vector<Dialogue>& t = test();
      all.insert(all.end(), t.begin(), t.end());
    }
    ResplitConfig rc = cfg_.resplit;
    rc.n = cfg_.n;
    rc.seed = derive_seed(cfg_.seed, "resplit");
    emit_json("split.json", stamp(to_json(resplit(all, rc))));
  }

  PerturbConfig perturb_config(PerturbKind kind) {
    PerturbConfig pc;
    pc.kind = kind;
    pc.rate = cfg_.perturb_rate;
    pc.seed = derive_seed(cfg_.seed, "perturb", static_cast<uint64_t>(kind));
    if (kind == PerturbKind::kWordParaphrase || kind == PerturbKind::kSentenceParaphrase) {
      if (cfg_.lexicon_path.empty()) throw ConfigError("perturb." + perturb_kind_name(kind) + " needs a lexicon");
      pc.lexicon = load_lexicon(cfg_.lexicon_path);
    }
    if (kind == PerturbKind::kSentenceInsert) {
      if (cfg_.distractors_path.empty()) throw ConfigError("perturb.si needs a distractor pool");
      pc.distractors = load_distractors(cfg_.distractors_path);
    }
    return pc;
  }

  void perturb_stage() {
    for (PerturbKind kind : cfg_.perturb_kinds) {
      const std::vector<Dialogue> set = make_adversarial_testset(test(), perturb_config(kind));
      std::string text;
      for (const Dialogue& d : set) text += dialogue_to_json_line(d) + "\n";
      emit("perturbed/" + perturb_kind_name(kind) + ".jsonl", text);
    }
  }

  void evaluate() {
    if (!classifier_) {
      const Json j = read_json(out_ / "classifier.json");
      classifier_ = classifier_from_json(j);
      const EncoderModel* enc = j.at("featurizer").at("kind") == "encoder" ? &encoder() : nullptr;
      featurizer_.emplace(featurizer_from_json(j, enc));
    }
    Json sets = Json::object();
    const CorpusEvaluation clean = evaluate_dialogues(*classifier_, *featurizer_, test());
    sets["clean"] = to_json(clean.report);
    emit("predictions.jsonl", predictions_to_jsonl(clean.predictions));
    if (!cfg_.decorrelated_test_path.empty()) {
      const auto decor = load_corpus(cfg_.decorrelated_test_path, schema_by_id(cfg_.schema));
      sets["decorrelated"] = to_json(evaluate_dialogues(*classifier_, *featurizer_, decor).report);
    }
    for (PerturbKind kind : cfg_.perturb_kinds) {
      const std::filesystem::path p = out_ / "perturbed" / (perturb_kind_name(kind) + ".jsonl");
      if (!std::filesystem::exists(p)) continue;
      const auto set = load_corpus(p, schema_by_id(cfg_.schema));
      sets[perturb_kind_name(kind)] = to_json(evaluate_dialogues(*classifier_, *featurizer_, set).report);
    }
    emit_json("eval_report.json", stamp(Json{{"sets", sets}}));
  }

  void probe() {
    ProbeConfig pc;
    pc.frequent_set = rank_frequency(build_profile(instances(), cfg_.n), cfg_.cutoff);
    pc.bag_order = cfg_.bag_order;
    pc.classifier = cfg_.classifier;
    pc.classifier.seed = derive_seed(cfg_.seed, "probe");
    const ProbeResult r = run_probe(train(), test(), pc);
    emit_json("probe.json", stamp(Json{{"full", to_json(r.full)},
                                       {"frequent_only", to_json(r.frequent_only)},
                                       {"gap_points", r.gap_points}}));
  }

  void report() {
    Json summary = Json::object();
    auto take = [&](const char* file, const std::function<void(const Json&)>& fn) {
      const std::filesystem::path p = out_ / file;
      if (std::filesystem::exists(p)) fn(read_json(p));
    };
    take("histogram.json", [&](const Json& j) {
      summary["head_share"] = j["histogram"]["head_share"];
      summary["gold_entities"] = j["histogram"]["total"];
    });
    take("biased_set.json", [&](const Json& j) { summary["biased_ngrams"] = j["entries"].size(); });
    take("pretrain.json", [&](const Json& j) { summary["pretrain"] = j["pretrain"]; });
    take("filter_report.json", [&](const Json& j) {
      summary["filter"] = Json{{"iterations", j["iterations"].size()},
                               {"termination", j["termination"]},
                               {"normalized_entropy", j["normalized_entropy"]}};
    });
    take("split.json", [&](const Json& j) { summary["resplit"] = j["report"]; });
    take("eval_report.json", [&](const Json& j) {
      Json f1 = Json::object();
      for (const auto& [name, rep] : j["sets"].items()) {
        f1[name] = Json{{"entity_f1", rep["entity_f1"]}, {"bleu", rep["bleu"]}};
      }
      summary["evaluation"] = f1;
    });
    take("probe.json", [&](const Json& j) {
      summary["probe"] = Json{{"full_f1", j["full"]["entity_f1"]},
                              {"frequent_only_f1", j["frequent_only"]["entity_f1"]},
                              {"gap_points", j["gap_points"]}};
    });
    emit_json("report.json", stamp(Json{{"summary", summary}}));
  }

  void write_manifest(const RunOutcome& outcome) {
    std::vector<std::string> sorted = artifacts_;
    std::sort(sorted.begin(), sorted.end());
    Json list = Json::array();
    for (const std::string& rel : sorted) {
      list.push_back(Json{{"path", rel}, {"sha256", sha256_file(out_ / rel)}});
    }
    Json m{{"status", outcome.ok ? "ok" : "failed"}};
    if (!outcome.ok) {
      m["failed_stage"] = outcome.failed_stage;
      m["error"] = outcome.error;
      m["partial"] = true;
    }
    m["artifacts"] = list;
    write_json(out_ / "manifest.json", stamp(m));
  }

  const PipelineConfig& cfg_;
  std::filesystem::path out_;
  ArtifactMeta meta_;
  std::vector<std::string> artifacts_;

  std::optional<std::vector<Dialogue>> train_;
  std::optional<std::vector<Dialogue>> test_;
  std::optional<std::vector<TimestepInstance>> instances_;
  std::optional<BiasedTokenSet> biased_;
  std::optional<std::vector<PositivePair>> pairs_;
  std::optional<EncoderModel> encoder_;
  std::optional<std::vector<size_t>> retained_;
  std::optional<LinearClassifier> classifier_;
  std::optional<Featurizer> featurizer_;
  Json pretrain_summary_;
};

}  // namespace

RunOutcome run_pipeline(const PipelineConfig& config) {
  Runner runner(config);
  return runner.run();
}

}  // namespace debias
