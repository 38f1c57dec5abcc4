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

#include "debias/entity_predictor.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <set>

#include "debias/rng.hpp"

namespace debias {

FeatureMatrix FeatureMatrix::from_vectors(const std::vector<FeatureVector>& features) {
  FeatureMatrix m;
  m.rows = features.size();
  m.cols = features.empty() ? 0 : features.front().values.size();
  if (!features.empty()) m.source = features.front().source;
  m.data.reserve(m.rows * m.cols);
  for (const FeatureVector& f : features) {
    if (f.values.size() != m.cols) throw DomainError("feature vectors differ in dimension");
    m.data.insert(m.data.end(), f.values.begin(), f.values.end());
  }
  return m;
}

FeatureMatrix FeatureMatrix::select(std::span<const size_t> indices) const {
  FeatureMatrix m;
  m.rows = indices.size();
  m.cols = cols;
  m.source = source;
  m.data.reserve(m.rows * cols);
  for (size_t i : indices) {
    const auto r = row(i);
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

NgramVocab::NgramVocab(size_t n, std::vector<NGram> ngrams) : n_(n), ngrams_(std::move(ngrams)) {
  for (size_t i = 0; i < ngrams_.size(); ++i) index_.emplace(ngrams_[i], i);
}

NgramVocab NgramVocab::build(const std::vector<TokenSeq>& contexts, size_t n) {
  std::set<NGram> all;
  for (const TokenSeq& c : contexts) {
    for (NGram& g : extract_ngrams(c, n)) all.insert(std::move(g));
  }
  return NgramVocab(n, std::vector<NGram>(all.begin(), all.end()));
}

std::optional<size_t> NgramVocab::index(const NGram& g) const {
  auto it = index_.find(g);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

FeatureVector bag_features(const TokenSeq& context, const NgramVocab& vocab) {
  FeatureVector f{std::vector<double>(vocab.size(), 0.0), FeatureSource::kBagOfNgrams};
  for (const NGram& g : extract_ngrams(context, vocab.n())) {
    if (auto idx = vocab.index(g)) f.values[*idx] = 1.0;
  }
  return f;
}

}  // namespace

FeatureVector featurize(const TimestepInstance& instance, const EncoderModel& encoder) {
  return {encode(encoder, instance.context), FeatureSource::kEncoder};
}

FeatureVector featurize(const TimestepInstance& instance, const NgramVocab& vocab) {
  return bag_features(instance.context, vocab);
}

Featurizer::Featurizer(const EncoderModel& encoder, ContextTransform transform)
    : backend_(&encoder), transform_(std::move(transform)) {}

Featurizer::Featurizer(NgramVocab vocab, ContextTransform transform)
    : backend_(std::move(vocab)), transform_(std::move(transform)) {}

FeatureVector Featurizer::operator()(const TokenSeq& context) const {
  const TokenSeq transformed = transform_ ? transform_(context) : TokenSeq{};
  const TokenSeq& ctx = transform_ ? transformed : context;
  if (const auto* enc = std::get_if<const EncoderModel*>(&backend_)) {
    return {encode(**enc, ctx), FeatureSource::kEncoder};
  }
  return bag_features(ctx, std::get<NgramVocab>(backend_));
}

FeatureMatrix Featurizer::matrix(const std::vector<TimestepInstance>& instances) const {
  FeatureMatrix m;
  m.rows = instances.size();
  m.cols = dim();
  m.source = source();
  m.data.assign(m.rows * m.cols, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const FeatureVector f = (*this)(instances[static_cast<size_t>(i)].context);
    std::copy(f.values.begin(), f.values.end(),
              m.data.begin() + static_cast<std::ptrdiff_t>(static_cast<size_t>(i) * m.cols));
  }
  return m;
}

FeatureSource Featurizer::source() const {
  return std::holds_alternative<const EncoderModel*>(backend_) ? FeatureSource::kEncoder
                                                               : FeatureSource::kBagOfNgrams;
}

size_t Featurizer::dim() const {
  if (const auto* enc = std::get_if<const EncoderModel*>(&backend_)) return (*enc)->dim;
  return std::get<NgramVocab>(backend_).size();
}

LinearClassifier LinearClassifier::zeros(std::vector<std::string> classes, size_t dim) {
  LinearClassifier c;
  c.classes = std::move(classes);
  c.dim = dim;
  c.weights.assign(c.classes.size() * dim, 0.0);
  c.bias.assign(c.classes.size(), 0.0);
  c.class_support.assign(c.classes.size(), 0);
  return c;
}

std::vector<double> LinearClassifier::logits(std::span<const double> x) const {
  if (x.size() != dim) {
    throw DomainError("feature dimension " + std::to_string(x.size()) +
                      " does not match classifier dimension " + std::to_string(dim));
  }
  const bool scaled = !feature_mean.empty();
  std::vector<double> z(classes.size());
  for (size_t k = 0; k < classes.size(); ++k) {
    const double* w = weights.data() + k * dim;
    double acc = bias[k];
    for (size_t c = 0; c < dim; ++c) {
      const double v = scaled ? (x[c] - feature_mean[c]) * feature_scale[c] : x[c];
      acc += w[c] * v;
    }
    z[k] = acc;
  }
  return z;
}

std::optional<size_t> LinearClassifier::class_index(const std::string& label) const {
  auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) return std::nullopt;
  return static_cast<size_t>(it - classes.begin());
}

namespace {

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

void check_epoch_loss(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    throw TrainingError("classifier loss became non-finite at epoch " + std::to_string(epoch + 1));
  }
}

bool converged(double previous, double current, double tolerance) {
  return tolerance > 0.0 && std::isfinite(previous) &&
         std::abs(previous - current) / std::max(previous, 1e-12) < tolerance;
}

// Same objective as the dense loop. Weights are kept as scale * V so the
// per-step L2 shrinkage costs O(1); only the nonzero columns are touched.
void train_sparse(const FeatureMatrix& features, const std::vector<size_t>& y,
                  const ClassifierConfig& config, LinearClassifier& model) {
  const size_t n = features.rows;
  const size_t d = features.cols;
  const size_t k_classes = model.classes.size();
  std::vector<size_t> row_start(n + 1, 0);
  std::vector<size_t> col;
  std::vector<double> val;
  for (size_t i = 0; i < n; ++i) {
    const auto r = features.row(i);
    for (size_t c = 0; c < d; ++c) {
      if (r[c] != 0.0) {
        col.push_back(c);
        val.push_back(r[c]);
      }
    }
    row_start[i + 1] = col.size();
  }

  std::vector<double>& v = model.weights;
  double scale = 1.0;
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<double> z(k_classes);
  const double lr = config.learning_rate;
  const double decay = 1.0 - lr * config.l2;
  double previous = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "classifier", static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t i : order) {
      for (size_t k = 0; k < k_classes; ++k) {
        const double* w = v.data() + k * d;
        double acc = 0.0;
        for (size_t p = row_start[i]; p < row_start[i + 1]; ++p) acc += w[col[p]] * val[p];
        z[k] = scale * acc + model.bias[k];
      }
      softmax_inplace(z);
      epoch_loss -= std::log(std::max(z[y[i]], 1e-300));
      scale *= decay;
      for (size_t k = 0; k < k_classes; ++k) {
        const double g = z[k] - (k == y[i] ? 1.0 : 0.0);
        double* w = v.data() + k * d;
        const double step = lr * g / scale;
        for (size_t p = row_start[i]; p < row_start[i + 1]; ++p) w[col[p]] -= step * val[p];
        model.bias[k] -= lr * g;
      }
      if (scale < 1e-9) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
    }
    epoch_loss /= static_cast<double>(n);
    check_epoch_loss(epoch_loss, epoch);
    if (converged(previous, epoch_loss, config.tolerance)) break;
    previous = epoch_loss;
  }
  for (double& w : v) w *= scale;
}

}  // namespace

LinearClassifier train_classifier(const FeatureMatrix& features,
                                  const std::vector<std::string>& labels,
                                  const ClassifierConfig& config) {
  if (features.rows != labels.size()) throw DomainError("features and labels differ in length");
  if (features.rows == 0) throw DegenerateDataError("no training instances");
  if (config.epochs < 1) throw ConfigError("classifier epochs must be >= 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("classifier learning_rate must be > 0");

  std::vector<std::string> classes = config.classes;
  if (classes.empty()) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    classes.assign(distinct.begin(), distinct.end());
  }
  std::map<std::string, size_t> index;
  for (size_t k = 0; k < classes.size(); ++k) index.emplace(classes[k], k);
  std::vector<size_t> y(labels.size());
  std::set<size_t> present;
  for (size_t i = 0; i < labels.size(); ++i) {
    auto it = index.find(labels[i]);
    if (it == index.end()) throw DomainError("label '" + labels[i] + "' not among the classes");
    y[i] = it->second;
    present.insert(it->second);
  }
  if (present.size() < 2) {
    throw DegenerateDataError("training data contains a single class ('" + labels.front() + "')");
  }

  const size_t n = features.rows;
  const size_t d = features.cols;
  const size_t k_classes = classes.size();
  LinearClassifier model = LinearClassifier::zeros(classes, d);
  for (size_t i = 0; i < n; ++i) ++model.class_support[y[i]];

  const bool standardize =
      config.standardize == Standardize::kOn ||
      (config.standardize == Standardize::kAuto && features.source == FeatureSource::kEncoder);
  if (!standardize && config.learning_rate * config.l2 < 1.0) {
    size_t nonzero = 0;
    for (double v : features.data) nonzero += v != 0.0 ? 1 : 0;
    if (2 * nonzero < features.data.size()) {
      train_sparse(features, y, config, model);
      return model;
    }
  }
  std::vector<double> x = features.data;
  if (standardize) {
    model.feature_mean.assign(d, 0.0);
    model.feature_scale.assign(d, 1.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t c = 0; c < d; ++c) model.feature_mean[c] += x[i * d + c];
    }
    for (double& m : model.feature_mean) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t c = 0; c < d; ++c) {
        const double dv = x[i * d + c] - model.feature_mean[c];
        var[c] += dv * dv;
      }
    }
    for (size_t c = 0; c < d; ++c) {
      const double sd = std::sqrt(var[c] / static_cast<double>(n));
      model.feature_scale[c] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    for (size_t i = 0; i < n; ++i) {
      for (size_t c = 0; c < d; ++c) {
        x[i * d + c] = (x[i * d + c] - model.feature_mean[c]) * model.feature_scale[c];
      }
    }
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<double> z(k_classes);
  const double lr = config.learning_rate;
  const double decay = 1.0 - lr * config.l2;
  double previous = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "classifier", static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t i : order) {
      const double* xi = x.data() + i * d;
      for (size_t k = 0; k < k_classes; ++k) {
        const double* w = model.weights.data() + k * d;
        double acc = model.bias[k];
        for (size_t c = 0; c < d; ++c) acc += w[c] * xi[c];
        z[k] = acc;
      }
      softmax_inplace(z);
      epoch_loss -= std::log(std::max(z[y[i]], 1e-300));
      for (size_t k = 0; k < k_classes; ++k) {
        const double g = z[k] - (k == y[i] ? 1.0 : 0.0);
        double* w = model.weights.data() + k * d;
        for (size_t c = 0; c < d; ++c) w[c] = w[c] * decay - lr * g * xi[c];
        model.bias[k] -= lr * g;
      }
    }
    epoch_loss /= static_cast<double>(n);
    check_epoch_loss(epoch_loss, epoch);
    if (converged(previous, epoch_loss, config.tolerance)) break;
    previous = epoch_loss;
  }
  return model;
}

LinearClassifier train_classifier(const std::vector<FeatureVector>& features,
                                  const std::vector<std::string>& labels,
                                  const ClassifierConfig& config) {
  return train_classifier(FeatureMatrix::from_vectors(features), labels, config);
}

Prediction predict(const LinearClassifier& classifier, std::span<const double> feature) {
  Prediction p;
  p.probs = classifier.logits(feature);
  softmax_inplace(p.probs);
  p.class_index = static_cast<size_t>(std::max_element(p.probs.begin(), p.probs.end()) -
                                      p.probs.begin());
  p.label = EntityLabel::from_key(classifier.classes[p.class_index]);
  return p;
}

Prediction predict(const LinearClassifier& classifier, const FeatureVector& feature) {
  return predict(classifier, std::span<const double>(feature.values));
}

SequencePrediction predict_sequence(const LinearClassifier& classifier, const Featurizer& featurizer,
                                    const Dialogue& dialogue, size_t turn_index,
                                    const DelexResponse& delex) {
  if (turn_index >= dialogue.turns.size()) throw std::out_of_range("turn index out of range");
  const std::vector<Turn> history(dialogue.turns.begin(),
                                  dialogue.turns.begin() + static_cast<std::ptrdiff_t>(turn_index));
  SequencePrediction out;
  size_t next_slot = 0;
  for (size_t t = 0; t < delex.tokens.size(); ++t) {
    const bool placeholder =
        next_slot < delex.slot_map.size() && delex.slot_map[next_slot].position == t;
    if (!placeholder) {
      out.lexicalized.push_back(delex.tokens[t]);
      continue;
    }
    const TokenSeq prefix(delex.tokens.begin(), delex.tokens.begin() + static_cast<std::ptrdiff_t>(t));
    const Prediction p = predict(classifier, featurizer(serialize_context(history, prefix)));
    std::optional<size_t> best;
    for (size_t k = 0; k < p.probs.size(); ++k) {
      if (classifier.classes[k] == kNullLabel) continue;
      if (!best || p.probs[k] > p.probs[*best]) best = k;
    }
    if (best) {
      const std::string& entity = classifier.classes[*best];
      for (Token& tok : tokenize(entity)) out.lexicalized.push_back(std::move(tok));
      out.predicted_entities.push_back(entity);
    } else {
      out.lexicalized.push_back(delex.tokens[t]);
      out.predicted_entities.emplace_back(kNullLabel);
    }
    out.gold_entities.push_back(delex.slot_map[next_slot].gold_entity);
    out.timesteps.push_back(static_cast<int>(t) + 1);
    ++next_slot;
  }
  return out;
}

CorpusEvaluation evaluate_dialogues(const LinearClassifier& classifier, const Featurizer& featurizer,
                                    const std::vector<Dialogue>& dialogues) {
  struct Job {
    size_t dialogue;
    size_t turn;
  };
  std::vector<Job> jobs;
  for (size_t d = 0; d < dialogues.size(); ++d) {
    for (size_t t = 0; t < dialogues[d].turns.size(); ++t) {
      if (dialogues[d].turns[t].speaker == Speaker::kSystem) jobs.push_back({d, t});
    }
  }
  std::vector<SequencePrediction> results(jobs.size());
  const auto count = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t j = 0; j < count; ++j) {
    const Job& job = jobs[static_cast<size_t>(j)];
    const Dialogue& d = dialogues[job.dialogue];
    const DelexResponse delex = delexicalize(d.turns[job.turn].text, d.kb);
    results[static_cast<size_t>(j)] = predict_sequence(classifier, featurizer, d, job.turn, delex);
  }

  CorpusEvaluation eval;
  std::vector<EntityPrediction> pairs;
  std::vector<TokenSeq> candidates;
  std::vector<TokenSeq> references;
  for (size_t j = 0; j < jobs.size(); ++j) {
    const Dialogue& d = dialogues[jobs[j].dialogue];
    SequencePrediction& r = results[j];
    EntityPrediction ep;
    for (const std::string& e : r.predicted_entities) {
      if (e != kNullLabel) ep.predicted.push_back(e);
    }
    ep.gold = r.gold_entities;
    pairs.push_back(std::move(ep));
    for (size_t k = 0; k < r.predicted_entities.size(); ++k) {
      eval.predictions.push_back({d.id, static_cast<int>(jobs[j].turn), r.timesteps[k],
                                  r.predicted_entities[k], r.gold_entities[k]});
    }
    candidates.push_back(std::move(r.lexicalized));
    references.push_back(d.turns[jobs[j].turn].text);
  }
  eval.report = entity_f1(pairs);
  if (!candidates.empty()) eval.report.bleu = bleu(candidates, references);
  return eval;
}

ContextTransform frequent_history_transform(const BiasedTokenSet& frequent_set) {
  auto matcher = std::make_shared<const BiasedMatcher>(frequent_set);
  return [matcher](const TokenSeq& context) {
    const size_t split = response_start(context);
    const TokenSeq history(context.begin(), context.begin() + static_cast<std::ptrdiff_t>(split));
    TokenSeq out = frequent_phrases_only(history, *matcher);
    out.insert(out.end(), context.begin() + static_cast<std::ptrdiff_t>(split), context.end());
    return out;
  };
}

ProbeResult run_probe(const std::vector<Dialogue>& train, const std::vector<Dialogue>& test,
                      const ProbeConfig& config) {
  if (config.frequent_set.empty()) {
    throw ConfigError("the frequent-phrases-only probe needs a nonempty frequent set");
  }
  const std::vector<TimestepInstance> instances = build_corpus_instances(train);
  std::vector<std::string> labels;
  labels.reserve(instances.size());
  for (const TimestepInstance& inst : instances) labels.push_back(inst.label.key());
  ClassifierConfig cc = config.classifier;
  if (cc.classes.empty()) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    cc.classes.assign(distinct.begin(), distinct.end());
  }

  auto run_mode = [&](ContextTransform transform) {
    std::vector<TokenSeq> contexts;
    contexts.reserve(instances.size());
    for (const TimestepInstance& inst : instances) {
      contexts.push_back(transform ? transform(inst.context) : inst.context);
    }
    const Featurizer featurizer(NgramVocab::build(contexts, config.bag_order), transform);
    const LinearClassifier clf = train_classifier(featurizer.matrix(instances), labels, cc);
    return evaluate_dialogues(clf, featurizer, test).report;
  };

  ProbeResult result;
  result.full = run_mode({});
  result.frequent_only = run_mode(frequent_history_transform(config.frequent_set));
  result.gap_points = 100.0 * (result.full.entity_f1 - result.frequent_only.entity_f1);
  return result;
}

}  // namespace debias
