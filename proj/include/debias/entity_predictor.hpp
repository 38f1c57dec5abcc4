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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "debias/contrastive.hpp"
#include "debias/corpus.hpp"
#include "debias/evalkit.hpp"
#include "debias/ngram_stats.hpp"

namespace debias {

enum class FeatureSource { kEncoder, kBagOfNgrams };

struct FeatureVector {
  std::vector<double> values;
  FeatureSource source = FeatureSource::kEncoder;
};

// Dense row-major feature matrix, one row per instance.
struct FeatureMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;
  FeatureSource source = FeatureSource::kEncoder;

  std::span<const double> row(size_t i) const { return {data.data() + i * cols, cols}; }
  static FeatureMatrix from_vectors(const std::vector<FeatureVector>& features);
  FeatureMatrix select(std::span<const size_t> indices) const;
};

// Fixed n-gram vocabulary for binary bag-of-n-grams features.
class NgramVocab {
 public:
  NgramVocab() = default;
  NgramVocab(size_t n, std::vector<NGram> ngrams);
  static NgramVocab build(const std::vector<TokenSeq>& contexts, size_t n);

  size_t n() const { return n_; }
  size_t size() const { return ngrams_.size(); }
  const std::vector<NGram>& ngrams() const { return ngrams_; }
  std::optional<size_t> index(const NGram& g) const;

 private:
  size_t n_ = 1;
  std::vector<NGram> ngrams_;
  std::unordered_map<NGram, size_t, NGramHash> index_;
};

FeatureVector featurize(const TimestepInstance& instance, const EncoderModel& encoder);
FeatureVector featurize(const TimestepInstance& instance, const NgramVocab& vocab);

using ContextTransform = std::function<TokenSeq(const TokenSeq&)>;

// Maps a context to features with either an encoder or an n-gram vocabulary,
// after an optional context transform.
class Featurizer {
 public:
  explicit Featurizer(const EncoderModel& encoder, ContextTransform transform = {});
  explicit Featurizer(NgramVocab vocab, ContextTransform transform = {});

  FeatureVector operator()(const TokenSeq& context) const;
  // Parallel over instances.
  FeatureMatrix matrix(const std::vector<TimestepInstance>& instances) const;
  FeatureSource source() const;
  size_t dim() const;
  const NgramVocab* vocab() const { return std::get_if<NgramVocab>(&backend_); }

 private:
  std::variant<const EncoderModel*, NgramVocab> backend_;
  ContextTransform transform_;
};

struct LinearClassifier {
  std::vector<std::string> classes;  // label keys, fixed order
  size_t dim = 0;
  std::vector<double> weights;  // classes x dim, row-major
  std::vector<double> bias;
  // Per-feature standardization applied before the linear layer; empty means
  // identity.
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  // Training instances seen per class.
  std::vector<int64_t> class_support;

  static LinearClassifier zeros(std::vector<std::string> classes, size_t dim);
  std::vector<double> logits(std::span<const double> x) const;
  std::optional<size_t> class_index(const std::string& label) const;
};

// kAuto standardizes encoder features and leaves binary bag features alone.
enum class Standardize { kAuto, kOn, kOff };

struct ClassifierConfig {
  int epochs = 100;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  uint64_t seed = 0;
  Standardize standardize = Standardize::kAuto;
  // Stop once the relative change of the epoch loss drops below this; 0
  // disables early stopping.
  double tolerance = 0.0;
  // Fixed class order; empty means the sorted set of training labels.
  std::vector<std::string> classes;
};

// Multinomial logistic regression by per-example SGD on cross-entropy with
// L2 on the weights. Weights start at zero, so the seed only drives the
// visiting order. Unstandardized sparse inputs take a sparse update path
// that keeps the L2 shrinkage as a lazy global scale.
LinearClassifier train_classifier(const FeatureMatrix& features,
                                  const std::vector<std::string>& labels,
                                  const ClassifierConfig& config);
LinearClassifier train_classifier(const std::vector<FeatureVector>& features,
                                  const std::vector<std::string>& labels,
                                  const ClassifierConfig& config);

struct Prediction {
  EntityLabel label = EntityLabel::null();
  size_t class_index = 0;
  std::vector<double> probs;
};

// Softmax over classes; argmax ties go to the earliest class.
Prediction predict(const LinearClassifier& classifier, std::span<const double> feature);
Prediction predict(const LinearClassifier& classifier, const FeatureVector& feature);

struct SequencePrediction {
  TokenSeq lexicalized;
  std::vector<std::string> predicted_entities;
  std::vector<std::string> gold_entities;
  std::vector<int> timesteps;  // placeholder timesteps, aligned with predicted_entities
};

// Fills every placeholder of the gold delexicalized response with the most
// probable non-[NULL] class at that timestep.
SequencePrediction predict_sequence(const LinearClassifier& classifier, const Featurizer& featurizer,
                                    const Dialogue& dialogue, size_t turn_index,
                                    const DelexResponse& delex);

struct PredictionRecord {
  std::string dialogue_id;
  int turn = 0;
  int timestep = 0;
  std::string predicted;
  std::string gold;
};

struct CorpusEvaluation {
  EvalReport report;
  std::vector<PredictionRecord> predictions;
};

// Entity F1 and BLEU of the lexicalized responses over every system turn.
CorpusEvaluation evaluate_dialogues(const LinearClassifier& classifier, const Featurizer& featurizer,
                                    const std::vector<Dialogue>& dialogues);

enum class ProbeInput { kFull, kFrequentPhrasesOnly };

struct ProbeConfig {
  ProbeInput input_mode = ProbeInput::kFull;
  BiasedTokenSet frequent_set;
  size_t bag_order = 1;
  ClassifierConfig classifier;
};

// Keeps only the frequent-phrase tokens of the dialogue history (markers
// included) and leaves the response prefix untouched.
ContextTransform frequent_history_transform(const BiasedTokenSet& frequent_set);

struct ProbeResult {
  EvalReport full;
  EvalReport frequent_only;
  double gap_points = 0.0;  // 100 * (full F1 - frequent-only F1)
};

// Trains and evaluates a bag-of-n-grams classifier under both input modes.
ProbeResult run_probe(const std::vector<Dialogue>& train, const std::vector<Dialogue>& test,
                      const ProbeConfig& config);

}  // namespace debias
