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

#include <cmath>

#include <gtest/gtest.h>

#include "debias/entity_predictor.hpp"
#include "debias/reference.hpp"
#include "debias/synth.hpp"
#include "support/fixtures.hpp"

namespace debias {
namespace {

using fixture::instance;

FeatureMatrix matrix(const std::vector<std::vector<double>>& rows,
                     FeatureSource source = FeatureSource::kEncoder) {
  std::vector<FeatureVector> v;
  for (const auto& r : rows) v.push_back({r, source});
  return FeatureMatrix::from_vectors(v);
}

TEST(Featurize, EncoderModeDelegatesToEncode) {
  const EncoderModel m = EncoderModel::initialize(Vocab({"a", "b"}), 5, 3);
  const auto f = featurize(instance("", "x"), m);
  EXPECT_EQ(f.source, FeatureSource::kEncoder);
  for (double v : f.values) EXPECT_EQ(v, 0.0);
  const auto inst = instance("a b a", "x");
  EXPECT_EQ(featurize(inst, m).values, encode(m, inst.context));
  EXPECT_EQ(Featurizer(m)(inst.context).values, encode(m, inst.context));
}

TEST(Featurize, BagModeMarksPresentNgrams) {
  const NgramVocab vocab(1, {NGram{{"a"}}, NGram{{"b"}}, NGram{{"c"}}, NGram{{"d"}}, NGram{{"e"}}});
  const auto f = featurize(instance("a c a z", "x"), vocab);
  EXPECT_EQ(f.values, (std::vector<double>{1, 0, 1, 0, 0}));
  EXPECT_EQ(f.source, FeatureSource::kBagOfNgrams);
}

TEST(Featurizer, MatrixRowsMatchSingleCalls) {
  const NgramVocab vocab = NgramVocab::build({tokenize("a b c"), tokenize("c d")}, 2);
  const Featurizer f(vocab);
  const std::vector<TimestepInstance> insts = {instance("a b c d", "x"), instance("c d", "y"),
                                               instance("q", "x")};
  const FeatureMatrix m = f.matrix(insts);
  EXPECT_EQ(m.source, FeatureSource::kBagOfNgrams);
  for (size_t i = 0; i < insts.size(); ++i) {
    const auto row = m.row(i);
    EXPECT_EQ(std::vector<double>(row.begin(), row.end()), f(insts[i].context).values);
  }
}

TEST(TrainClassifier, SeparableToyReachesFullAccuracy) {
  Rng rng(1);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  for (int i = 0; i < 60; ++i) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    if (std::abs(x + y) < 0.1) continue;
    rows.push_back({x, y});
    labels.push_back(x + y > 0 ? "pos" : "neg");
  }
  ClassifierConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.5;
  const FeatureMatrix m = matrix(rows);
  const auto clf = train_classifier(m, labels, cfg);
  for (size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(predict(clf, m.row(i)).label.key(), labels[i]);
}

TEST(TrainClassifier, SameSeedSameWeights) {
  const auto insts = fixture::random_instances(3, 120, 10, 4, 8);
  const Featurizer f(NgramVocab::build({insts[0].context, insts[1].context, insts[2].context}, 1));
  std::vector<std::string> labels;
  for (const auto& i : insts) labels.push_back(i.label.key());
  ClassifierConfig cfg;
  cfg.seed = 9;
  cfg.epochs = 10;
  const auto a = train_classifier(f.matrix(insts), labels, cfg);
  const auto b = train_classifier(f.matrix(insts), labels, cfg);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(TrainClassifier, LabelBijectionPermutesPredictions) {
  Rng rng(2);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels, renamed;
  const std::map<std::string, std::string> bij = {{"a", "z"}, {"b", "m"}, {"c", "a"}};
  for (int i = 0; i < 90; ++i) {
    const int k = i % 3;
    rows.push_back({k == 0 ? 1.0 : 0.0, k == 1 ? 1.0 : 0.0, rng.uniform(-0.3, 0.3)});
    labels.push_back(std::string(1, static_cast<char>('a' + k)));
    renamed.push_back(bij.at(labels.back()));
  }
  ClassifierConfig cfg;
  cfg.epochs = 30;
  const FeatureMatrix m = matrix(rows);
  const auto c1 = train_classifier(m, labels, cfg);
  const auto c2 = train_classifier(m, renamed, cfg);
  for (size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(bij.at(predict(c1, m.row(i)).label.key()), predict(c2, m.row(i)).label.key());
  }
}

TEST(TrainClassifier, SingleClassIsDegenerate) {
  EXPECT_THROW(train_classifier(matrix({{1.0}, {2.0}}), {"a", "a"}, ClassifierConfig{}),
               DegenerateDataError);
}

TEST(TrainClassifier, FixedClassListKeepsUnseenClasses) {
  ClassifierConfig cfg;
  cfg.classes = {"[NULL]", "a", "b", "c"};
  const auto clf = train_classifier(matrix({{1.0}, {-1.0}}), {"a", "b"}, cfg);
  EXPECT_EQ(clf.classes, cfg.classes);
  EXPECT_EQ(clf.class_support, (std::vector<int64_t>{0, 1, 1, 0}));
}

TEST(TrainClassifier, SparsePathMatchesDenseReference) {
  const auto insts = fixture::random_instances(21, 200, 30, 5, 10);
  std::vector<TokenSeq> ctx;
  std::vector<std::string> labels;
  for (const auto& i : insts) {
    ctx.push_back(i.context);
    labels.push_back(i.label.key());
  }
  const Featurizer f(NgramVocab::build(ctx, 2));
  const FeatureMatrix m = f.matrix(insts);
  for (double tol : {0.0, 1e-4}) {
    ClassifierConfig cfg;
    cfg.epochs = 15;
    cfg.learning_rate = 0.3;
    cfg.l2 = 1e-3;
    cfg.seed = 4;
    cfg.tolerance = tol;
    const auto fast = train_classifier(m, labels, cfg);
    const auto slow = reference::train_classifier_dense(m, labels, cfg);
    ASSERT_EQ(fast.weights.size(), slow.weights.size());
    EXPECT_TRUE(fast.feature_mean.empty());
    for (size_t i = 0; i < fast.weights.size(); ++i) EXPECT_NEAR(fast.weights[i], slow.weights[i], 1e-9);
    for (size_t k = 0; k < fast.bias.size(); ++k) EXPECT_NEAR(fast.bias[k], slow.bias[k], 1e-9);
  }
}

TEST(TrainClassifier, AutoStandardizesEncoderFeaturesOnly) {
  const std::vector<std::vector<double>> rows = {{0, 1}, {1, 0}, {0, 1}, {1, 0}};
  const std::vector<std::string> labels = {"a", "b", "a", "b"};
  ClassifierConfig cfg;
  cfg.epochs = 2;
  EXPECT_FALSE(train_classifier(matrix(rows, FeatureSource::kEncoder), labels, cfg).feature_mean.empty());
  EXPECT_TRUE(train_classifier(matrix(rows, FeatureSource::kBagOfNgrams), labels, cfg).feature_mean.empty());
  cfg.standardize = Standardize::kOn;
  EXPECT_FALSE(train_classifier(matrix(rows, FeatureSource::kBagOfNgrams), labels, cfg).feature_mean.empty());
}

TEST(Predict, ZeroWeightsUniformFirstClass) {
  const auto clf = LinearClassifier::zeros({"[NULL]", "a", "b", "c"}, 3);
  const std::vector<double> x = {0.4, -2, 7};
  const Prediction p = predict(clf, x);
  EXPECT_TRUE(p.label.is_null());
  for (double v : p.probs) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Predict, TwoClassMatchesSigmoid) {
  auto clf = LinearClassifier::zeros({"a", "b"}, 2);
  clf.weights = {0.5, -1.0, 2.0, 0.25};
  clf.bias = {0.1, -0.3};
  const std::vector<double> x = {1.5, -0.5};
  const double za = 0.5 * 1.5 + 1.0 * 0.5 + 0.1;
  const double zb = 2.0 * 1.5 - 0.25 * 0.5 - 0.3;
  const Prediction p = predict(clf, x);
  EXPECT_NEAR(p.probs[1], 1.0 / (1.0 + std::exp(-(zb - za))), 1e-15);
  EXPECT_EQ(p.label.key(), "b");
}

TEST(Predict, SoftmaxNormalizedAndShiftInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto clf = LinearClassifier::zeros({"a", "b", "c", "d"}, 3);
    for (double& w : clf.weights) w = rng.uniform(-3, 3);
    for (double& b : clf.bias) b = rng.uniform(-3, 3);
    const std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const Prediction p = predict(clf, x);
    double sum = 0;
    for (double v : p.probs) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    auto shifted = clf;
    for (double& b : shifted.bias) b += 123.0;
    EXPECT_EQ(predict(shifted, x).class_index, p.class_index);
  }
}

TEST(Predict, DimensionMismatchThrows) {
  const auto clf = LinearClassifier::zeros({"a", "b"}, 3);
  const std::vector<double> x = {1.0};
  EXPECT_THROW(predict(clf, x), DomainError);
}

class PredictSequenceTest : public ::testing::Test {
 protected:
  EncoderModel enc = EncoderModel::initialize(Vocab({"hi", "try"}), 4, 1);
  Featurizer featurizer{enc};
};

TEST_F(PredictSequenceTest, NoPlaceholdersUnchanged) {
  const Dialogue d = fixture::dialogue("d", {"hi", "nothing to report"});
  const auto clf = LinearClassifier::zeros({"[NULL]", "x"}, 4);
  const auto r = predict_sequence(clf, featurizer, d, 1, delexicalize(d.turns[1].text, d.kb));
  EXPECT_EQ(r.lexicalized, d.turns[1].text);
  EXPECT_TRUE(r.predicted_entities.empty());
}

TEST_F(PredictSequenceTest, GoldPredictionRoundTrips) {
  const Dialogue d = fixture::dialogue("d", {"hi", "try the red lion"},
                                       {{"the red lion", "restaurant_name", {}}});
  // The only entity class is the gold one, so the non-[NULL] argmax is gold.
  const auto clf = LinearClassifier::zeros({"[NULL]", "the red lion"}, 4);
  const auto r = predict_sequence(clf, featurizer, d, 1, delexicalize(d.turns[1].text, d.kb));
  EXPECT_EQ(r.lexicalized, d.turns[1].text);
  EXPECT_EQ(r.predicted_entities, r.gold_entities);
}

TEST_F(PredictSequenceTest, OneSubstitutionPerPlaceholder) {
  const Dialogue d = fixture::dialogue("d", {"hi", "try x or y today"},
                                       {{"x", "restaurant_name", {}}, {"y", "restaurant_name", {}}});
  const auto clf = LinearClassifier::zeros({"[NULL]", "x", "y"}, 4);
  const DelexResponse delex = delexicalize(d.turns[1].text, d.kb);
  ASSERT_EQ(delex.slot_map.size(), 2u);
  const auto r = predict_sequence(clf, featurizer, d, 1, delex);
  EXPECT_EQ(r.predicted_entities, (std::vector<std::string>{"x", "x"}));
  EXPECT_EQ(r.lexicalized, tokenize("try x or x today"));
  EXPECT_EQ(r.timesteps, (std::vector<int>{2, 4}));
}

TEST(EvaluateDialogues, PerfectClassifierScoresOne) {
  // The cue word before the response fully determines the entity.
  std::vector<Dialogue> ds;
  for (int i = 0; i < 40; ++i) {
    const bool a = i % 2 == 0;
    ds.push_back(fixture::dialogue("d" + std::to_string(i), {a ? "alpha" : "beta", a ? "go x" : "go y"},
                                   {{"x", "restaurant_name", {}}, {"y", "restaurant_name", {}}}));
  }
  const auto insts = build_corpus_instances(ds);
  std::vector<TokenSeq> ctx;
  std::vector<std::string> labels;
  for (const auto& i : insts) {
    ctx.push_back(i.context);
    labels.push_back(i.label.key());
  }
  const Featurizer f(NgramVocab::build(ctx, 1));
  ClassifierConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.5;
  const auto clf = train_classifier(f.matrix(insts), labels, cfg);
  const auto ev = evaluate_dialogues(clf, f, ds);
  EXPECT_DOUBLE_EQ(ev.report.entity_f1, 1.0);
  EXPECT_DOUBLE_EQ(ev.report.bleu, 1.0);
  EXPECT_EQ(ev.predictions.size(), 40u);
}

TEST(FrequentHistoryTransform, KeepsResponsePrefix) {
  BiasedTokenSet b;
  b.n = 2;
  b.entries.push_back({NGram{{"i", "need"}}, 1.0});
  const auto t = frequent_history_transform(b);
  EXPECT_EQ(t(tokenize("<|user|> i need food <|user|> <|response|> try i need")),
            tokenize("<|user|> i need <|user|> <|response|> try i need"));
}

TEST(RunProbe, EmptyFrequentSetIsConfigError) {
  EXPECT_THROW(run_probe({}, {}, ProbeConfig{}), ConfigError);
}

TEST(RunProbe, CueDeterminedLabelsGiveSmallGap) {
  SyntheticBenchSpec spec;
  spec.train_size = 600;
  spec.test_size = 150;
  spec.seed = 3;
  const auto bench = generate_synthetic(spec);
  ProbeConfig pc;
  pc.frequent_set = identify_biased(build_corpus_instances(bench.train), Criterion::kFrequency, 3, 0.10);
  pc.classifier.epochs = 30;
  const auto r = run_probe(bench.train, bench.test, pc);
  EXPECT_GT(r.full.entity_f1, 0.9);
  EXPECT_LE(std::abs(r.gap_points), 5.0);
}

TEST(RunProbe, ContentDeterminedLabelsFallToMajorityBaseline) {
  SyntheticBenchSpec spec;
  spec.train_size = 600;
  spec.test_size = 150;
  spec.cue_strength = 0.0;  // only neutral cues; the content word decides
  spec.seed = 4;
  const auto bench = generate_synthetic(spec);
  ProbeConfig pc;
  pc.frequent_set = identify_biased(build_corpus_instances(bench.train), Criterion::kFrequency, 3, 0.10);
  pc.classifier.epochs = 30;
  const auto r = run_probe(bench.train, bench.test, pc);
  double head = 0;
  for (const auto& d : bench.test) head += d.gold_entities.at(1)[0] == synthetic_entity(0) ? 1 : 0;
  const double majority = head / static_cast<double>(bench.test.size());
  EXPECT_GT(r.full.entity_f1, 0.9);
  // No label signal survives, so the probe cannot beat always guessing the
  // head entity; fitting noise in the boilerplate can only cost a little.
  EXPECT_LE(r.frequent_only.entity_f1, majority + 0.02);
  EXPECT_GE(r.frequent_only.entity_f1, majority - 0.15);
}

}  // namespace
}  // namespace debias
