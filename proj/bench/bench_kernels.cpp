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

// Serial reference kernels against their OpenMP counterparts on the synthetic
// benchmark. Each pair shares its inputs, so the time ratio is the speedup of
// the production kernel over its reference.

#include <numeric>

#include <benchmark/benchmark.h>

#include "debias/adversarial_filter.hpp"
#include "debias/contrastive.hpp"
#include "debias/entity_predictor.hpp"
#include "debias/ngram_stats.hpp"
#include "debias/reference.hpp"
#include "debias/resplit.hpp"
#include "debias/synth.hpp"

namespace {

using namespace debias;

struct Workload {
  SyntheticBench bench;
  std::vector<Dialogue> all;
  std::vector<TimestepInstance> instances;
  std::vector<std::string> labels;
  std::vector<PositivePair> pairs;
  EncoderModel encoder;
  FeatureMatrix bag;
  std::vector<size_t> everyone;
};

const Workload& workload() {
  static const Workload w = [] {
    Workload w;
    SyntheticBenchSpec spec;
    spec.train_size = 1200;
    spec.cue_strength = 0.8;
    spec.seed = 1;
    w.bench = generate_synthetic(spec);
    w.all = w.bench.train;
    w.all.insert(w.all.end(), w.bench.test.begin(), w.bench.test.end());
    w.instances = build_corpus_instances(w.bench.train);
    for (const auto& i : w.instances) w.labels.push_back(i.label.key());
    w.pairs = build_positive_pairs(w.instances, identify_biased(w.instances, Criterion::kFrequency, 3, 0.10));
    w.encoder = EncoderModel::initialize(Vocab::from_pairs(w.pairs), 32, 1);
    std::vector<TokenSeq> contexts;
    for (const auto& i : w.instances) contexts.push_back(i.context);
    w.bag = Featurizer(NgramVocab::build(contexts, 1)).matrix(w.instances);
    w.everyone.resize(w.instances.size());
    std::iota(w.everyone.begin(), w.everyone.end(), 0);
    return w;
  }();
  return w;
}

void BM_BuildProfile_Serial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::build_profile(workload().instances, 3));
}
void BM_BuildProfile_Parallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_profile(workload().instances, 3));
}

void BM_JsdScores_Serial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::jsd_scores(workload().instances, 3));
}
void BM_JsdScores_Parallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(jsd_scores(workload().instances, 3));
}

ContrastiveBatch batch_of(size_t size) {
  ContrastiveBatch b;
  b.temperature = 0.1;
  for (size_t i = 0; i < size; ++i) b.pairs.push_back(&workload().pairs[i]);
  return b;
}

void BM_InfoNceGradient_Serial(benchmark::State& state) {
  const ContrastiveBatch b = batch_of(static_cast<size_t>(state.range(0)));
  EncoderGradients g;
  for (auto _ : state) benchmark::DoNotOptimize(reference::loss_and_gradient(workload().encoder, b, g));
}
void BM_InfoNceGradient_Parallel(benchmark::State& state) {
  const ContrastiveBatch b = batch_of(static_cast<size_t>(state.range(0)));
  EncoderGradients g;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(workload().encoder, b, g));
}

FilterConfig committee() {
  FilterConfig c;
  c.num_learners = 20;
  c.seed = 5;
  return c;
}

void BM_ScoreEasiness_Serial(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::score_easiness(w.bag, w.labels, w.everyone, committee(), 0));
  }
}
void BM_ScoreEasiness_Parallel(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) benchmark::DoNotOptimize(score_easiness(w.bag, w.labels, w.everyone, committee(), 0));
}

ClassifierConfig bag_classifier() {
  ClassifierConfig c;
  c.epochs = 20;
  c.standardize = Standardize::kOff;
  return c;
}

void BM_TrainClassifier_Dense(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::train_classifier_dense(w.bag, w.labels, bag_classifier()));
  }
}
void BM_TrainClassifier_Sparse(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) benchmark::DoNotOptimize(train_classifier(w.bag, w.labels, bag_classifier()));
}

void BM_CollectTypes_Serial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::collect_types(workload().all, 3, 10));
}
void BM_CollectTypes_Parallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(collect_types(workload().all, 3, 10));
}

BENCHMARK(BM_BuildProfile_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildProfile_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_JsdScores_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_JsdScores_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InfoNceGradient_Serial)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_InfoNceGradient_Parallel)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScoreEasiness_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreEasiness_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainClassifier_Dense)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainClassifier_Sparse)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CollectTypes_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CollectTypes_Parallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
