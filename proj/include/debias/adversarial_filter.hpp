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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "debias/contrastive.hpp"
#include "debias/corpus.hpp"
#include "debias/entity_predictor.hpp"

namespace debias {

enum class EasinessDenominator { kEvaluators, kAllLearners };

inline ClassifierConfig default_learner_config() {
  ClassifierConfig c;
  c.epochs = 50;
  c.tolerance = 1e-4;
  return c;
}

struct FilterConfig {
  int num_learners = 100;
  double train_fraction = 0.30;
  double accuracy_threshold = 0.75;
  int64_t min_filtered = 500;
  int max_iterations = 100;
  uint64_t seed = 0;
  EasinessDenominator denominator = EasinessDenominator::kEvaluators;
  // Weak learner settings; classes are always taken from the learner's sample.
  ClassifierConfig learner = default_learner_config();

  void validate() const;
};

enum class Termination { kMinFiltered, kMaxIterations };
std::string termination_name(Termination t);  // "min_filtered" | "max_iterations"

struct FilterIteration {
  int64_t filtered = 0;
  int64_t retained = 0;
  std::map<std::string, int64_t> entity_counts;  // label counts of the survivors
  int64_t min_evaluations = 0;                    // fewest learners holding out one instance
};

struct FilterReport {
  int64_t initial_size = 0;
  std::map<std::string, int64_t> initial_counts;
  std::vector<FilterIteration> iterations;
  Termination termination = Termination::kMinFiltered;
};

struct FilterResult {
  std::vector<size_t> retained;  // ascending indices into the input
  FilterReport report;
};

// Held-out predictions of one weak learner.
struct LearnerOutcome {
  std::vector<size_t> evaluated;  // indices into the full instance set
  std::vector<uint8_t> correct;
};

// Learner k of an iteration: trains on floor(train_fraction * |current|)
// instances drawn with derive_seed(seed, "af", iteration, k) and predicts the
// rest of `current`. A single-class sample predicts that class.
LearnerOutcome run_learner(const FeatureMatrix& features, const std::vector<std::string>& labels,
                           std::span<const size_t> current, const FilterConfig& config,
                           int iteration, int learner);

struct EasinessScores {
  std::vector<double> easiness;       // aligned with `current`
  std::vector<int64_t> evaluations;   // aligned with `current`
};

// Aggregates the committee for one iteration; learners run in parallel.
EasinessScores score_easiness(const FeatureMatrix& features, const std::vector<std::string>& labels,
                              std::span<const size_t> current, const FilterConfig& config,
                              int iteration);
// Combines learner outcomes in learner order.
EasinessScores aggregate_outcomes(const std::vector<LearnerOutcome>& outcomes,
                                  std::span<const size_t> current, size_t total,
                                  const FilterConfig& config);

FilterResult af_lite(const FeatureMatrix& features, const std::vector<std::string>& labels,
                     const FilterConfig& config);

struct EntityTrajectory {
  std::vector<std::string> entities;          // ranked by original frequency
  std::vector<std::vector<int64_t>> counts;   // [entity][iteration], iteration 0 = original
};

EntityTrajectory entity_trajectory(const FilterReport& report, size_t top_k);

// Shannon entropy of the counts divided by log(support); labels in `exclude`
// are ignored. 0 when fewer than two labels remain.
double normalized_entropy(const std::map<std::string, int64_t>& counts, size_t support,
                          const std::vector<std::string>& exclude = {});

// Fresh linear head over frozen features of the retained instances. The class
// list defaults to every label of `instances` so dropped entities keep a row
// with zero support.
LinearClassifier finetune_on_retained(const Featurizer& featurizer,
                                      const std::vector<TimestepInstance>& instances,
                                      std::span<const size_t> retained, ClassifierConfig config);
LinearClassifier finetune_on_retained(const EncoderModel& encoder,
                                      const std::vector<TimestepInstance>& instances,
                                      std::span<const size_t> retained,
                                      const ClassifierConfig& config);

}  // namespace debias
