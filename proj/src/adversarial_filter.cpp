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

#include "debias/adversarial_filter.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "debias/rng.hpp"

namespace debias {

void FilterConfig::validate() const {
  if (num_learners < 1) throw ConfigError("num_learners must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (!(accuracy_threshold >= 0.0 && accuracy_threshold <= 1.0)) {
    throw ConfigError("accuracy_threshold must lie in [0, 1]");
  }
  if (min_filtered < 0) throw ConfigError("min_filtered must be >= 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

std::string termination_name(Termination t) {
  return t == Termination::kMinFiltered ? "min_filtered" : "max_iterations";
}

namespace {

std::map<std::string, int64_t> count_labels(const std::vector<std::string>& labels,
                                            std::span<const size_t> subset) {
  std::map<std::string, int64_t> counts;
  for (size_t i : subset) ++counts[labels[i]];
  return counts;
}

}  // namespace

LearnerOutcome run_learner(const FeatureMatrix& features, const std::vector<std::string>& labels,
                           std::span<const size_t> current, const FilterConfig& config,
                           int iteration, int learner) {
  const size_t sample_size =
      static_cast<size_t>(std::floor(config.train_fraction * static_cast<double>(current.size())));
  Rng rng(derive_seed(config.seed, "af", static_cast<uint64_t>(iteration),
                      static_cast<uint64_t>(learner)));
  const std::vector<size_t> picks = rng.sample_without_replacement(current.size(), sample_size);
  std::vector<uint8_t> in_sample(current.size(), 0);
  for (size_t p : picks) in_sample[p] = 1;

  LearnerOutcome out;
  if (sample_size == 0) return out;
  std::vector<size_t> train_rows;
  std::vector<std::string> train_labels;
  train_rows.reserve(sample_size);
  for (size_t pos = 0; pos < current.size(); ++pos) {
    if (in_sample[pos]) {
      train_rows.push_back(current[pos]);
      train_labels.push_back(labels[current[pos]]);
    }
  }
  const std::set<std::string> distinct(train_labels.begin(), train_labels.end());

  std::optional<LinearClassifier> clf;
  if (distinct.size() >= 2) {
    ClassifierConfig cc = config.learner;
    cc.classes.clear();
    cc.seed = derive_seed(config.seed, "af-learner", static_cast<uint64_t>(iteration),
                          static_cast<uint64_t>(learner));
    clf = train_classifier(features.select(train_rows), train_labels, cc);
  }
  for (size_t pos = 0; pos < current.size(); ++pos) {
    if (in_sample[pos]) continue;
    const size_t idx = current[pos];
    const std::string predicted =
        clf ? clf->classes[predict(*clf, features.row(idx)).class_index] : *distinct.begin();
    out.evaluated.push_back(idx);
    out.correct.push_back(predicted == labels[idx] ? 1 : 0);
  }
  return out;
}

EasinessScores aggregate_outcomes(const std::vector<LearnerOutcome>& outcomes,
                                  std::span<const size_t> current, size_t total,
                                  const FilterConfig& config) {
  std::vector<int64_t> hits(total, 0);
  std::vector<int64_t> evals(total, 0);
  for (const LearnerOutcome& o : outcomes) {
    for (size_t j = 0; j < o.evaluated.size(); ++j) {
      ++evals[o.evaluated[j]];
      hits[o.evaluated[j]] += o.correct[j];
    }
  }
  EasinessScores scores;
  scores.easiness.reserve(current.size());
  scores.evaluations.reserve(current.size());
  for (size_t idx : current) {
    const int64_t denom = config.denominator == EasinessDenominator::kEvaluators
                              ? evals[idx]
                              : static_cast<int64_t>(config.num_learners);
    scores.easiness.push_back(denom > 0 ? static_cast<double>(hits[idx]) / static_cast<double>(denom)
                                        : 0.0);
    scores.evaluations.push_back(evals[idx]);
  }
  return scores;
}

EasinessScores score_easiness(const FeatureMatrix& features, const std::vector<std::string>& labels,
                              std::span<const size_t> current, const FilterConfig& config,
                              int iteration) {
  std::vector<LearnerOutcome> outcomes(static_cast<size_t>(config.num_learners));
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < config.num_learners; ++k) {
    outcomes[static_cast<size_t>(k)] = run_learner(features, labels, current, config, iteration, k);
  }
  return aggregate_outcomes(outcomes, current, features.rows, config);
}

FilterResult af_lite(const FeatureMatrix& features, const std::vector<std::string>& labels,
                     const FilterConfig& config) {
  config.validate();
  if (features.rows == 0) throw DegenerateDataError("adversarial filtering needs instances");
  if (features.rows != labels.size()) throw DomainError("features and labels differ in length");

  FilterResult result;
  std::vector<size_t> current(features.rows);
  for (size_t i = 0; i < current.size(); ++i) current[i] = i;
  result.report.initial_size = static_cast<int64_t>(current.size());
  result.report.initial_counts = count_labels(labels, current);

  for (int iteration = 1;; ++iteration) {
    const EasinessScores scores = score_easiness(features, labels, current, config, iteration);
    std::vector<size_t> survivors;
    FilterIteration it;
    it.min_evaluations = scores.evaluations.empty()
                             ? 0
                             : *std::min_element(scores.evaluations.begin(), scores.evaluations.end());
    for (size_t pos = 0; pos < current.size(); ++pos) {
      if (scores.easiness[pos] >= config.accuracy_threshold) {
        ++it.filtered;
      } else {
        survivors.push_back(current[pos]);
      }
    }
    current = std::move(survivors);
    it.retained = static_cast<int64_t>(current.size());
    it.entity_counts = count_labels(labels, current);
    const int64_t filtered = it.filtered;
    result.report.iterations.push_back(std::move(it));
    if (filtered < config.min_filtered || current.empty()) {
      result.report.termination = Termination::kMinFiltered;
      break;
    }
    if (iteration >= config.max_iterations) {
      result.report.termination = Termination::kMaxIterations;
      break;
    }
  }
  result.retained = std::move(current);
  return result;
}

EntityTrajectory entity_trajectory(const FilterReport& report, size_t top_k) {
  std::vector<std::pair<std::string, int64_t>> ranked(report.initial_counts.begin(),
                                                      report.initial_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k) ranked.resize(top_k);
  EntityTrajectory traj;
  for (const auto& [entity, count] : ranked) {
    traj.entities.push_back(entity);
    std::vector<int64_t> row{count};
    for (const FilterIteration& it : report.iterations) {
      auto found = it.entity_counts.find(entity);
      row.push_back(found == it.entity_counts.end() ? 0 : found->second);
    }
    traj.counts.push_back(std::move(row));
  }
  return traj;
}

double normalized_entropy(const std::map<std::string, int64_t>& counts, size_t support,
                          const std::vector<std::string>& exclude) {
  double total = 0.0;
  for (const auto& [label, c] : counts) {
    if (std::find(exclude.begin(), exclude.end(), label) == exclude.end()) total += static_cast<double>(c);
  }
  if (support < 2 || total <= 0.0) return 0.0;
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    if (c <= 0 || std::find(exclude.begin(), exclude.end(), label) != exclude.end()) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(support));
}

LinearClassifier finetune_on_retained(const Featurizer& featurizer,
                                      const std::vector<TimestepInstance>& instances,
                                      std::span<const size_t> retained, ClassifierConfig config) {
  if (retained.empty()) {
    throw DegenerateDataError(
        "adversarial filtering retained no instances; raise accuracy_threshold or min_filtered");
  }
  if (config.classes.empty()) {
    std::set<std::string> all;
    for (const TimestepInstance& inst : instances) all.insert(inst.label.key());
    config.classes.assign(all.begin(), all.end());
  }
  std::vector<TimestepInstance> kept;
  std::vector<std::string> labels;
  kept.reserve(retained.size());
  for (size_t i : retained) {
    if (i >= instances.size()) throw std::out_of_range("retained index out of range");
    kept.push_back(instances[i]);
    labels.push_back(instances[i].label.key());
  }
  return train_classifier(featurizer.matrix(kept), labels, config);
}

LinearClassifier finetune_on_retained(const EncoderModel& encoder,
                                      const std::vector<TimestepInstance>& instances,
                                      std::span<const size_t> retained,
                                      const ClassifierConfig& config) {
  return finetune_on_retained(Featurizer(encoder), instances, retained, config);
}

}  // namespace debias
