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

#include "debias/reference.hpp"

#include "debias/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace debias::reference {

NGramProfile build_profile(const std::vector<TimestepInstance>& instances, size_t n) {
  NGramProfile p;
  p.n = n;
  for (const TimestepInstance& inst : instances) {
    const std::string label = inst.label.key();
    for (const NGram& g : extract_ngrams(inst.context, n)) {
      ++p.counts[g];
      ++p.joint_counts[g][label];
      ++p.total_occurrences;
    }
    ++p.entity_counts[label];
    ++p.total_instances;
  }
  return p;
}

std::vector<NGramScore> jsd_scores(const std::vector<TimestepInstance>& instances, size_t n) {
  std::vector<std::set<NGram>> grams(instances.size());
  std::set<NGram> types;
  std::set<std::string> labels;
  for (size_t i = 0; i < instances.size(); ++i) {
    for (const NGram& g : extract_ngrams(instances[i].context, n)) grams[i].insert(g);
    types.insert(grams[i].begin(), grams[i].end());
    labels.insert(instances[i].label.key());
  }
  std::vector<NGramScore> out;
  for (const NGram& g : types) {
    std::map<std::string, double> with;
    std::map<std::string, double> without;
    double n_with = 0.0;
    double n_without = 0.0;
    for (size_t i = 0; i < instances.size(); ++i) {
      const std::string key = instances[i].label.key();
      if (grams[i].contains(g)) {
        with[key] += 1.0;
        n_with += 1.0;
      } else {
        without[key] += 1.0;
        n_without += 1.0;
      }
    }
    if (n_without == 0.0) continue;
    double div = 0.0;
    for (const std::string& label : labels) {
      const double p = with[label] / n_with;
      const double q = without[label] / n_without;
      const double m = 0.5 * (p + q);
      if (p > 0.0) div += 0.5 * p * std::log2(p / m);
      if (q > 0.0) div += 0.5 * q * std::log2(q / m);
    }
    out.push_back({g, std::clamp(div, 0.0, 1.0)});
  }
  std::sort(out.begin(), out.end(), [](const NGramScore& a, const NGramScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ngram < b.ngram;
  });
  return out;
}

double loss_and_gradient(const EncoderModel& model, const ContrastiveBatch& batch,
                         EncoderGradients& grads) {
  if (!(batch.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  const size_t n = batch.pairs.size();
  if (n == 0) throw DomainError("contrastive batch must be nonempty");
  const size_t d = model.dim;
  const double tau = batch.temperature;

  std::vector<std::vector<size_t>> ids(2 * n);
  std::vector<std::vector<double>> mean(2 * n, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> z(2 * n);
  for (size_t s = 0; s < 2 * n; ++s) {
    const PositivePair& p = *batch.pairs[s % n];
    ids[s] = to_ids(model, s < n ? p.original : p.debiased);
    for (size_t id : ids[s]) {
      for (size_t c = 0; c < d; ++c) mean[s][c] += model.embeddings[id * d + c];
    }
    if (!ids[s].empty()) {
      for (double& v : mean[s]) v /= static_cast<double>(ids[s].size());
    }
    z[s] = encode_ids(model, ids[s]);
  }

  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<double> sim(n * n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) sim[i * n + j] = cosine_sim(z[i], z[n + j]) / tau;
  }

  double loss = 0.0;
  std::vector<double> dsim(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double mx = sim[i * n];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, sim[i * n + j]);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) sum += std::exp(sim[i * n + j] - mx);
    loss += mx + std::log(sum) - sim[i * n + i];
    for (size_t j = 0; j < n; ++j) {
      const double soft = std::exp(sim[i * n + j] - mx) / sum;
      dsim[i * n + j] = (soft - (i == j ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  loss /= static_cast<double>(n);

  // d cos(a, b) / d a = b / (|a||b|) - cos * a / |a|^2.
  std::vector<std::vector<double>> dz(2 * n, std::vector<double>(d, 0.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const std::vector<double>& a = z[i];
      const std::vector<double>& b = z[n + j];
      const double na = norm(a);
      const double nb = norm(b);
      if (na == 0.0 || nb == 0.0) continue;
      const double cos = cosine_sim(a, b);
      const double g = dsim[i * n + j] / tau;
      for (size_t c = 0; c < d; ++c) {
        dz[i][c] += g * (b[c] / (na * nb) - cos * a[c] / (na * na));
        dz[n + j][c] += g * (a[c] / (na * nb) - cos * b[c] / (nb * nb));
      }
    }
  }

  grads.embeddings.assign(model.embeddings.size(), 0.0);
  grads.projection.assign(model.projection.size(), 0.0);
  for (size_t s = 0; s < 2 * n; ++s) {
    for (size_t r = 0; r < d; ++r) {
      for (size_t c = 0; c < d; ++c) grads.projection[r * d + c] += dz[s][r] * mean[s][c];
    }
    if (ids[s].empty()) continue;
    const double inv = 1.0 / static_cast<double>(ids[s].size());
    for (size_t c = 0; c < d; ++c) {
      double dm = 0.0;
      for (size_t r = 0; r < d; ++r) dm += model.projection[r * d + c] * dz[s][r];
      for (size_t id : ids[s]) grads.embeddings[id * d + c] += dm * inv;
    }
  }
  return loss;
}

EasinessScores score_easiness(const FeatureMatrix& features, const std::vector<std::string>& labels,
                              std::span<const size_t> current, const FilterConfig& config,
                              int iteration) {
  std::vector<LearnerOutcome> outcomes;
  outcomes.reserve(static_cast<size_t>(config.num_learners));
  for (int k = 0; k < config.num_learners; ++k) {
    outcomes.push_back(run_learner(features, labels, current, config, iteration, k));
  }
  return aggregate_outcomes(outcomes, current, features.rows, config);
}

LinearClassifier train_classifier_dense(const FeatureMatrix& features,
                                        const std::vector<std::string>& labels,
                                        const ClassifierConfig& config) {
  std::vector<std::string> classes = config.classes;
  if (classes.empty()) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    classes.assign(distinct.begin(), distinct.end());
  }
  const size_t n = features.rows;
  const size_t d = features.cols;
  LinearClassifier model = LinearClassifier::zeros(classes, d);
  std::vector<size_t> y(n);
  for (size_t i = 0; i < n; ++i) {
    y[i] = *model.class_index(labels[i]);
    ++model.class_support[y[i]];
  }
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  double previous = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "classifier", static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    double loss = 0.0;
    for (size_t i : order) {
      const auto xi = features.row(i);
      std::vector<double> p = model.logits(xi);
      const double mx = *std::max_element(p.begin(), p.end());
      double sum = 0.0;
      for (double& v : p) sum += (v = std::exp(v - mx));
      for (double& v : p) v /= sum;
      loss -= std::log(std::max(p[y[i]], 1e-300));
      for (size_t k = 0; k < classes.size(); ++k) {
        const double g = p[k] - (k == y[i] ? 1.0 : 0.0);
        for (size_t c = 0; c < d; ++c) {
          double& w = model.weights[k * d + c];
          w = w * (1.0 - config.learning_rate * config.l2) - config.learning_rate * g * xi[c];
        }
        model.bias[k] -= config.learning_rate * g;
      }
    }
    loss /= static_cast<double>(n);
    if (config.tolerance > 0.0 && std::isfinite(previous) &&
        std::abs(previous - loss) / std::max(previous, 1e-12) < config.tolerance) {
      break;
    }
    previous = loss;
  }
  return model;
}

std::vector<TypeCount> collect_types(const std::vector<Dialogue>& dialogues, size_t n,
                                     int64_t min_freq) {
  std::map<NGram, int64_t> counts;
  for (const Dialogue& d : dialogues) {
    for (const Turn& t : d.turns) {
      for (const NGram& g : extract_ngrams(t.text, n)) ++counts[g];
    }
  }
  std::vector<TypeCount> out;
  for (const auto& [g, c] : counts) {
    if (c >= min_freq) out.push_back({g, c});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TypeCount& a, const TypeCount& b) { return a.count > b.count; });
  return out;
}

}  // namespace debias::reference
