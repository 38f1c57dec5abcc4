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

#include "debias/contrastive.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "debias/rng.hpp"

namespace debias {

Vocab::Vocab()
    : Vocab(std::vector<std::string>{std::string(kUnknownToken), std::string(kUserMarker),
                                     std::string(kSystemMarker), std::string(kResponseMarker)}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_.front() != kUnknownToken) {
    tokens_.insert(tokens_.begin(), std::string(kUnknownToken));
  }
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw DomainError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocab Vocab::from_pairs(const std::vector<PositivePair>& pairs) {
  std::set<std::string> words;
  for (const PositivePair& p : pairs) {
    for (const Token& t : p.original) words.insert(t);
    for (const Token& t : p.debiased) words.insert(t);
  }
  std::vector<std::string> tokens{std::string(kUnknownToken), std::string(kUserMarker),
                                  std::string(kSystemMarker), std::string(kResponseMarker)};
  for (const std::string& w : words) {
    if (!is_marker(w) && w != kUnknownToken) tokens.push_back(w);
  }
  return Vocab(std::move(tokens));
}

size_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

EncoderModel EncoderModel::initialize(Vocab vocab, size_t dim, uint64_t seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be >= 1");
  EncoderModel m;
  m.vocab = std::move(vocab);
  m.dim = dim;
  Rng rng(seed);
  m.embeddings.resize(m.vocab.size() * dim);
  for (double& x : m.embeddings) x = rng.uniform(-0.1, 0.1);
  m.projection.resize(dim * dim);
  for (double& x : m.projection) x = rng.uniform(-0.1, 0.1);
  return m;
}

bool EncoderModel::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(embeddings.begin(), embeddings.end(), finite) &&
         std::all_of(projection.begin(), projection.end(), finite);
}

std::vector<size_t> to_ids(const EncoderModel& model, const TokenSeq& tokens) {
  std::vector<size_t> ids(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) ids[i] = model.vocab.id(tokens[i]);
  return ids;
}

namespace {

std::vector<double> mean_embedding(const EncoderModel& model, std::span<const size_t> ids) {
  std::vector<double> mean(model.dim, 0.0);
  if (ids.empty()) return mean;
  for (size_t id : ids) {
    const double* row = model.embedding_row(id);
    for (size_t c = 0; c < model.dim; ++c) mean[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (double& x : mean) x *= inv;
  return mean;
}

std::vector<double> project(const EncoderModel& model, const std::vector<double>& mean) {
  const size_t d = model.dim;
  std::vector<double> z(d, 0.0);
  for (size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (size_t c = 0; c < d; ++c) acc += model.projection[r * d + c] * mean[c];
    z[r] = acc;
  }
  return z;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// d cos(u, v) / d u, scaled by coef and accumulated into out.
void add_cosine_grad(std::span<const double> u, std::span<const double> v, double coef,
                     std::span<double> out) {
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0) return;
  const double c = dot(u, v) / (nu * nv);
  const double a = coef / (nu * nv);
  const double b = coef * c / (nu * nu);
  for (size_t k = 0; k < u.size(); ++k) out[k] += a * v[k] - b * u[k];
}

struct BatchForward {
  std::vector<std::vector<size_t>> ids;     // 2N sequences: originals then debiased
  std::vector<std::vector<double>> means;   // 2N
  std::vector<std::vector<double>> z;       // 2N
  std::vector<double> softmax;              // N x N row-major
  double loss = 0.0;
};

BatchForward forward(const EncoderModel& model, const ContrastiveBatch& batch) {
  if (!(batch.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  const size_t n = batch.pairs.size();
  if (n == 0) throw DomainError("contrastive batch must be nonempty");
  BatchForward f;
  f.ids.resize(2 * n);
  f.means.resize(2 * n);
  f.z.resize(2 * n);
  const auto seqs = static_cast<std::ptrdiff_t>(2 * n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < seqs; ++s) {
    const auto i = static_cast<size_t>(s);
    const PositivePair& p = *batch.pairs[i % n];
    f.ids[i] = to_ids(model, i < n ? p.original : p.debiased);
    f.means[i] = mean_embedding(model, f.ids[i]);
    f.z[i] = project(model, f.means[i]);
  }
  f.softmax.assign(n * n, 0.0);
  std::vector<double> row_loss(n, 0.0);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto i = static_cast<size_t>(r);
    double* row = f.softmax.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < n; ++j) {
      row[j] = cosine_sim(f.z[i], f.z[n + j]) / batch.temperature;
      mx = std::max(mx, row[j]);
    }
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
    row_loss[i] = (mx + std::log(sum)) - row[i];
    for (size_t j = 0; j < n; ++j) row[j] = std::exp(row[j] - mx) / sum;
  }
  double total = 0.0;
  for (double l : row_loss) total += l;
  f.loss = total / static_cast<double>(n);
  return f;
}

}  // namespace

std::vector<double> encode_ids(const EncoderModel& model, std::span<const size_t> ids) {
  return project(model, mean_embedding(model, ids));
}

std::vector<double> encode(const EncoderModel& model, const TokenSeq& tokens) {
  const std::vector<size_t> ids = to_ids(model, tokens);
  return encode_ids(model, ids);
}

std::vector<std::vector<double>> encode_batch(const EncoderModel& model,
                                              const std::vector<TokenSeq>& sequences) {
  std::vector<std::vector<double>> out(sequences.size());
  const auto count = static_cast<std::ptrdiff_t>(sequences.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[static_cast<size_t>(i)] = encode(model, sequences[static_cast<size_t>(i)]);
  }
  return out;
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DomainError("cosine_sim: dimension mismatch");
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double info_nce_loss(const EncoderModel& model, const ContrastiveBatch& batch) {
  return forward(model, batch).loss;
}

double loss_and_gradient(const EncoderModel& model, const ContrastiveBatch& batch,
                         EncoderGradients& grads) {
  const BatchForward f = forward(model, batch);
  const size_t n = batch.pairs.size();
  const size_t d = model.dim;
  grads.embeddings.assign(model.embeddings.size(), 0.0);
  grads.projection.assign(model.projection.size(), 0.0);

  // dL/dS_ij = (softmax_ij - delta_ij) / N and S_ij = cos(z_i, w_j) / tau.
  const double scale = 1.0 / (static_cast<double>(n) * batch.temperature);
  std::vector<std::vector<double>> dz(2 * n, std::vector<double>(d, 0.0));
  const auto seqs = static_cast<std::ptrdiff_t>(2 * n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < seqs; ++s) {
    const auto k = static_cast<size_t>(s);
    if (k < n) {
      for (size_t j = 0; j < n; ++j) {
        const double g = (f.softmax[k * n + j] - (j == k ? 1.0 : 0.0)) * scale;
        add_cosine_grad(f.z[k], f.z[n + j], g, dz[k]);
      }
    } else {
      const size_t j = k - n;
      for (size_t i = 0; i < n; ++i) {
        const double g = (f.softmax[i * n + j] - (i == j ? 1.0 : 0.0)) * scale;
        add_cosine_grad(f.z[n + j], f.z[i], g, dz[k]);
      }
    }
  }

  // z = P m: dP = sum_s dz_s m_s^T, row-parallel.
  const auto prow = static_cast<std::ptrdiff_t>(d);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t rr = 0; rr < prow; ++rr) {
    const auto r = static_cast<size_t>(rr);
    for (size_t s = 0; s < 2 * n; ++s) {
      const double g = dz[s][r];
      if (g == 0.0) continue;
      for (size_t c = 0; c < d; ++c) grads.projection[r * d + c] += g * f.means[s][c];
    }
  }

  // dm = P^T dz, then each occurrence gets dm / L.
  std::vector<std::vector<double>> dm(2 * n, std::vector<double>(d, 0.0));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < seqs; ++s) {
    const auto k = static_cast<size_t>(s);
    if (f.ids[k].empty()) continue;
    const double inv = 1.0 / static_cast<double>(f.ids[k].size());
    for (size_t r = 0; r < d; ++r) {
      const double g = dz[k][r] * inv;
      if (g == 0.0) continue;
      for (size_t c = 0; c < d; ++c) dm[k][c] += model.projection[r * d + c] * g;
    }
  }
  for (size_t s = 0; s < 2 * n; ++s) {
    for (size_t id : f.ids[s]) {
      double* row = grads.embeddings.data() + id * d;
      for (size_t c = 0; c < d; ++c) row[c] += dm[s][c];
    }
  }
  return f.loss;
}

EncoderGradients loss_gradient(const EncoderModel& model, const ContrastiveBatch& batch) {
  EncoderGradients g;
  loss_and_gradient(model, batch, g);
  return g;
}

namespace {

double batched_loss(const EncoderModel& model, const std::vector<PositivePair>& pairs,
                    std::span<const size_t> indices, const TrainConfig& config) {
  if (indices.empty()) return 0.0;
  double total = 0.0;
  size_t batches = 0;
  for (size_t start = 0; start < indices.size(); start += config.batch_size) {
    ContrastiveBatch batch{{}, config.temperature};
    const size_t end = std::min(indices.size(), start + config.batch_size);
    for (size_t i = start; i < end; ++i) batch.pairs.push_back(&pairs[indices[i]]);
    total += info_nce_loss(model, batch);
    ++batches;
  }
  return total / static_cast<double>(batches);
}

}  // namespace

ContrastiveResult train_contrastive(const std::vector<PositivePair>& pairs,
                                    const TrainConfig& config) {
  if (pairs.empty()) throw DomainError("contrastive training needs at least one pair");
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(config.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }

  ContrastiveResult result;
  EncoderModel model = EncoderModel::initialize(Vocab::from_pairs(pairs), config.dim,
                                                derive_seed(config.seed, "contrastive-init"));

  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(derive_seed(config.seed, "contrastive-split"));
  split_rng.shuffle(order);
  auto n_val = static_cast<size_t>(std::floor(config.validation_fraction *
                                              static_cast<double>(pairs.size())));
  if (n_val >= pairs.size()) n_val = pairs.size() - 1;
  std::vector<size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  // Without a held-out split the training loss stands in for validation.
  const std::vector<size_t>& monitor = val.empty() ? train : val;

  const double initial_val = batched_loss(model, pairs, monitor, config);
  const double initial_train = batched_loss(model, pairs, train, config);
  result.curve.push_back({0, initial_train, initial_val});
  result.model = model;
  result.initial = model;
  double best = initial_val;

  EncoderGradients grads;
  size_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "contrastive-shuffle", static_cast<uint64_t>(epoch)));
    rng.shuffle(train);
    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < train.size(); start += config.batch_size) {
      ContrastiveBatch batch{{}, config.temperature};
      const size_t end = std::min(train.size(), start + config.batch_size);
      for (size_t i = start; i < end; ++i) batch.pairs.push_back(&pairs[train[i]]);
      const double loss = loss_and_gradient(model, batch, grads);
      ++step;
      if (!std::isfinite(loss)) {
        throw TrainingError("contrastive loss became non-finite at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
      }
      for (size_t i = 0; i < model.embeddings.size(); ++i) {
        model.embeddings[i] -= config.learning_rate * grads.embeddings[i];
      }
      for (size_t i = 0; i < model.projection.size(); ++i) {
        model.projection[i] -= config.learning_rate * grads.projection[i];
      }
      epoch_loss += loss;
      ++batches;
    }
    if (!model.all_finite()) {
      throw TrainingError("encoder parameters diverged at epoch " + std::to_string(epoch) +
                          ", step " + std::to_string(step));
    }
    std::sort(train.begin(), train.end());
    const double val_loss = batched_loss(model, pairs, monitor, config);
    result.curve.push_back({epoch, epoch_loss / static_cast<double>(batches), val_loss});
    if (val_loss < best) {
      best = val_loss;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  result.validation_indices = std::move(val);
  return result;
}

double mean_pair_cosine(const EncoderModel& model, const std::vector<PositivePair>& pairs,
                        std::span<const size_t> indices) {
  if (indices.empty()) return 0.0;
  std::vector<double> sims(indices.size());
  const auto count = static_cast<std::ptrdiff_t>(indices.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const PositivePair& p = pairs[indices[static_cast<size_t>(k)]];
    sims[static_cast<size_t>(k)] = cosine_sim(encode(model, p.original), encode(model, p.debiased));
  }
  double s = 0.0;
  for (double x : sims) s += x;
  return s / static_cast<double>(sims.size());
}

}  // namespace debias
