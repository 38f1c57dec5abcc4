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
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "debias/ngram_stats.hpp"

namespace debias {

inline constexpr std::string_view kUnknownToken = "<unk>";

class Vocab {
 public:
  Vocab();  // just the OOV slot and the three markers
  explicit Vocab(std::vector<std::string> tokens);

  // Vocabulary over every token of the pairs plus markers; id 0 is OOV.
  static Vocab from_pairs(const std::vector<PositivePair>& pairs);

  size_t id(const std::string& token) const;  // 0 when unknown
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, size_t> index_;
};

// Mean-pooled trainable embeddings followed by a square linear projection.
struct EncoderModel {
  Vocab vocab;
  size_t dim = 32;
  std::vector<double> embeddings;  // vocab.size() x dim, row-major
  std::vector<double> projection;  // dim x dim, row-major

  static EncoderModel initialize(Vocab vocab, size_t dim, uint64_t seed);

  double* embedding_row(size_t id) { return embeddings.data() + id * dim; }
  const double* embedding_row(size_t id) const { return embeddings.data() + id * dim; }
  bool all_finite() const;
};

std::vector<size_t> to_ids(const EncoderModel& model, const TokenSeq& tokens);

std::vector<double> encode(const EncoderModel& model, const TokenSeq& tokens);
std::vector<double> encode_ids(const EncoderModel& model, std::span<const size_t> ids);
// Parallel over sequences.
std::vector<std::vector<double>> encode_batch(const EncoderModel& model,
                                              const std::vector<TokenSeq>& sequences);

double cosine_sim(std::span<const double> u, std::span<const double> v);

struct ContrastiveBatch {
  std::vector<const PositivePair*> pairs;
  double temperature = 0.05;
};

struct EncoderGradients {
  std::vector<double> embeddings;
  std::vector<double> projection;
};

// InfoNCE with in-batch negatives, in nats.
double info_nce_loss(const EncoderModel& model, const ContrastiveBatch& batch);

// Loss and its exact gradient. Encodings and per-sequence backprop run in
// parallel; every reduction happens in a fixed order.
double loss_and_gradient(const EncoderModel& model, const ContrastiveBatch& batch,
                         EncoderGradients& grads);
EncoderGradients loss_gradient(const EncoderModel& model, const ContrastiveBatch& batch);

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 1.0;
  size_t batch_size = 32;
  uint64_t seed = 0;
  double temperature = 0.1;
  size_t dim = 32;
  double validation_fraction = 0.10;
};

struct LossPoint {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct ContrastiveResult {
  EncoderModel model;    // lowest validation loss seen, initial model included
  EncoderModel initial;  // the model before the first update
  std::vector<LossPoint> curve;
  int best_epoch = 0;
  std::vector<size_t> validation_indices;  // into the input pairs
};

ContrastiveResult train_contrastive(const std::vector<PositivePair>& pairs,
                                    const TrainConfig& config);

// Mean cosine(z_original, z_debiased) over the selected pairs.
double mean_pair_cosine(const EncoderModel& model, const std::vector<PositivePair>& pairs,
                        std::span<const size_t> indices);

}  // namespace debias
