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

// Serial reference versions of the parallel kernels. They share no code with
// the parallel paths beyond the primitive helpers, and exist for tests and
// benchmarks.

#include <span>
#include <string>
#include <vector>

#include "debias/adversarial_filter.hpp"
#include "debias/contrastive.hpp"
#include "debias/ngram_stats.hpp"
#include "debias/resplit.hpp"

namespace debias::reference {

NGramProfile build_profile(const std::vector<TimestepInstance>& instances, size_t n);

// Materializes the present/absent label distributions of each n-gram by a
// full pass over the instances.
std::vector<NGramScore> jsd_scores(const std::vector<TimestepInstance>& instances, size_t n);

double loss_and_gradient(const EncoderModel& model, const ContrastiveBatch& batch,
                         EncoderGradients& grads);

EasinessScores score_easiness(const FeatureMatrix& features, const std::vector<std::string>& labels,
                              std::span<const size_t> current, const FilterConfig& config,
                              int iteration);

// Dense SGD without standardization; the sparse training path must match it.
LinearClassifier train_classifier_dense(const FeatureMatrix& features,
                                        const std::vector<std::string>& labels,
                                        const ClassifierConfig& config);

std::vector<TypeCount> collect_types(const std::vector<Dialogue>& dialogues, size_t n,
                                     int64_t min_freq);

}  // namespace debias::reference
