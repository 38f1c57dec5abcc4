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
#include <string>
#include <unordered_set>
#include <vector>

#include "debias/corpus.hpp"
#include "debias/ngram_stats.hpp"

namespace debias {

struct TypeCount {
  NGram ngram;
  int64_t count = 0;
};

// N-gram types over every utterance with frequency >= min_freq, ranked by
// count descending then n-gram ascending. N-grams never span turns.
std::vector<TypeCount> collect_types(const std::vector<Dialogue>& dialogues, size_t n,
                                     int64_t min_freq = 10);

struct TypePartition {
  std::vector<NGram> train;  // most frequent types
  std::vector<NGram> test;
};

// The top ceil(train_share * |types|) ranked types go to train.
TypePartition partition_types(const std::vector<TypeCount>& types, double train_share = 0.70);

struct SplitAssignment {
  std::vector<std::string> train_ids;  // corpus order
  std::vector<std::string> test_ids;
  std::vector<NGram> train_ngrams;
  std::vector<NGram> test_ngrams;
};

// Whole dialogues go to the partition whose types occur more often in them;
// ties and dialogues with no partitioned type go to train.
SplitAssignment assign_instances(const std::vector<Dialogue>& dialogues,
                                 const TypePartition& partition, size_t n);

enum class OverlapWeighting { kOccurrence, kType };

// Share of test n-grams whose type also occurs in train. Occurrence weighting
// counts every test occurrence; type weighting counts distinct test types.
double overlap_ratio(const std::vector<Dialogue>& dialogues,
                     const std::vector<std::string>& train_ids,
                     const std::vector<std::string>& test_ids, size_t n,
                     OverlapWeighting weighting = OverlapWeighting::kOccurrence);

// Shuffled dialogue split with ceil(train_share * N) training dialogues.
void random_split(const std::vector<Dialogue>& dialogues, double train_share, uint64_t seed,
                  std::vector<std::string>& train_ids, std::vector<std::string>& test_ids);

struct ResplitConfig {
  size_t n = 3;
  int64_t min_freq = 10;
  double train_share = 0.70;
  OverlapWeighting weighting = OverlapWeighting::kOccurrence;
  int baseline_splits = 10;
  uint64_t seed = 0;
};

struct SplitReport {
  double overlap_after = 0.0;
  double overlap_random_baseline = 0.0;  // mean over baseline_splits random splits
  size_t train_dialogues = 0;
  size_t test_dialogues = 0;
  size_t qualifying_types = 0;
  size_t train_types = 0;
  size_t test_types = 0;
};

struct ResplitResult {
  SplitAssignment assignment;
  SplitReport report;
};

// Baseline split i uses derive_seed(seed, "resplit-baseline", i).
ResplitResult resplit(const std::vector<Dialogue>& dialogues, const ResplitConfig& config);

}  // namespace debias
