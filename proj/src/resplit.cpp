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

#include "debias/resplit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "debias/rng.hpp"

namespace debias {

namespace {

using TypeSet = std::unordered_set<NGram, NGramHash>;

NGramCounts count_dialogue(const Dialogue& d, size_t n) {
  NGramCounts counts;
  for (const Turn& turn : d.turns) {
    for (NGram& g : extract_ngrams(turn.text, n)) ++counts[std::move(g)];
  }
  return counts;
}

std::map<std::string, size_t> index_by_id(const std::vector<Dialogue>& dialogues) {
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < dialogues.size(); ++i) {
    if (!index.emplace(dialogues[i].id, i).second) {
      throw SchemaError("duplicate dialogue id '" + dialogues[i].id + "'");
    }
  }
  return index;
}

}  // namespace

std::vector<TypeCount> collect_types(const std::vector<Dialogue>& dialogues, size_t n,
                                     int64_t min_freq) {
  NGramCounts total;
#pragma omp parallel
  {
    NGramCounts local;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(dialogues.size()); ++i) {
      for (auto& [g, c] : count_dialogue(dialogues[static_cast<size_t>(i)], n)) local[g] += c;
    }
#pragma omp critical(debias_collect_types)
    for (auto& [g, c] : local) total[g] += c;
  }
  std::vector<TypeCount> types;
  for (auto& [g, c] : total) {
    if (c >= min_freq) types.push_back({g, c});
  }
  std::sort(types.begin(), types.end(), [](const TypeCount& a, const TypeCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.ngram < b.ngram;
  });
  return types;
}

TypePartition partition_types(const std::vector<TypeCount>& types, double train_share) {
  if (!(train_share > 0.0 && train_share < 1.0)) throw ConfigError("train_share must lie in (0, 1)");
  const size_t cut = std::min(
      types.size(),
      static_cast<size_t>(std::ceil(train_share * static_cast<double>(types.size()) - 1e-9)));
  TypePartition p;
  for (size_t i = 0; i < types.size(); ++i) (i < cut ? p.train : p.test).push_back(types[i].ngram);
  return p;
}

SplitAssignment assign_instances(const std::vector<Dialogue>& dialogues,
                                 const TypePartition& partition, size_t n) {
  const TypeSet train_set(partition.train.begin(), partition.train.end());
  const TypeSet test_set(partition.test.begin(), partition.test.end());
  std::vector<uint8_t> to_test(dialogues.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(dialogues.size()); ++i) {
    int64_t train_hits = 0;
    int64_t test_hits = 0;
    for (const auto& [g, c] : count_dialogue(dialogues[static_cast<size_t>(i)], n)) {
      if (train_set.contains(g)) train_hits += c;
      else if (test_set.contains(g)) test_hits += c;
    }
    to_test[static_cast<size_t>(i)] = test_hits > train_hits ? 1 : 0;
  }
  SplitAssignment a;
  for (size_t i = 0; i < dialogues.size(); ++i) {
    (to_test[i] ? a.test_ids : a.train_ids).push_back(dialogues[i].id);
  }
  a.train_ngrams = partition.train;
  a.test_ngrams = partition.test;
  return a;
}

double overlap_ratio(const std::vector<Dialogue>& dialogues,
                     const std::vector<std::string>& train_ids,
                     const std::vector<std::string>& test_ids, size_t n,
                     OverlapWeighting weighting) {
  if (test_ids.empty()) throw DegenerateDataError("overlap ratio needs a nonempty test partition");
  const auto index = index_by_id(dialogues);
  auto lookup = [&](const std::string& id) -> const Dialogue& {
    auto it = index.find(id);
    if (it == index.end()) throw SchemaError("unknown dialogue id '" + id + "'");
    return dialogues[it->second];
  };
  TypeSet train_types;
  for (const std::string& id : train_ids) {
    for (auto& [g, c] : count_dialogue(lookup(id), n)) train_types.insert(g);
  }
  NGramCounts test_counts;
  for (const std::string& id : test_ids) {
    for (auto& [g, c] : count_dialogue(lookup(id), n)) test_counts[g] += c;
  }
  int64_t shared = 0;
  int64_t total = 0;
  for (const auto& [g, c] : test_counts) {
    const int64_t w = weighting == OverlapWeighting::kOccurrence ? c : 1;
    total += w;
    if (train_types.contains(g)) shared += w;
  }
  return total == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(total);
}

void random_split(const std::vector<Dialogue>& dialogues, double train_share, uint64_t seed,
                  std::vector<std::string>& train_ids, std::vector<std::string>& test_ids) {
  if (!(train_share > 0.0 && train_share < 1.0)) throw ConfigError("train_share must lie in (0, 1)");
  std::vector<size_t> order(dialogues.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const size_t cut = std::min(
      order.size(),
      static_cast<size_t>(std::ceil(train_share * static_cast<double>(order.size()) - 1e-9)));
  train_ids.clear();
  test_ids.clear();
  for (size_t k = 0; k < order.size(); ++k) {
    (k < cut ? train_ids : test_ids).push_back(dialogues[order[k]].id);
  }
}

ResplitResult resplit(const std::vector<Dialogue>& dialogues, const ResplitConfig& config) {
  if (dialogues.empty()) throw DegenerateDataError("resplit needs a nonempty corpus");
  if (config.baseline_splits < 1) throw ConfigError("baseline_splits must be >= 1");
  ResplitResult r;
  const std::vector<TypeCount> types = collect_types(dialogues, config.n, config.min_freq);
  const TypePartition partition = partition_types(types, config.train_share);
  r.assignment = assign_instances(dialogues, partition, config.n);
  if (r.assignment.test_ids.empty()) {
    throw DegenerateDataError("resplit assigned every dialogue to train; lower min_freq");
  }
  r.report.overlap_after = overlap_ratio(dialogues, r.assignment.train_ids, r.assignment.test_ids,
                                         config.n, config.weighting);
  double sum = 0.0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  for (int i = 0; i < config.baseline_splits; ++i) {
    random_split(dialogues, config.train_share,
                 derive_seed(config.seed, "resplit-baseline", static_cast<uint64_t>(i)), train_ids,
                 test_ids);
    if (test_ids.empty()) throw DegenerateDataError("random split left the test partition empty");
    sum += overlap_ratio(dialogues, train_ids, test_ids, config.n, config.weighting);
  }
  r.report.overlap_random_baseline = sum / config.baseline_splits;
  r.report.train_dialogues = r.assignment.train_ids.size();
  r.report.test_dialogues = r.assignment.test_ids.size();
  r.report.qualifying_types = types.size();
  r.report.train_types = partition.train.size();
  r.report.test_types = partition.test.size();
  return r;
}

}  // namespace debias
