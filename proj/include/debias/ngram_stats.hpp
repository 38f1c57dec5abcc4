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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "debias/corpus.hpp"

namespace debias {

struct NGram {
  TokenSeq tokens;
  auto operator<=>(const NGram&) const = default;
  bool operator==(const NGram&) const = default;
  std::string str() const { return join(tokens); }
};

struct NGramHash {
  size_t operator()(const NGram& g) const noexcept;
};

using NGramCounts = std::unordered_map<NGram, int64_t, NGramHash>;

// Contiguous n-token windows. Windows never contain a marker token, so
// n-grams never span utterance boundaries.
std::vector<NGram> extract_ngrams(const TokenSeq& tokens, size_t n);

struct NGramProfile {
  size_t n = 3;
  NGramCounts counts;
  // n-gram -> (label key -> count); one entry per n-gram occurrence.
  std::unordered_map<NGram, std::map<std::string, int64_t>, NGramHash> joint_counts;
  // label key -> number of instances carrying it.
  std::map<std::string, int64_t> entity_counts;
  int64_t total_instances = 0;
  int64_t total_occurrences = 0;

  void merge(const NGramProfile& other);
  int64_t joint(const NGram& g, const std::string& label) const;
};

// Parallel over instances; counts are merged from per-thread partials.
NGramProfile build_profile(const std::vector<TimestepInstance>& instances, size_t n);

enum class Criterion { kFrequency, kMutualInformation, kJsd };
std::string criterion_name(Criterion c);  // "freq" | "mi" | "jsd"
Criterion parse_criterion(const std::string& name);

struct BiasedEntry {
  NGram ngram;
  double score = 0.0;
};

struct BiasedTokenSet {
  Criterion criterion = Criterion::kFrequency;
  size_t n = 3;
  double cutoff_fraction = 0.10;
  std::vector<BiasedEntry> entries;  // score descending
  bool empty() const { return entries.empty(); }
};

// ceil(cutoff * count), guarding against floating error at exact multiples.
size_t cutoff_count(double cutoff, size_t count);

BiasedTokenSet rank_frequency(const NGramProfile& profile, double cutoff);

// Weighted pointwise term p(a,b) * log2(p(a,b) / (p(a) p(b))) with
//   p(a)   = counts[a] / total_occurrences
//   p(a,b) = joint[a][b] / total_occurrences
//   p(b)   = entity_counts[b] / total_instances
double mi_score(const NGramProfile& profile, const NGram& a, const std::string& label);

struct PairScore {
  NGram ngram;
  std::string label;
  double score = 0.0;
};
// Every (n-gram, label) pair of the profile, score descending with
// lexicographic tie-break on (n-gram, label).
std::vector<PairScore> mi_pair_scores(const NGramProfile& profile);
BiasedTokenSet rank_mi(const NGramProfile& profile, double cutoff);

struct EntityDistribution {
  std::map<std::string, double> probs;  // support is the key set

  // MLE over the given support; labels outside the support are an error.
  static EntityDistribution from_counts(const std::map<std::string, int64_t>& counts,
                                        const std::vector<std::string>& support);
  double total() const;
};

// Base-2 Jensen-Shannon divergence in [0, 1].
double jsd(const EntityDistribution& p, const EntityDistribution& q);

struct NGramScore {
  NGram ngram;
  double score = 0.0;
};
// JSD between the label distribution of instances containing the n-gram and
// of those not containing it, for every n-gram type that is absent from at
// least one instance. Score descending, lexicographic tie-break.
std::vector<NGramScore> jsd_scores(const std::vector<TimestepInstance>& instances, size_t n);
BiasedTokenSet rank_jsd(const std::vector<TimestepInstance>& instances, size_t n, double cutoff);

// Greedy leftmost matcher over a biased set, iterated to a fixpoint.
class BiasedMatcher {
 public:
  explicit BiasedMatcher(const BiasedTokenSet& biased);
  // removed[i] is true when token i falls inside a removed biased n-gram.
  std::vector<bool> removal_mask(const TokenSeq& tokens) const;
  bool empty() const { return set_.empty(); }
  bool contains(const NGram& g) const { return set_.contains(g); }
  size_t n() const { return n_; }

 private:
  size_t n_;
  std::unordered_set<NGram, NGramHash> set_;
};

TokenSeq debias_input(const TokenSeq& tokens, const BiasedTokenSet& biased);
TokenSeq debias_input(const TokenSeq& tokens, const BiasedMatcher& matcher);

// Complement of debias_input: markers plus exactly the tokens the matcher
// removes, in their original order.
TokenSeq frequent_phrases_only(const TokenSeq& tokens, const BiasedMatcher& matcher);

struct PositivePair {
  TokenSeq original;
  TokenSeq debiased;
  std::string dialogue_id;
  int timestep = 1;
  int turn = 0;
};

std::vector<PositivePair> build_positive_pairs(const std::vector<TimestepInstance>& instances,
                                               const BiasedTokenSet& biased);

BiasedTokenSet identify_biased(const std::vector<TimestepInstance>& instances, Criterion criterion,
                               size_t n, double cutoff);

}  // namespace debias
