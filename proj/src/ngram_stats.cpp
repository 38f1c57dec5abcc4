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

#include "debias/ngram_stats.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace debias {

size_t NGramHash::operator()(const NGram& g) const noexcept {
  size_t h = 0xCBF29CE484222325ULL;
  for (const Token& t : g.tokens) {
    h ^= std::hash<std::string>{}(t) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

std::vector<NGram> extract_ngrams(const TokenSeq& tokens, size_t n) {
  if (n == 0) throw DomainError("n-gram order must be >= 1");
  std::vector<NGram> out;
  size_t run = 0;  // marker-free tokens ending at i
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (is_marker(tokens[i])) {
      run = 0;
      continue;
    }
    ++run;
    if (run >= n) {
      NGram g;
      g.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i + 1 - n),
                      tokens.begin() + static_cast<std::ptrdiff_t>(i + 1));
      out.push_back(std::move(g));
    }
  }
  return out;
}

void NGramProfile::merge(const NGramProfile& other) {
  for (const auto& [g, c] : other.counts) counts[g] += c;
  for (const auto& [g, labels] : other.joint_counts) {
    auto& dst = joint_counts[g];
    for (const auto& [label, c] : labels) dst[label] += c;
  }
  for (const auto& [label, c] : other.entity_counts) entity_counts[label] += c;
  total_instances += other.total_instances;
  total_occurrences += other.total_occurrences;
}

int64_t NGramProfile::joint(const NGram& g, const std::string& label) const {
  auto it = joint_counts.find(g);
  if (it == joint_counts.end()) return 0;
  auto jt = it->second.find(label);
  return jt == it->second.end() ? 0 : jt->second;
}

NGramProfile build_profile(const std::vector<TimestepInstance>& instances, size_t n) {
  NGramProfile result;
  result.n = n;
  const auto count = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel
  {
    NGramProfile local;
    local.n = n;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      const TimestepInstance& inst = instances[static_cast<size_t>(i)];
      const std::string label = inst.label.key();
      for (NGram& g : extract_ngrams(inst.context, n)) {
        ++local.joint_counts[g][label];
        ++local.counts[std::move(g)];
        ++local.total_occurrences;
      }
      ++local.entity_counts[label];
      ++local.total_instances;
    }
#pragma omp critical(debias_profile_merge)
    result.merge(local);
  }
  return result;
}

std::string criterion_name(Criterion c) {
  switch (c) {
    case Criterion::kFrequency: return "freq";
    case Criterion::kMutualInformation: return "mi";
    case Criterion::kJsd: return "jsd";
  }
  return "freq";
}

Criterion parse_criterion(const std::string& name) {
  if (name == "freq" || name == "frequency") return Criterion::kFrequency;
  if (name == "mi" || name == "mutual_information") return Criterion::kMutualInformation;
  if (name == "jsd") return Criterion::kJsd;
  throw ConfigError("unknown criterion '" + name + "' (expected freq, mi or jsd)");
}

size_t cutoff_count(double cutoff, size_t count) {
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw ConfigError("cutoff must lie in (0, 1]");
  const double raw = cutoff * static_cast<double>(count);
  const auto k = static_cast<size_t>(std::ceil(raw - 1e-9));
  return std::min(k, count);
}

namespace {

template <typename T>
void sort_by_score(std::vector<T>& v) {
  std::sort(v.begin(), v.end(), [](const T& a, const T& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ngram < b.ngram;
  });
}

}  // namespace

BiasedTokenSet rank_frequency(const NGramProfile& profile, double cutoff) {
  BiasedTokenSet out{Criterion::kFrequency, profile.n, cutoff, {}};
  std::vector<NGramScore> all;
  all.reserve(profile.counts.size());
  for (const auto& [g, c] : profile.counts) all.push_back({g, static_cast<double>(c)});
  sort_by_score(all);
  const size_t k = cutoff_count(cutoff, all.size());
  for (size_t i = 0; i < k; ++i) out.entries.push_back({all[i].ngram, all[i].score});
  return out;
}

double mi_score(const NGramProfile& profile, const NGram& a, const std::string& label) {
  const int64_t joint = profile.joint(a, label);
  if (joint <= 0) throw DomainError("mi_score requires a positive joint count for '" + a.str() + "'");
  auto ca = profile.counts.find(a);
  auto cb = profile.entity_counts.find(label);
  if (ca == profile.counts.end() || ca->second == 0 || cb == profile.entity_counts.end() ||
      cb->second == 0) {
    throw DomainError("mi_score: zero marginal");
  }
  const double occ = static_cast<double>(profile.total_occurrences);
  const double p_ab = static_cast<double>(joint) / occ;
  const double p_a = static_cast<double>(ca->second) / occ;
  const double p_b = static_cast<double>(cb->second) / static_cast<double>(profile.total_instances);
  return p_ab * std::log2(p_ab / (p_a * p_b));
}

std::vector<PairScore> mi_pair_scores(const NGramProfile& profile) {
  std::vector<PairScore> pairs;
  for (const auto& [g, labels] : profile.joint_counts) {
    for (const auto& [label, c] : labels) {
      if (c > 0) pairs.push_back({g, label, 0.0});
    }
  }
  const auto count = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    PairScore& p = pairs[static_cast<size_t>(i)];
    p.score = mi_score(profile, p.ngram, p.label);
  }
  std::sort(pairs.begin(), pairs.end(), [](const PairScore& a, const PairScore& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.ngram != b.ngram) return a.ngram < b.ngram;
    return a.label < b.label;
  });
  return pairs;
}

BiasedTokenSet rank_mi(const NGramProfile& profile, double cutoff) {
  BiasedTokenSet out{Criterion::kMutualInformation, profile.n, cutoff, {}};
  const std::vector<PairScore> pairs = mi_pair_scores(profile);
  const size_t k = cutoff_count(cutoff, pairs.size());
  std::unordered_set<NGram, NGramHash> seen;
  for (size_t i = 0; i < k; ++i) {
    if (seen.insert(pairs[i].ngram).second) out.entries.push_back({pairs[i].ngram, pairs[i].score});
  }
  return out;
}

EntityDistribution EntityDistribution::from_counts(const std::map<std::string, int64_t>& counts,
                                                   const std::vector<std::string>& support) {
  EntityDistribution d;
  int64_t total = 0;
  for (const std::string& s : support) d.probs[s] = 0.0;
  for (const auto& [label, c] : counts) {
    if (c == 0) continue;
    if (!d.probs.contains(label)) throw DomainError("label '" + label + "' outside support");
    total += c;
  }
  if (total <= 0) throw DomainError("cannot normalize an empty distribution");
  for (const auto& [label, c] : counts) {
    if (c > 0) d.probs[label] = static_cast<double>(c) / static_cast<double>(total);
  }
  return d;
}

double EntityDistribution::total() const {
  double s = 0.0;
  for (const auto& [label, p] : probs) s += p;
  return s;
}

double jsd(const EntityDistribution& p, const EntityDistribution& q) {
  if (p.probs.size() != q.probs.size()) throw DomainError("jsd: mismatched support");
  double acc = 0.0;
  auto qi = q.probs.begin();
  for (auto pi = p.probs.begin(); pi != p.probs.end(); ++pi, ++qi) {
    if (pi->first != qi->first) throw DomainError("jsd: mismatched support");
    const double a = pi->second;
    const double b = qi->second;
    const double m = 0.5 * (a + b);
    if (a > 0.0) acc += 0.5 * a * std::log2(a / m);
    if (b > 0.0) acc += 0.5 * b * std::log2(b / m);
  }
  return std::clamp(acc, 0.0, 1.0);
}

std::vector<NGramScore> jsd_scores(const std::vector<TimestepInstance>& instances, size_t n) {
  using LabelCounts = std::map<std::string, int64_t>;
  std::unordered_map<NGram, LabelCounts, NGramHash> present;
  LabelCounts totals;
  const auto count = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel
  {
    std::unordered_map<NGram, LabelCounts, NGramHash> local;
    LabelCounts local_totals;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      const TimestepInstance& inst = instances[static_cast<size_t>(i)];
      const std::string label = inst.label.key();
      std::vector<NGram> grams = extract_ngrams(inst.context, n);
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
      for (NGram& g : grams) ++local[std::move(g)][label];
      ++local_totals[label];
    }
#pragma omp critical(debias_jsd_merge)
    {
      for (auto& [g, labels] : local) {
        auto& dst = present[g];
        for (const auto& [label, c] : labels) dst[label] += c;
      }
      for (const auto& [label, c] : local_totals) totals[label] += c;
    }
  }

  std::vector<std::string> support;
  for (const auto& [label, c] : totals) support.push_back(label);
  const auto total_instances = static_cast<int64_t>(instances.size());

  std::vector<const std::pair<const NGram, LabelCounts>*> items;
  items.reserve(present.size());
  for (const auto& kv : present) items.push_back(&kv);
  std::vector<NGramScore> scored(items.size());
  std::vector<char> keep(items.size(), 0);
  const auto m = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const auto& [g, with] = *items[static_cast<size_t>(i)];
    int64_t with_total = 0;
    for (const auto& [label, c] : with) with_total += c;
    if (with_total >= total_instances) continue;  // absent nowhere: Q undefined
    LabelCounts without = totals;
    for (const auto& [label, c] : with) without[label] -= c;
    const EntityDistribution p = EntityDistribution::from_counts(with, support);
    const EntityDistribution q = EntityDistribution::from_counts(without, support);
    scored[static_cast<size_t>(i)] = {g, jsd(p, q)};
    keep[static_cast<size_t>(i)] = 1;
  }
  std::vector<NGramScore> out;
  out.reserve(scored.size());
  for (size_t i = 0; i < scored.size(); ++i) {
    if (keep[i]) out.push_back(std::move(scored[i]));
  }
  sort_by_score(out);
  return out;
}

BiasedTokenSet rank_jsd(const std::vector<TimestepInstance>& instances, size_t n, double cutoff) {
  BiasedTokenSet out{Criterion::kJsd, n, cutoff, {}};
  const std::vector<NGramScore> scores = jsd_scores(instances, n);
  const size_t k = cutoff_count(cutoff, scores.size());
  for (size_t i = 0; i < k; ++i) out.entries.push_back({scores[i].ngram, scores[i].score});
  return out;
}

BiasedMatcher::BiasedMatcher(const BiasedTokenSet& biased) : n_(biased.n) {
  for (const BiasedEntry& e : biased.entries) {
    if (e.ngram.tokens.size() != n_) {
      throw DomainError("biased n-gram '" + e.ngram.str() + "' does not have order " +
                        std::to_string(n_));
    }
    set_.insert(e.ngram);
  }
}

std::vector<bool> BiasedMatcher::removal_mask(const TokenSeq& tokens) const {
  std::vector<bool> removed(tokens.size(), false);
  if (set_.empty() || n_ == 0) return removed;
  std::vector<size_t> alive(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) alive[i] = i;

  NGram window;
  window.tokens.resize(n_);
  bool changed = true;
  while (changed) {
    changed = false;
    size_t i = 0;
    while (i + n_ <= alive.size()) {
      bool has_marker = false;
      for (size_t k = 0; k < n_; ++k) {
        const Token& t = tokens[alive[i + k]];
        if (is_marker(t)) {
          has_marker = true;
          break;
        }
        window.tokens[k] = t;
      }
      if (!has_marker && set_.contains(window)) {
        for (size_t k = 0; k < n_; ++k) removed[alive[i + k]] = true;
        i += n_;
        changed = true;
      } else {
        ++i;
      }
    }
    if (changed) {
      std::erase_if(alive, [&](size_t idx) { return removed[idx]; });
    }
  }
  return removed;
}

TokenSeq debias_input(const TokenSeq& tokens, const BiasedMatcher& matcher) {
  const std::vector<bool> removed = matcher.removal_mask(tokens);
  TokenSeq out;
  out.reserve(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!removed[i]) out.push_back(tokens[i]);
  }
  return out;
}

TokenSeq debias_input(const TokenSeq& tokens, const BiasedTokenSet& biased) {
  return debias_input(tokens, BiasedMatcher(biased));
}

TokenSeq frequent_phrases_only(const TokenSeq& tokens, const BiasedMatcher& matcher) {
  const std::vector<bool> removed = matcher.removal_mask(tokens);
  TokenSeq out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (removed[i] || is_marker(tokens[i])) out.push_back(tokens[i]);
  }
  return out;
}

std::vector<PositivePair> build_positive_pairs(const std::vector<TimestepInstance>& instances,
                                               const BiasedTokenSet& biased) {
  const BiasedMatcher matcher(biased);
  std::vector<PositivePair> out(instances.size());
  const auto count = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const TimestepInstance& inst = instances[static_cast<size_t>(i)];
    PositivePair& p = out[static_cast<size_t>(i)];
    p.original = inst.context;
    p.debiased = debias_input(inst.context, matcher);
    p.dialogue_id = inst.dialogue_id;
    p.timestep = inst.timestep;
    p.turn = inst.turn;
  }
  return out;
}

BiasedTokenSet identify_biased(const std::vector<TimestepInstance>& instances, Criterion criterion,
                               size_t n, double cutoff) {
  if (instances.empty()) throw DomainError("bias identification needs at least one instance");
  switch (criterion) {
    case Criterion::kFrequency: return rank_frequency(build_profile(instances, n), cutoff);
    case Criterion::kMutualInformation: return rank_mi(build_profile(instances, n), cutoff);
    case Criterion::kJsd: return rank_jsd(instances, n, cutoff);
  }
  throw ConfigError("unknown criterion");
}

}  // namespace debias
