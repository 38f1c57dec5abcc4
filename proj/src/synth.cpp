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

#include "debias/synth.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "debias/rng.hpp"

namespace debias {

namespace {

constexpr const char* kSyllables[] = {"ba", "ko", "mi", "tu", "re", "sa", "lo", "ne",
                                      "di", "fu", "ga", "pe", "zo", "vi", "ha", "ru"};
constexpr size_t kSyllableCount = 16;

// Distinct pseudo-word per (pool, index); pools never collide.
std::string pseudo_word(size_t pool, size_t index) {
  std::string w = kSyllables[pool % kSyllableCount];
  size_t v = index;
  do {
    w += kSyllables[v % kSyllableCount];
    v /= kSyllableCount;
  } while (v > 0);
  return w + kSyllables[(pool / kSyllableCount) % kSyllableCount];
}

enum Pool : size_t {
  kCuePool = 1,
  kContentPool = 2,
  kOpenerPool = 3,
  kClosingPool = 4,
  kAdjectivePool = 5,
  kNounPool = 6,
  kNeutralPool = 7,
  kSynonymPool = 8,
  kDistractorPool = 9,
  kNicheOpenerPool = 10,
  kNicheClosingPool = 11,
};

TokenSeq phrase(Pool pool, size_t index, size_t length) {
  TokenSeq out;
  for (size_t k = 0; k < length; ++k) out.push_back(pseudo_word(pool, index * 16 + k));
  return out;
}

void append(TokenSeq& dst, const TokenSeq& src) { dst.insert(dst.end(), src.begin(), src.end()); }

enum class Split { kTrain, kTest, kDecorrelated };

std::vector<Dialogue> generate_split(const SyntheticBenchSpec& spec, Split split, size_t size,
                                     const std::string& prefix) {
  Rng rng(derive_seed(spec.seed, "synth", static_cast<uint64_t>(split)));
  const std::vector<size_t> quotas = zipf_quotas(spec.num_entities, spec.head_skew, size);
  std::vector<size_t> entities;
  for (size_t e = 0; e < quotas.size(); ++e) entities.insert(entities.end(), quotas[e], e);
  rng.shuffle(entities);
  const std::vector<double> mass = zipf_mass(spec.num_entities, spec.head_skew);
  const std::vector<double> opener_w = zipf_mass(spec.num_openers, 1.0);
  const std::vector<double> closing_w = zipf_mass(spec.num_closings, 1.0);

  std::vector<Dialogue> out;
  out.reserve(size);
  const int width = static_cast<int>(std::to_string(size).size());
  for (size_t i = 0; i < size; ++i) {
    const size_t e = entities[i];
    const bool niche = rng.uniform() < spec.niche_fraction;
    const size_t niche_id = rng.below(spec.num_niches);
    TokenSeq user = niche ? phrase(kNicheOpenerPool, niche_id, spec.opener_length)
                          : phrase(kOpenerPool, rng.categorical(opener_w), spec.opener_length);
    if (split == Split::kDecorrelated && spec.decorrelate_test) {
      append(user, synthetic_cue(rng.categorical(mass)));
    } else if (rng.uniform() < spec.cue_strength) {
      append(user, synthetic_cue(e));
    } else {
      append(user, phrase(kNeutralPool, rng.below(spec.num_neutral_cues), 3));
    }
    append(user, {"find", "me", "a", pseudo_word(kAdjectivePool, rng.below(spec.num_adjectives))});
    user.push_back(rng.uniform() < spec.content_noise ? std::string("somewhere")
                                                      : synthetic_content_word(e));
    user.push_back(pseudo_word(kNounPool, rng.below(spec.num_nouns)));
    const size_t closing = rng.categorical(closing_w);
    append(user, niche ? phrase(kNicheClosingPool, niche_id, spec.closing_length)
                       : phrase(kClosingPool, closing, spec.closing_length));

    const std::string name = synthetic_entity(e);
    TokenSeq system;
    switch (rng.below(3)) {
      case 0: system = {"try", name}; break;
      case 1: system = {"how", "about", name}; break;
      default: system = {"we", "suggest", name}; break;
    }

    Dialogue d;
    std::string num = std::to_string(i);
    d.id = prefix + "-" + std::string(static_cast<size_t>(width) - num.size(), '0') + num;
    d.turns = {{Speaker::kUser, std::move(user)}, {Speaker::kSystem, std::move(system)}};
    std::vector<size_t> kb_entities{e};
    while (kb_entities.size() < std::min(spec.num_entities, spec.kb_distractors + 1)) {
      const size_t other = rng.below(spec.num_entities);
      if (std::find(kb_entities.begin(), kb_entities.end(), other) == kb_entities.end()) {
        kb_entities.push_back(other);
      }
    }
    rng.shuffle(kb_entities);
    for (size_t k : kb_entities) {
      d.kb.push_back({synthetic_entity(k), "restaurant_name",
                      {{"food", synthetic_content_word(k)}}});
    }
    d.gold_entities[1] = {name};
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

void SyntheticBenchSpec::validate() const {
  if (num_entities < 1) throw ConfigError("num_entities must be >= 1");
  if (head_skew < 0.0) throw ConfigError("head_skew must be >= 0");
  if (!(cue_strength >= 0.0 && cue_strength <= 1.0)) throw ConfigError("cue_strength must lie in [0, 1]");
  if (!(content_noise >= 0.0 && content_noise <= 1.0)) {
    throw ConfigError("content_noise must lie in [0, 1]");
  }
  if (train_size < 1 || test_size < 1) throw ConfigError("split sizes must be >= 1");
  if (opener_length < 1 || closing_length < 1 || opener_length > 16 || closing_length > 16) {
    throw ConfigError("template lengths must lie in [1, 16]");
  }
  if (!(niche_fraction >= 0.0 && niche_fraction <= 1.0)) {
    throw ConfigError("niche_fraction must lie in [0, 1]");
  }
  if (num_niches < 1) throw ConfigError("num_niches must be >= 1");
  if (num_openers < 1 || num_closings < 1 || num_adjectives < 1 || num_nouns < 1 ||
      num_neutral_cues < 1) {
    throw ConfigError("template pools must be nonempty");
  }
}

std::string synthetic_entity(size_t rank) {
  std::string num = std::to_string(rank);
  if (num.size() < 2) num = "0" + num;
  return "venue" + num;
}

TokenSeq synthetic_cue(size_t rank) { return phrase(kCuePool, rank, 3); }

std::string synthetic_content_word(size_t rank) { return pseudo_word(kContentPool, rank); }

std::vector<double> zipf_mass(size_t num_entities, double skew) {
  std::vector<double> w(num_entities);
  for (size_t r = 0; r < num_entities; ++r) w[r] = std::pow(static_cast<double>(r + 1), -skew);
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= z;
  return w;
}

std::vector<size_t> zipf_quotas(size_t num_entities, double skew, size_t total) {
  const std::vector<double> mass = zipf_mass(num_entities, skew);
  std::vector<size_t> quota(num_entities);
  std::vector<std::pair<double, size_t>> remainders;
  size_t assigned = 0;
  for (size_t r = 0; r < num_entities; ++r) {
    const double exact = mass[r] * static_cast<double>(total);
    quota[r] = static_cast<size_t>(std::floor(exact));
    assigned += quota[r];
    remainders.emplace_back(exact - std::floor(exact), r);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t k = 0; assigned < total; ++k, ++assigned) ++quota[remainders[k % num_entities].second];
  return quota;
}

SyntheticBench generate_synthetic(const SyntheticBenchSpec& spec) {
  spec.validate();
  SyntheticBench bench;
  bench.train = generate_split(spec, Split::kTrain, spec.train_size, "train");
  bench.test = generate_split(spec, Split::kTest, spec.test_size, "test");
  bench.decorrelated = generate_split(spec, Split::kDecorrelated, spec.test_size, "decor");
  for (size_t a = 0; a < spec.num_adjectives; ++a) {
    bench.lexicon[pseudo_word(kAdjectivePool, a)] = {pseudo_word(kSynonymPool, 2 * a),
                                                     pseudo_word(kSynonymPool, 2 * a + 1)};
  }
  for (size_t k = 0; k < spec.num_openers; ++k) {
    for (Token& t : phrase(kOpenerPool, k, spec.opener_length)) {
      bench.lexicon[t] = {pseudo_word(kSynonymPool, 1000 + k)};
    }
  }
  for (size_t k = 0; k < 5; ++k) {
    TokenSeq s = phrase(kDistractorPool, k, 5);
    bench.distractors.push_back(join(s, " "));
  }
  return bench;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticBench& bench) {
  std::filesystem::create_directories(dir);
  save_corpus(dir / "train.jsonl", bench.train);
  save_corpus(dir / "test.jsonl", bench.test);
  save_corpus(dir / "test_decorrelated.jsonl", bench.decorrelated);
  std::ofstream lex(dir / "lexicon.json", std::ios::binary);
  lex << nlohmann::json(bench.lexicon).dump(2) << "\n";
  std::ofstream dis(dir / "distractors.txt", std::ios::binary);
  for (const std::string& s : bench.distractors) dis << s << "\n";
  if (!lex || !dis) throw Error("failed to write synthetic benchmark to " + dir.string());
}

}  // namespace debias
