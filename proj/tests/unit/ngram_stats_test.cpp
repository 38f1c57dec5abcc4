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

#include <cmath>

#include <gtest/gtest.h>

#include "debias/ngram_stats.hpp"
#include "debias/reference.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace debias {
namespace {

using fixture::instance;

NGram ng(const std::string& s) { return NGram{tokenize(s)}; }

using fixture::as_labeled;

TEST(ExtractNgrams, Windows) {
  EXPECT_EQ(extract_ngrams(tokenize("i need to find"), 3),
            (std::vector<NGram>{ng("i need to"), ng("need to find")}));
  EXPECT_TRUE(extract_ngrams(tokenize("a b"), 3).empty());
  EXPECT_EQ(extract_ngrams(tokenize("a b c d e"), 1).size(), 5u);
}

TEST(ExtractNgrams, NeverSpansMarkers) {
  const auto grams = extract_ngrams(tokenize("<|user|> a b <|user|> <|response|> c"), 2);
  EXPECT_EQ(grams, (std::vector<NGram>{ng("a b")}));
}

TEST(BuildProfile, SingleInstance) {
  const NGramProfile p = build_profile({instance("a b c d", "e")}, 3);
  EXPECT_EQ(p.counts.size(), 2u);
  EXPECT_EQ(p.joint(ng("a b c"), "e") + p.joint(ng("b c d"), "e"), 2);
  EXPECT_EQ(p.entity_counts.at("e"), 1);
  EXPECT_EQ(p.total_instances, 1);
}

TEST(BuildProfile, DuplicatesDoubleEveryCount) {
  const auto one = build_profile({instance("a b a b", "e")}, 2);
  const auto two = build_profile({instance("a b a b", "e"), instance("a b a b", "e")}, 2);
  for (const auto& [g, c] : one.counts) EXPECT_EQ(two.counts.at(g), 2 * c);
  EXPECT_EQ(two.entity_counts.at("e"), 2);
  EXPECT_EQ(two.total_occurrences, 2 * one.total_occurrences);
}

TEST(BuildProfile, ToySetMatchesHandTally) {
  const std::vector<TimestepInstance> insts = {
      instance("x y x y", "a"), instance("x y", "b"), instance("y x", "[NULL]"),
      instance("z", "a"), instance("x y z", "a")};
  const NGramProfile p = build_profile(insts, 2);
  EXPECT_EQ(p.counts.at(ng("x y")), 4);
  EXPECT_EQ(p.counts.at(ng("y x")), 2);
  EXPECT_EQ(p.counts.at(ng("y z")), 1);
  EXPECT_EQ(p.joint(ng("x y"), "a"), 3);
  EXPECT_EQ(p.joint(ng("x y"), "b"), 1);
  EXPECT_EQ(p.joint(ng("y x"), "[NULL]"), 1);
  EXPECT_EQ(p.entity_counts.at("a"), 3);
  EXPECT_EQ(p.total_occurrences, 7);
}

TEST(BuildProfile, ParallelMatchesSerialReference) {
  const auto insts = fixture::random_instances(7, 300, 9, 4, 12);
  for (size_t n : {1u, 2u, 3u}) {
    const NGramProfile a = build_profile(insts, n);
    const NGramProfile b = reference::build_profile(insts, n);
    EXPECT_EQ(a.counts, b.counts);
    EXPECT_EQ(a.joint_counts, b.joint_counts);
    EXPECT_EQ(a.entity_counts, b.entity_counts);
    EXPECT_EQ(a.total_occurrences, b.total_occurrences);
  }
}

TEST(RankFrequency, TopTenPercentOfTen) {
  std::vector<TimestepInstance> insts;
  for (int i = 0; i < 10; ++i) {
    for (int k = 0; k <= i; ++k) insts.push_back(instance("t" + std::to_string(i), "e"));
  }
  const auto set = rank_frequency(build_profile(insts, 1), 0.10);
  ASSERT_EQ(set.entries.size(), 1u);
  EXPECT_EQ(set.entries[0].ngram, ng("t9"));
  EXPECT_DOUBLE_EQ(set.entries[0].score, 10.0);
}

TEST(RankFrequency, TiesGoLexicographic) {
  const auto set = rank_frequency(build_profile({instance("q c b a", "e")}, 1), 0.25);
  ASSERT_EQ(set.entries.size(), 1u);
  EXPECT_EQ(set.entries[0].ngram, ng("a"));
}

TEST(RankFrequency, MatchesSortOracle) {
  const auto insts = fixture::random_instances(3, 80, 12, 3, 10);
  const NGramProfile p = build_profile(insts, 1);
  std::vector<std::pair<int64_t, NGram>> all;
  for (const auto& [g, c] : p.counts) all.push_back({-c, g});
  std::sort(all.begin(), all.end());
  const auto set = rank_frequency(p, 0.5);
  ASSERT_EQ(set.entries.size(), (all.size() + 1) / 2);
  for (size_t i = 0; i < set.entries.size(); ++i) EXPECT_EQ(set.entries[i].ngram, all[i].second);
}

TEST(RankFrequency, EmptyProfileGivesEmptySet) {
  EXPECT_TRUE(rank_frequency(build_profile({instance("a", "e")}, 3), 0.1).empty());
}

TEST(CutoffCount, CeilingWithoutFloatDrift) {
  EXPECT_EQ(cutoff_count(0.1, 10), 1u);
  EXPECT_EQ(cutoff_count(0.1, 11), 2u);
  EXPECT_EQ(cutoff_count(0.7, 10), 7u);
  EXPECT_EQ(cutoff_count(1.0, 3), 3u);
  EXPECT_EQ(cutoff_count(0.1, 0), 0u);
}

TEST(MiScore, IndependenceIsZero) {
  // Every n-gram occurs once with each label, so p(a,b) = p(a) p(b).
  const auto p = build_profile({instance("a b", "x"), instance("a b", "y")}, 1);
  EXPECT_NEAR(mi_score(p, ng("a"), "x"), 0.0, 1e-15);
}

TEST(MiScore, BinaryWorldIsHalf) {
  const auto p = build_profile({instance("a", "x"), instance("c", "y")}, 1);
  EXPECT_DOUBLE_EQ(mi_score(p, ng("a"), "x"), 0.5);
}

TEST(MiScore, ToyCountsMatchFormula) {
  // counts a:3, joint(a,b):2, label b on 2 of 6 instances, 6 occurrences.
  const std::vector<TimestepInstance> insts = {instance("a", "b"), instance("a", "b"),
                                               instance("a", "x"), instance("c", "x"),
                                               instance("c", "x"), instance("c", "x")};
  const double expected = (2.0 / 6.0) * std::log2((2.0 / 6.0) / ((3.0 / 6.0) * (2.0 / 6.0)));
  EXPECT_NEAR(mi_score(build_profile(insts, 1), ng("a"), "b"), expected, 1e-15);
  EXPECT_NEAR(expected, 1.0 / 3.0, 1e-15);
}

TEST(MiScore, ZeroJointIsDomainError) {
  const auto p = build_profile({instance("a", "x"), instance("c", "y")}, 1);
  EXPECT_THROW(mi_score(p, ng("a"), "y"), DomainError);
}

TEST(MiScore, RandomProfilesMatchDirectFormula) {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const auto insts = fixture::random_instances(seed, 12, 10, 5, 6);
    const NGramProfile p = build_profile(insts, 1);
    const auto data = as_labeled(insts);
    for (const auto& [g, per_label] : p.joint_counts) {
      for (const auto& [label, c] : per_label) {
        EXPECT_NEAR(mi_score(p, g, label), oracle::mi_direct(data, 1, g.tokens, label), 1e-12);
      }
    }
  }
}

TEST(RankMi, SinglePairAlwaysSelected) {
  const auto p = build_profile({instance("a b c", "e")}, 3);
  for (double cutoff : {0.01, 0.5, 1.0}) {
    const auto set = rank_mi(p, cutoff);
    ASSERT_EQ(set.entries.size(), 1u);
    EXPECT_EQ(set.entries[0].ngram, ng("a b c"));
  }
}

TEST(RankMi, PredictiveNgramOutranksNullOnlyNgram) {
  // "a" and "b" each occur twice; "a" only with the frequent [NULL] label,
  // "b" only with the rare entity e. Equal joint mass, larger PMI for b.
  std::vector<TimestepInstance> insts = {instance("a", "[NULL]"), instance("a", "[NULL]"),
                                         instance("b", "e"), instance("b", "e")};
  for (int i = 0; i < 6; ++i) insts.push_back(instance("c", "[NULL]"));
  const auto p = build_profile(insts, 1);
  EXPECT_GE(mi_score(p, ng("b"), "e"), mi_score(p, ng("a"), "[NULL]"));
  const auto scores = mi_pair_scores(p);
  EXPECT_EQ(scores.front().ngram, ng("b"));
}

TEST(RankMi, TopPairsByEnumeration) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto insts = fixture::random_instances(100 + seed, 15, 8, 4, 6);
    const auto p = build_profile(insts, 1);
    const auto data = as_labeled(insts);
    // Oracle: enumerate every (n-gram, label) pair, score, sort.
    std::vector<std::tuple<double, NGram, std::string>> pairs;
    for (const auto& [g, per_label] : p.joint_counts) {
      for (const auto& [label, c] : per_label) {
        pairs.emplace_back(-oracle::mi_direct(data, 1, g.tokens, label), g, label);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    const size_t k = static_cast<size_t>(std::ceil(0.10 * static_cast<double>(pairs.size()) - 1e-9));
    std::vector<NGram> expected;
    for (size_t i = 0; i < k; ++i) {
      const NGram& g = std::get<1>(pairs[i]);
      if (std::find(expected.begin(), expected.end(), g) == expected.end()) expected.push_back(g);
    }
    const auto set = rank_mi(p, 0.10);
    std::vector<NGram> got;
    for (const auto& e : set.entries) got.push_back(e.ngram);
    EXPECT_EQ(got, expected) << "seed " << seed;
  }
}

EntityDistribution dist(std::vector<double> v) {
  EntityDistribution d;
  for (size_t i = 0; i < v.size(); ++i) d.probs["l" + std::to_string(i)] = v[i];
  return d;
}

TEST(Jsd, Examples) {
  EXPECT_EQ(jsd(dist({0.3, 0.7}), dist({0.3, 0.7})), 0.0);
  EXPECT_EQ(jsd(dist({1, 0}), dist({0, 1})), 1.0);
  const double expected = oracle::jsd_vectors({0.5, 0.5}, {1, 0});
  EXPECT_NEAR(jsd(dist({0.5, 0.5}), dist({1, 0})), expected, 1e-15);
  EXPECT_NEAR(expected, 0.3113, 5e-5);
}

TEST(Jsd, MismatchedSupportIsDomainError) {
  EXPECT_THROW(jsd(dist({1, 0}), dist({0.2, 0.3, 0.5})), DomainError);
}

TEST(Jsd, SymmetricAndBounded) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t k = 2 + rng.below(5);
    std::vector<double> p(k), q(k);
    double sp = 0, sq = 0;
    for (size_t i = 0; i < k; ++i) {
      p[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
      q[i] = rng.uniform();
      sp += p[i];
      sq += q[i];
    }
    if (sp == 0) p[0] = sp = 1;
    for (size_t i = 0; i < k; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    const double a = jsd(dist(p), dist(q));
    EXPECT_NEAR(a, jsd(dist(q), dist(p)), 1e-12);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_NEAR(a, oracle::jsd_vectors(p, q), 1e-12);
  }
}

TEST(EntityDistribution, SumsToOne) {
  const auto d = EntityDistribution::from_counts({{"a", 3}, {"b", 1}}, {"a", "b", "c"});
  EXPECT_NEAR(d.total(), 1.0, 1e-12);
  EXPECT_EQ(d.probs.at("c"), 0.0);
}

TEST(RankJsd, UninformativeScoresZeroAndRanksLast) {
  // "u" appears once with each label; "d" appears exactly with label a.
  const std::vector<TimestepInstance> insts = {instance("u d", "a"), instance("u", "b"),
                                               instance("d", "a"), instance("v", "b")};
  const auto scores = jsd_scores(insts, 1);
  ASSERT_FALSE(scores.empty());
  EXPECT_EQ(scores.front().ngram, ng("d"));
  EXPECT_EQ(scores.front().score, 1.0);
  for (const auto& s : scores) {
    if (s.ngram == ng("u")) EXPECT_NEAR(s.score, 0.0, 1e-15);
  }
  EXPECT_EQ(rank_jsd(insts, 1, 0.34).entries.front().ngram, ng("d"));
}

TEST(RankJsd, UbiquitousNgramSkipped) {
  const auto scores = jsd_scores({instance("k a", "a"), instance("k b", "b")}, 1);
  for (const auto& s : scores) EXPECT_NE(s.ngram, ng("k"));
}

TEST(RankJsd, EightInstanceCorporaMatchBruteForce) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto insts = fixture::random_instances(500 + seed, 8, 6, 3, 6);
    const auto oracle_scores = oracle::jsd_brute_force(as_labeled(insts), 2);
    const auto scores = jsd_scores(insts, 2);
    ASSERT_EQ(scores.size(), oracle_scores.size());
    for (const auto& s : scores) EXPECT_NEAR(s.score, oracle_scores.at(s.ngram.tokens), 1e-12);
    const auto ref = reference::jsd_scores(insts, 2);
    ASSERT_EQ(ref.size(), scores.size());
    for (size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(ref[i].ngram, scores[i].ngram);
      EXPECT_NEAR(ref[i].score, scores[i].score, 1e-12);
    }
  }
}

BiasedTokenSet biased_of(std::vector<std::string> grams, size_t n) {
  BiasedTokenSet b;
  b.n = n;
  for (const auto& g : grams) b.entries.push_back({ng(g), 1.0});
  return b;
}

TEST(DebiasInput, RemovesLeadingCue) {
  EXPECT_EQ(debias_input(tokenize("i need to find a moderately priced hotel"),
                         biased_of({"i need to"}, 3)),
            tokenize("find a moderately priced hotel"));
}

TEST(DebiasInput, NoCueIsIdentity) {
  const TokenSeq t = tokenize("find a hotel");
  EXPECT_EQ(debias_input(t, biased_of({"i need to"}, 3)), t);
}

TEST(DebiasInput, IteratesToFixpoint) {
  EXPECT_TRUE(debias_input(tokenize("a b c b c d"), biased_of({"a b c", "b c d"}, 3)).empty());
}

TEST(DebiasInput, KeepsMarkers) {
  EXPECT_EQ(debias_input(tokenize("<|user|> i need to go <|user|> <|response|>"),
                         biased_of({"i need to"}, 3)),
            tokenize("<|user|> go <|user|> <|response|>"));
}

TEST(DebiasInput, OutputHasNoBiasedNgram) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq t;
    const size_t len = rng.below(20);
    for (size_t i = 0; i < len; ++i) t.push_back(std::string(1, static_cast<char>('a' + rng.below(3))));
    const auto b = biased_of({"a b", "b b", "c a"}, 2);
    const BiasedMatcher m(b);
    for (const NGram& g : extract_ngrams(debias_input(t, b), 2)) EXPECT_FALSE(m.contains(g));
  }
}

TEST(FrequentPhrasesOnly, ComplementOfDebiasedInput) {
  Rng rng(12);
  const auto b = biased_of({"a b c", "c c a"}, 3);
  const BiasedMatcher m(b);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq t = {"<|user|>"};
    const size_t len = rng.below(25);
    for (size_t i = 0; i < len; ++i) t.push_back(std::string(1, static_cast<char>('a' + rng.below(3))));
    t.push_back("<|user|>");
    const TokenSeq kept = debias_input(t, m);
    const TokenSeq freq = frequent_phrases_only(t, m);
    // Non-marker tokens split exactly between the two views.
    size_t markers = 0;
    for (const auto& tok : t) markers += is_marker(tok) ? 1 : 0;
    EXPECT_EQ(kept.size() + freq.size(), t.size() + markers);
    const auto mask = m.removal_mask(t);
    TokenSeq from_mask;
    for (size_t i = 0; i < t.size(); ++i) {
      if (mask[i] || is_marker(t[i])) from_mask.push_back(t[i]);
    }
    EXPECT_EQ(freq, from_mask);
  }
}

TEST(PositivePairs, OnePerInstanceWithPerInstanceDeltas) {
  const std::vector<TimestepInstance> insts = {
      instance("i need to eat", "a"), instance("eat now", "b"), instance("i need to i need to", "c"),
      instance("need to i", "d"), instance("", "e")};
  const auto b = biased_of({"i need to"}, 3);
  const auto pairs = build_positive_pairs(insts, b);
  ASSERT_EQ(pairs.size(), 5u);
  const std::vector<size_t> removed = {3, 0, 6, 0, 0};
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(pairs[i].original.size() - pairs[i].debiased.size(), removed[i]);
    EXPECT_EQ(pairs[i].dialogue_id, insts[i].dialogue_id);
  }
  const auto identity = build_positive_pairs(insts, BiasedTokenSet{});
  for (const auto& p : identity) EXPECT_EQ(p.original, p.debiased);
}

TEST(IdentifyBiased, DeterministicAcrossCriteria) {
  const auto insts = fixture::random_instances(77, 60, 8, 4, 10);
  for (Criterion c : {Criterion::kFrequency, Criterion::kMutualInformation, Criterion::kJsd}) {
    const auto a = identify_biased(insts, c, 2, 0.1);
    const auto b = identify_biased(insts, c, 2, 0.1);
    ASSERT_EQ(a.entries.size(), b.entries.size());
    for (size_t i = 0; i < a.entries.size(); ++i) {
      EXPECT_EQ(a.entries[i].ngram, b.entries[i].ngram);
      EXPECT_EQ(a.entries[i].score, b.entries[i].score);
    }
    EXPECT_EQ(parse_criterion(criterion_name(c)), c);
  }
}

}  // namespace
}  // namespace debias
