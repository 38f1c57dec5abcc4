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

#include "debias/evalkit.hpp"
#include "debias/rng.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace debias {
namespace {

TEST(EntityF1, AllCorrectAndDisjoint) {
  EXPECT_EQ(entity_f1({{{"a"}, {"a"}}, {{"b", "c"}, {"c", "b"}}}).entity_f1, 1.0);
  EXPECT_EQ(entity_f1({{{"a"}, {"b"}}, {{"c"}, {"d"}}}).entity_f1, 0.0);
  EXPECT_EQ(entity_f1({{{}, {}}}).entity_f1, 0.0);
}

TEST(EntityF1, HalfOverlap) {
  const EvalReport r = entity_f1({{{"a", "b"}, {"a", "c"}}});
  EXPECT_EQ(r.precision, 0.5);
  EXPECT_EQ(r.recall, 0.5);
  EXPECT_EQ(r.entity_f1, 0.5);
  EXPECT_EQ(r.tp, 1);
}

TEST(EntityF1, MultisetClipping) {
  const EvalReport r = entity_f1({{{"a", "a", "a"}, {"a"}}});
  EXPECT_EQ(r.tp, 1);
  EXPECT_DOUBLE_EQ(r.precision, 1.0 / 3.0);
  EXPECT_EQ(r.recall, 1.0);
}

TEST(EntityF1, SymmetricAndMatchesOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EntityPrediction> preds, swapped;
    std::vector<std::pair<oracle::Tokens, oracle::Tokens>> raw;
    for (size_t k = 0, n = 1 + rng.below(6); k < n; ++k) {
      EntityPrediction p;
      for (size_t i = 0, m = rng.below(4); i < m; ++i) p.predicted.push_back("e" + std::to_string(rng.below(4)));
      for (size_t i = 0, m = rng.below(4); i < m; ++i) p.gold.push_back("e" + std::to_string(rng.below(4)));
      preds.push_back(p);
      swapped.push_back({p.gold, p.predicted});
      raw.push_back({p.predicted, p.gold});
    }
    const EvalReport a = entity_f1(preds), b = entity_f1(swapped);
    EXPECT_NEAR(a.entity_f1, b.entity_f1, 1e-15);
    EXPECT_EQ(a.precision, b.recall);
    EXPECT_NEAR(a.entity_f1, oracle::f1_multiset(raw), 1e-12);
    EXPECT_GE(a.entity_f1, 0.0);
    EXPECT_LE(a.entity_f1, 1.0);
  }
}

TEST(Bleu, IdenticalIsOne) {
  EXPECT_EQ(bleu({tokenize("a b c d e")}, {tokenize("a b c d e")}), 1.0);
  EXPECT_EQ(bleu({tokenize("a")}, {tokenize("a")}), 1.0);
}

TEST(Bleu, NoSharedUnigramIsSmoothedFloor) {
  const double b = bleu({tokenize("w x y z")}, {tokenize("a b c d")});
  EXPECT_GT(b, 0.0);
  EXPECT_LT(b, 1e-6);
}

TEST(Bleu, ShortCandidateMatchesLiteralFormula) {
  const std::vector<TokenSeq> c = {tokenize("the cat sat")}, r = {tokenize("the cat sat down")};
  // Orders 1..3 match fully, order 4 has no candidate n-gram, so only the
  // brevity penalty exp(1 - 4/3) remains.
  EXPECT_NEAR(bleu(c, r), oracle::bleu_literal(c, r), 1e-12);
  EXPECT_NEAR(bleu(c, r), std::exp(-1.0 / 3.0), 1e-12);
}

TEST(Bleu, EmptyCorpusAndLengthMismatch) {
  EXPECT_THROW(bleu({}, {}), DomainError);
  EXPECT_THROW(bleu({tokenize("a")}, {}), DomainError);
}

std::vector<TokenSeq> random_corpus(Rng& rng, size_t docs, size_t vocab) {
  std::vector<TokenSeq> out;
  for (size_t d = 0; d < docs; ++d) {
    TokenSeq t;
    for (size_t i = 0, len = 1 + rng.below(12); i < len; ++i) t.push_back("w" + std::to_string(rng.below(vocab)));
    out.push_back(t);
  }
  return out;
}

TEST(Bleu, SelfBleuIsExactlyOneOnRandomCorpora) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_corpus(rng, 1 + rng.below(8), 6);
    EXPECT_EQ(bleu(c, c), 1.0);
  }
}

TEST(Bleu, RandomCorporaMatchOracleAndStayInRange) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t docs = 1 + rng.below(6);
    const auto c = random_corpus(rng, docs, 4);
    const auto r = random_corpus(rng, docs, 4);
    const double b = bleu(c, r);
    EXPECT_NEAR(b, oracle::bleu_literal(c, r), 1e-12);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
  }
}

Dialogue with_gold(const std::string& id, std::vector<std::string> entities) {
  Dialogue d = fixture::dialogue(id, {"q", "a"});
  d.gold_entities[1] = std::move(entities);
  return d;
}

TEST(EntityHistogram, HeadShares) {
  const auto one = entity_histogram({with_gold("a", {"x", "x"}), with_gold("b", {"x"})});
  EXPECT_EQ(one.head_share(1), 1.0);
  EXPECT_EQ(one.total, 3);
  std::vector<Dialogue> uniform;
  for (int i = 0; i < 10; ++i) uniform.push_back(with_gold("d" + std::to_string(i), {"e" + std::to_string(i)}));
  const auto h = entity_histogram(uniform);
  EXPECT_EQ(h.head_share(10), 1.0);
  EXPECT_EQ(h.head_share(5), 0.5);
  int64_t sum = 0;
  for (const auto& [e, c] : h.ranked) sum += c;
  EXPECT_EQ(sum, h.total);
}

PerturbConfig config(PerturbKind kind, double rate, uint64_t seed = 1) {
  PerturbConfig c;
  c.kind = kind;
  c.rate = rate;
  c.seed = seed;
  c.lexicon = {{"cheap", {"inexpensive"}}, {"hotel", {"inn"}}};
  c.distractors = {"by the way it is raining"};
  return c;
}

TEST(Perturb, ZeroBudgetIsIdentity) {
  const TokenSeq u = tokenize("i want a cheap hotel");
  for (PerturbKind k : {PerturbKind::kWordDelete, PerturbKind::kWordParaphrase,
                        PerturbKind::kSentenceParaphrase, PerturbKind::kSentenceInsert}) {
    EXPECT_EQ(perturb(u, config(k, 0.0)), u);
  }
}

TEST(Perturb, FullDeletionEmptiesEntityFreeUtterance) {
  EXPECT_TRUE(perturb(tokenize("i want a cheap hotel"), config(PerturbKind::kWordDelete, 1.0)).empty());
}

TEST(Perturb, DeletionSparesMarkersAndEntities) {
  const TokenSeq out = perturb(tokenize("<|user|> book the red lion <|user|>"),
                               config(PerturbKind::kWordDelete, 1.0), {"red", "lion"});
  EXPECT_EQ(out, tokenize("<|user|> red lion <|user|>"));
}

TEST(Perturb, WordParaphraseSeededChoice) {
  // Budget ceil(0.2 * 3) = 1 of the two covered tokens; the pick is the
  // first draw of the utterance seed.
  const TokenSeq u = tokenize("cheap red hotel");
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(seed);
    const size_t pick = rng.sample_without_replacement(2, 1)[0];
    const TokenSeq expected = pick == 0 ? tokenize("inexpensive red hotel") : tokenize("cheap red inn");
    EXPECT_EQ(perturb(u, config(PerturbKind::kWordParaphrase, 0.2, seed)), expected);
    EXPECT_EQ(perturb(u, config(PerturbKind::kWordParaphrase, 0.2, seed)), expected);
  }
}

TEST(Perturb, SentenceParaphraseCoversEveryToken) {
  EXPECT_EQ(perturb(tokenize("cheap cheap hotel now"), config(PerturbKind::kSentenceParaphrase, 0.3)),
            tokenize("inexpensive inexpensive inn now"));
}

TEST(Perturb, SentenceInsertAddsOneDistractor) {
  const TokenSeq u = tokenize("find me a hotel");
  const TokenSeq out = perturb(u, config(PerturbKind::kSentenceInsert, 0.3));
  EXPECT_EQ(out.size(), u.size() + 6);
}

TEST(Perturb, MissingResourcesAreConfigErrors) {
  PerturbConfig c = config(PerturbKind::kWordParaphrase, 0.3);
  c.lexicon.clear();
  EXPECT_THROW(perturb({"a"}, c), ConfigError);
  c = config(PerturbKind::kSentenceInsert, 0.3);
  c.distractors.clear();
  EXPECT_THROW(perturb({"a"}, c), ConfigError);
  EXPECT_THROW(parse_perturb_kind("xx"), ConfigError);
}

std::vector<Dialogue> hotel_corpus() {
  std::vector<Dialogue> ds;
  for (int i = 0; i < 20; ++i) {
    Dialogue d = fixture::dialogue("d" + std::to_string(i),
                                   {"a cheap hotel please", "the grand is cheap", "cheap hotel again", "ok"},
                                   {{"the grand", "hotel_name", {}}});
    d.gold_entities[1] = {"the grand"};
    ds.push_back(d);
  }
  return ds;
}

TEST(AdversarialTestset, IdentityAtRateZero) {
  const auto ds = hotel_corpus();
  EXPECT_EQ(make_adversarial_testset(ds, config(PerturbKind::kWordDelete, 0.0)), ds);
}

TEST(AdversarialTestset, UserTurnsOnlyAndStructurePreserved) {
  const auto ds = hotel_corpus();
  const auto out = make_adversarial_testset(ds, config(PerturbKind::kWordParaphrase, 1.0));
  ASSERT_EQ(out.size(), ds.size());
  size_t changed = 0;
  for (size_t d = 0; d < ds.size(); ++d) {
    ASSERT_EQ(out[d].turns.size(), ds[d].turns.size());
    EXPECT_EQ(out[d].kb, ds[d].kb);
    EXPECT_EQ(out[d].gold_entities, ds[d].gold_entities);
    for (size_t t = 0; t < ds[d].turns.size(); ++t) {
      if (ds[d].turns[t].speaker == Speaker::kSystem) {
        EXPECT_EQ(out[d].turns[t], ds[d].turns[t]);
      } else {
        changed += out[d].turns[t] != ds[d].turns[t] ? 1 : 0;
      }
    }
  }
  // Every user turn contains a covered token, so every user turn changes.
  EXPECT_EQ(changed, 2 * ds.size());
}

TEST(AdversarialTestset, DeterministicPerSeed) {
  const auto ds = hotel_corpus();
  const auto a = make_adversarial_testset(ds, config(PerturbKind::kWordDelete, 0.3, 9));
  const auto b = make_adversarial_testset(ds, config(PerturbKind::kWordDelete, 0.3, 9));
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace debias
