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
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "debias/corpus.hpp"

namespace debias {

struct EntityPrediction {
  std::vector<std::string> predicted;  // multiset
  std::vector<std::string> gold;       // multiset
};

struct EntityScore {
  int64_t tp = 0;
  int64_t predicted = 0;
  int64_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  double entity_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double bleu = 0.0;
  int64_t tp = 0;
  int64_t predicted_total = 0;
  int64_t gold_total = 0;
  size_t responses = 0;
  std::map<std::string, EntityScore> per_entity;
};

// Micro-averaged multiset overlap. F1 is 0 when precision + recall is 0.
EvalReport entity_f1(const std::vector<EntityPrediction>& predictions);

// Corpus BLEU-4 against one reference per candidate. Orders for which the
// candidate corpus has no n-grams at all are left out of the geometric mean;
// orders with n-grams but no clipped match use precision 1e-9.
double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references);
inline constexpr double kBleuEpsilon = 1e-9;

struct EntityHistogram {
  std::vector<std::pair<std::string, int64_t>> ranked;  // count desc, name asc
  int64_t total = 0;
  double head_share(size_t k) const;
};

// Tally of the annotated gold entities over every system response.
EntityHistogram entity_histogram(const std::vector<Dialogue>& dialogues);

enum class PerturbKind { kWordParaphrase, kWordDelete, kSentenceParaphrase, kSentenceInsert };
std::string perturb_kind_name(PerturbKind kind);  // "wp" | "wd" | "sp" | "si"
PerturbKind parse_perturb_kind(const std::string& name);

struct PerturbConfig {
  PerturbKind kind = PerturbKind::kWordDelete;
  double rate = 0.3;
  uint64_t seed = 0;
  std::map<std::string, std::vector<std::string>> lexicon;
  std::vector<std::string> distractors;
};

void validate(const PerturbConfig& config);

// Perturbs one utterance. Markers and protected tokens (entity mentions) are
// never deleted or replaced. Randomness comes from config.seed alone.
TokenSeq perturb(const TokenSeq& utterance, const PerturbConfig& config,
                 const std::set<std::string>& protected_tokens = {});

// Tokens of every KB entity and gold entity mentioned by the dialogue.
std::set<std::string> entity_tokens(const Dialogue& dialogue);

// Perturbs every user turn; utterance (d, t) uses derive_seed(seed, "perturb", d, t).
std::vector<Dialogue> make_adversarial_testset(const std::vector<Dialogue>& dialogues,
                                               const PerturbConfig& config);

std::map<std::string, std::vector<std::string>> load_lexicon(const std::filesystem::path& path);
std::vector<std::string> load_distractors(const std::filesystem::path& path);

}  // namespace debias
