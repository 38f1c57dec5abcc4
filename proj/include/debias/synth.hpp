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
#include <string>
#include <vector>

#include "debias/corpus.hpp"

namespace debias {

// Generator settings for a corpus with a planted cue-entity shortcut.
struct SyntheticBenchSpec {
  size_t num_entities = 12;
  double head_skew = 1.0;     // Zipf exponent of the entity distribution
  double cue_strength = 1.0;  // P(entity's own cue trigram | entity) in train
  // Fraction of dialogues whose content word is uninformative.
  double content_noise = 0.0;
  bool decorrelate_test = true;
  size_t train_size = 1200;
  size_t test_size = 300;
  size_t num_openers = 12;
  size_t num_closings = 12;
  size_t opener_length = 12;
  size_t closing_length = 12;
  // A niche topic replaces both templates with its own rarely used pair.
  double niche_fraction = 0.2;
  size_t num_niches = 20;
  size_t num_adjectives = 12;
  size_t num_nouns = 6;
  size_t num_neutral_cues = 4;
  size_t kb_distractors = 2;
  uint64_t seed = 0;

  void validate() const;
};

struct SyntheticBench {
  std::vector<Dialogue> train;
  std::vector<Dialogue> test;          // same generative process as train
  std::vector<Dialogue> decorrelated;  // cue drawn independently of the entity
  std::map<std::string, std::vector<std::string>> lexicon;
  std::vector<std::string> distractors;
};

std::string synthetic_entity(size_t rank);           // rank 0 is the head entity
TokenSeq synthetic_cue(size_t rank);                 // the entity's cue trigram
std::string synthetic_content_word(size_t rank);     // the entity's content word

// Zipf quotas over `total` items by largest remainder; sums to total.
std::vector<size_t> zipf_quotas(size_t num_entities, double skew, size_t total);
// Probability mass of each rank under Zipf(skew).
std::vector<double> zipf_mass(size_t num_entities, double skew);

// Single-exchange dialogues: opener, cue trigram, "find me a <adj> <word>
// <noun>", closing; the system answers with the entity. Each split uses
// derive_seed(seed, "synth", split).
SyntheticBench generate_synthetic(const SyntheticBenchSpec& spec);

// train.jsonl, test.jsonl, test_decorrelated.jsonl, lexicon.json, distractors.txt.
void write_synthetic(const std::filesystem::path& dir, const SyntheticBench& bench);

}  // namespace debias
