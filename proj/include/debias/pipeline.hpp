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
#include <optional>
#include <string>
#include <vector>

#include "debias/adversarial_filter.hpp"
#include "debias/contrastive.hpp"
#include "debias/entity_predictor.hpp"
#include "debias/evalkit.hpp"
#include "debias/ngram_stats.hpp"
#include "debias/resplit.hpp"
#include "debias/serialize.hpp"

namespace debias {

inline const std::vector<std::string> kAllStages = {"analyze", "bias_id",  "pairs",   "pretrain",
                                                    "af",      "finetune", "resplit", "perturb",
                                                    "evaluate", "probe",   "report"};

enum class FeatureKind { kEncoder, kBag };

struct PipelineConfig {
  std::filesystem::path train_path;
  std::filesystem::path test_path;                // optional
  std::filesystem::path decorrelated_test_path;   // optional
  std::string schema = "generic";
  std::filesystem::path output_dir = "out";
  uint64_t seed = 0;
  std::vector<std::string> stages = kAllStages;

  size_t n = 3;
  double cutoff = 0.10;
  Criterion criterion = Criterion::kFrequency;
  size_t head_k = 10;

  TrainConfig contrastive;
  ClassifierConfig classifier;
  FilterConfig filter;
  FeatureKind af_features = FeatureKind::kEncoder;
  FeatureKind classifier_features = FeatureKind::kEncoder;
  size_t bag_order = 1;

  std::vector<PerturbKind> perturb_kinds = {PerturbKind::kWordParaphrase, PerturbKind::kWordDelete,
                                            PerturbKind::kSentenceParaphrase,
                                            PerturbKind::kSentenceInsert};
  double perturb_rate = 0.3;
  std::filesystem::path lexicon_path;
  std::filesystem::path distractors_path;

  ResplitConfig resplit;

  // Normalized echo with every default filled in; relative paths as given.
  Json to_json() const;
  std::string hash() const;  // SHA-256 of the normalized echo
};

// Reads a JSON config; relative paths resolve against the config's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from_json(const Json& json, const std::filesystem::path& base_dir);

struct RunOutcome {
  bool ok = true;
  std::string failed_stage;
  std::string error;
  std::vector<std::filesystem::path> artifacts;  // relative to output_dir
};

// Runs the configured stages in canonical order. Later stages load earlier
// artifacts from output_dir when their stage is not part of this run.
// manifest.json lists every artifact with its SHA-256.
RunOutcome run_pipeline(const PipelineConfig& config);

}  // namespace debias
