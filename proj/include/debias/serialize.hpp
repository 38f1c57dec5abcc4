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

// On-disk formats for every artifact the pipeline reads or writes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "debias/adversarial_filter.hpp"
#include "debias/contrastive.hpp"
#include "debias/corpus.hpp"
#include "debias/entity_predictor.hpp"
#include "debias/evalkit.hpp"
#include "debias/ngram_stats.hpp"
#include "debias/resplit.hpp"

namespace debias {

using Json = nlohmann::ordered_json;

// Stamp embedded in JSON artifacts.
struct ArtifactMeta {
  std::string config_hash;
  uint64_t seed = 0;
};
Json meta_json(const ArtifactMeta& meta);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view bytes);
void write_json(const std::filesystem::path& path, const Json& json);
Json read_json(const std::filesystem::path& path);

Json to_json(const BiasedTokenSet& set);
BiasedTokenSet biased_set_from_json(const Json& json);

std::string pairs_to_jsonl(const std::vector<PositivePair>& pairs);
std::vector<PositivePair> pairs_from_jsonl(const std::string& text);

std::string instances_to_jsonl(const std::vector<TimestepInstance>& instances);

Json to_json(const EncoderModel& model);
EncoderModel encoder_from_json(const Json& json);

std::string loss_curve_csv(const std::vector<LossPoint>& curve);

// Classifier plus the bag vocabulary when the features are n-gram indicators.
Json to_json(const LinearClassifier& classifier, const Featurizer& featurizer);
LinearClassifier classifier_from_json(const Json& json);
// Rebuilds the featurizer recorded with a classifier; encoder features need
// the encoder it was trained on.
Featurizer featurizer_from_json(const Json& json, const EncoderModel* encoder);

Json to_json(const FilterReport& report);
// "dialogue_id\ttimestep\tturn" per retained instance.
std::string retained_ids_text(const std::vector<TimestepInstance>& instances,
                              const std::vector<size_t>& retained);
std::vector<size_t> retained_from_text(const std::vector<TimestepInstance>& instances,
                                       const std::string& text);

Json to_json(const ResplitResult& result);
Json to_json(const EvalReport& report);
std::string predictions_to_jsonl(const std::vector<PredictionRecord>& predictions);
Json to_json(const EntityHistogram& histogram, size_t head_k);
Json profile_summary_json(const NGramProfile& profile, size_t top);
Json to_json(const EntityTrajectory& trajectory);

}  // namespace debias
