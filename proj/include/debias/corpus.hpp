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

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "debias/text.hpp"

namespace debias {

enum class Speaker { kUser, kSystem };

struct Turn {
  Speaker speaker = Speaker::kUser;
  TokenSeq text;
  bool operator==(const Turn&) const = default;
};

struct KbRecord {
  std::string entity;
  std::string slot_type;
  std::map<std::string, std::string> attributes;
  bool operator==(const KbRecord&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  std::vector<KbRecord> kb;
  // Annotated gold entities per system turn index.
  std::map<int, std::vector<std::string>> gold_entities;
  bool operator==(const Dialogue&) const = default;
};

// Either a KB entity or the special [NULL] class.
class EntityLabel {
 public:
  static EntityLabel null() { return EntityLabel(); }
  static EntityLabel entity(std::string value);
  // Inverse of key(): "[NULL]" maps back to the null label.
  static EntityLabel from_key(std::string_view key);

  bool is_null() const { return is_null_; }
  const std::string& value() const { return value_; }
  // Stable string key; "[NULL]" for the null label.
  std::string key() const { return is_null_ ? std::string(kNullLabel) : value_; }

  auto operator<=>(const EntityLabel&) const = default;

 private:
  EntityLabel() = default;
  std::string value_;
  bool is_null_ = true;
};

struct SlotFill {
  size_t position = 0;
  std::string placeholder;  // "[slot_type]"
  std::string gold_entity;
  bool operator==(const SlotFill&) const = default;
};

struct DelexResponse {
  TokenSeq tokens;
  std::vector<SlotFill> slot_map;
};

struct TimestepInstance {
  TokenSeq context;
  EntityLabel label = EntityLabel::null();
  std::string dialogue_id;
  int timestep = 1;
  // Index of the system turn the response belongs to. Disambiguates
  // (dialogue_id, timestep) when a dialogue has several system turns.
  int turn = 0;
};

// Declared slot vocabulary. An empty slot set accepts any slot type.
struct CorpusSchema {
  std::string id;
  std::set<std::string> slot_types;
  bool accepts(const std::string& slot_type) const {
    return slot_types.empty() || slot_types.contains(slot_type);
  }
};

// Built-in schemas: "generic" (open), "synthetic", "multiwoz".
CorpusSchema schema_by_id(const std::string& id);

std::vector<Dialogue> load_corpus(const std::filesystem::path& path,
                                  const CorpusSchema& schema = schema_by_id("generic"));
// Parses one JSONL record; line_no is only used for error messages.
Dialogue parse_dialogue(const std::string& line, size_t line_no, const CorpusSchema& schema);
void save_corpus(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues);
std::string dialogue_to_json_line(const Dialogue& dialogue);

// Throws SchemaError when speakers do not alternate starting with the user.
void validate_dialogue(const Dialogue& dialogue, const CorpusSchema& schema);

DelexResponse delexicalize(const TokenSeq& response, const std::vector<KbRecord>& kb);
TokenSeq relexicalize(const DelexResponse& delex);

TokenSeq serialize_context(const std::vector<Turn>& history, const TokenSeq& response_prefix);

std::vector<TimestepInstance> build_timestep_instances(const Dialogue& dialogue,
                                                       const DelexResponse& delex,
                                                       size_t turn_index);

// Delexicalizes every system turn against the dialogue KB and concatenates
// the per-turn instances.
std::vector<TimestepInstance> build_corpus_instances(const std::vector<Dialogue>& dialogues);

// Position of the first <|response|> marker, or context.size().
size_t response_start(const TokenSeq& context);

}  // namespace debias
