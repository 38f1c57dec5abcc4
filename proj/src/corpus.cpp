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

#include "debias/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace debias {

using nlohmann::json;

EntityLabel EntityLabel::entity(std::string value) {
  if (value.empty()) throw DomainError("entity label must be nonempty");
  if (value == kNullLabel) return null();
  EntityLabel label;
  label.value_ = std::move(value);
  label.is_null_ = false;
  return label;
}

EntityLabel EntityLabel::from_key(std::string_view key) {
  return key == kNullLabel ? null() : entity(std::string(key));
}

CorpusSchema schema_by_id(const std::string& id) {
  if (id == "generic") return {"generic", {}};
  if (id == "synthetic") return {"synthetic", {"restaurant_name"}};
  if (id == "multiwoz") {
    return {"multiwoz",
            {"restaurant_name", "hotel_name", "attraction_name", "train_id", "taxi_type",
             "hospital_name", "police_name", "area", "food", "pricerange", "address", "phone",
             "postcode", "reference", "stars", "type", "day", "time", "leaveat", "arriveby",
             "departure", "destination", "people", "price", "duration", "choice"}};
  }
  throw SchemaError("unknown corpus schema '" + id + "'");
}

void validate_dialogue(const Dialogue& dialogue, const CorpusSchema& schema) {
  if (dialogue.turns.empty()) throw SchemaError("dialogue '" + dialogue.id + "' has no turns");
  for (size_t i = 0; i < dialogue.turns.size(); ++i) {
    const Speaker expected = i % 2 == 0 ? Speaker::kUser : Speaker::kSystem;
    if (dialogue.turns[i].speaker != expected) {
      throw SchemaError("dialogue '" + dialogue.id + "': speaker order violated at turn " +
                        std::to_string(i));
    }
  }
  for (const KbRecord& rec : dialogue.kb) {
    if (rec.entity.empty()) throw SchemaError("dialogue '" + dialogue.id + "': empty KB entity");
    if (!schema.accepts(rec.slot_type)) {
      throw SchemaError("dialogue '" + dialogue.id + "': slot_type '" + rec.slot_type +
                        "' not declared by schema '" + schema.id + "'");
    }
  }
}

Dialogue parse_dialogue(const std::string& line, size_t line_no, const CorpusSchema& schema) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(where + "malformed JSON (" + e.what() + ")");
  }
  Dialogue d;
  try {
    d.id = j.at("id").get<std::string>();
    for (const json& t : j.at("turns")) {
      const std::string speaker = t.at("speaker").get<std::string>();
      Turn turn;
      if (speaker == "user") {
        turn.speaker = Speaker::kUser;
      } else if (speaker == "system") {
        turn.speaker = Speaker::kSystem;
      } else {
        throw ParseError(where + "unknown speaker '" + speaker + "'");
      }
      turn.text = tokenize(t.at("text").get<std::string>());
      d.turns.push_back(std::move(turn));
    }
    if (j.contains("kb")) {
      for (const json& r : j.at("kb")) {
        KbRecord rec;
        rec.entity = join(tokenize(r.at("entity").get<std::string>()));
        rec.slot_type = r.at("slot_type").get<std::string>();
        if (r.contains("attributes")) {
          rec.attributes = r.at("attributes").get<std::map<std::string, std::string>>();
        }
        d.kb.push_back(std::move(rec));
      }
    }
    if (j.contains("gold_entities")) {
      for (const auto& [key, value] : j.at("gold_entities").items()) {
        std::vector<std::string> ents;
        for (const json& e : value) ents.push_back(join(tokenize(e.get<std::string>())));
        d.gold_entities[std::stoi(key)] = std::move(ents);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(where + "bad dialogue record (" + e.what() + ")");
  } catch (const std::invalid_argument&) {
    throw ParseError(where + "gold_entities keys must be turn indices");
  }
  try {
    validate_dialogue(d, schema);
  } catch (const SchemaError& e) {
    throw SchemaError(where + e.what());
  }
  return d;
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& path, const CorpusSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file '" + path.string() + "'");
  std::vector<Dialogue> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_dialogue(line, line_no, schema));
  }
  return out;
}

std::string dialogue_to_json_line(const Dialogue& d) {
  json j;
  j["id"] = d.id;
  j["turns"] = json::array();
  for (const Turn& t : d.turns) {
    j["turns"].push_back(
        {{"speaker", t.speaker == Speaker::kUser ? "user" : "system"}, {"text", join(t.text)}});
  }
  j["kb"] = json::array();
  for (const KbRecord& r : d.kb) {
    j["kb"].push_back({{"entity", r.entity}, {"slot_type", r.slot_type}, {"attributes", r.attributes}});
  }
  j["gold_entities"] = json::object();
  for (const auto& [turn, ents] : d.gold_entities) j["gold_entities"][std::to_string(turn)] = ents;
  return j.dump();
}

void save_corpus(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus file '" + path.string() + "'");
  for (const Dialogue& d : dialogues) out << dialogue_to_json_line(d) << '\n';
}

DelexResponse delexicalize(const TokenSeq& response, const std::vector<KbRecord>& kb) {
  struct Pattern {
    TokenSeq tokens;
    std::string entity;
    std::string slot_type;
  };
  std::vector<Pattern> patterns;
  std::set<TokenSeq> seen;
  for (const KbRecord& rec : kb) {
    TokenSeq toks = tokenize(rec.entity);
    if (toks.empty() || !seen.insert(toks).second) continue;
    patterns.push_back({std::move(toks), rec.entity, rec.slot_type});
  }

  struct Match {
    size_t start;
    size_t len;
    size_t pattern;
  };
  std::vector<Match> matches;
  for (size_t p = 0; p < patterns.size(); ++p) {
    const TokenSeq& pat = patterns[p].tokens;
    if (pat.size() > response.size()) continue;
    for (size_t s = 0; s + pat.size() <= response.size(); ++s) {
      if (std::equal(pat.begin(), pat.end(), response.begin() + static_cast<std::ptrdiff_t>(s))) {
        matches.push_back({s, pat.size(), p});
      }
    }
  }
  // Longest first, then leftmost, then KB order.
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.len != b.len) return a.len > b.len;
    if (a.start != b.start) return a.start < b.start;
    return a.pattern < b.pattern;
  });
  std::vector<bool> taken(response.size(), false);
  std::vector<Match> accepted;
  for (const Match& m : matches) {
    bool free = true;
    for (size_t i = m.start; i < m.start + m.len; ++i) free = free && !taken[i];
    if (!free) continue;
    for (size_t i = m.start; i < m.start + m.len; ++i) taken[i] = true;
    accepted.push_back(m);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Match& a, const Match& b) { return a.start < b.start; });

  DelexResponse out;
  size_t pos = 0;
  for (const Match& m : accepted) {
    for (; pos < m.start; ++pos) out.tokens.push_back(response[pos]);
    const Pattern& pat = patterns[m.pattern];
    std::string placeholder = "[" + pat.slot_type + "]";
    out.slot_map.push_back({out.tokens.size(), placeholder, pat.entity});
    out.tokens.push_back(std::move(placeholder));
    pos = m.start + m.len;
  }
  for (; pos < response.size(); ++pos) out.tokens.push_back(response[pos]);
  return out;
}

TokenSeq relexicalize(const DelexResponse& delex) {
  TokenSeq out;
  size_t next = 0;
  for (size_t i = 0; i < delex.tokens.size(); ++i) {
    if (next < delex.slot_map.size() && delex.slot_map[next].position == i) {
      for (Token& t : tokenize(delex.slot_map[next].gold_entity)) out.push_back(std::move(t));
      ++next;
    } else {
      out.push_back(delex.tokens[i]);
    }
  }
  return out;
}

TokenSeq serialize_context(const std::vector<Turn>& history, const TokenSeq& response_prefix) {
  TokenSeq out;
  for (const Turn& t : history) {
    const std::string marker(t.speaker == Speaker::kUser ? kUserMarker : kSystemMarker);
    out.push_back(marker);
    out.insert(out.end(), t.text.begin(), t.text.end());
    out.push_back(marker);
  }
  out.emplace_back(kResponseMarker);
  out.insert(out.end(), response_prefix.begin(), response_prefix.end());
  return out;
}

std::vector<TimestepInstance> build_timestep_instances(const Dialogue& dialogue,
                                                       const DelexResponse& delex,
                                                       size_t turn_index) {
  if (turn_index >= dialogue.turns.size()) {
    throw std::out_of_range("turn index " + std::to_string(turn_index) + " out of range for '" +
                            dialogue.id + "'");
  }
  if (dialogue.turns[turn_index].speaker != Speaker::kSystem) {
    throw std::out_of_range("turn " + std::to_string(turn_index) + " of '" + dialogue.id +
                            "' is not a system turn");
  }
  const std::vector<Turn> history(dialogue.turns.begin(),
                                  dialogue.turns.begin() + static_cast<std::ptrdiff_t>(turn_index));
  const TokenSeq base = serialize_context(history, {});

  std::vector<TimestepInstance> out;
  out.reserve(delex.tokens.size());
  size_t next_slot = 0;
  for (size_t t = 0; t < delex.tokens.size(); ++t) {
    TimestepInstance inst;
    inst.context = base;
    inst.context.insert(inst.context.end(), delex.tokens.begin(),
                        delex.tokens.begin() + static_cast<std::ptrdiff_t>(t));
    inst.dialogue_id = dialogue.id;
    inst.timestep = static_cast<int>(t) + 1;
    inst.turn = static_cast<int>(turn_index);
    if (next_slot < delex.slot_map.size() && delex.slot_map[next_slot].position == t) {
      inst.label = EntityLabel::entity(delex.slot_map[next_slot].gold_entity);
      ++next_slot;
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<TimestepInstance> build_corpus_instances(const std::vector<Dialogue>& dialogues) {
  std::vector<TimestepInstance> out;
  for (const Dialogue& d : dialogues) {
    for (size_t i = 0; i < d.turns.size(); ++i) {
      if (d.turns[i].speaker != Speaker::kSystem) continue;
      const DelexResponse delex = delexicalize(d.turns[i].text, d.kb);
      std::vector<TimestepInstance> insts = build_timestep_instances(d, delex, i);
      std::move(insts.begin(), insts.end(), std::back_inserter(out));
    }
  }
  return out;
}

size_t response_start(const TokenSeq& context) {
  for (size_t i = 0; i < context.size(); ++i) {
    if (context[i] == kResponseMarker) return i;
  }
  return context.size();
}

}  // namespace debias
