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

#include "debias/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "debias/rng.hpp"
#include "json.hpp"

namespace debias {

namespace {

double ratio(int64_t num, int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

std::map<std::string, int64_t> multiset(const std::vector<std::string>& items) {
  std::map<std::string, int64_t> m;
  for (const std::string& s : items) ++m[s];
  return m;
}

}  // namespace

EvalReport entity_f1(const std::vector<EntityPrediction>& predictions) {
  EvalReport r;
  r.responses = predictions.size();
  for (const EntityPrediction& p : predictions) {
    const auto pred = multiset(p.predicted);
    const auto gold = multiset(p.gold);
    for (const auto& [e, c] : pred) {
      auto it = gold.find(e);
      const int64_t hit = it == gold.end() ? 0 : std::min(c, it->second);
      r.per_entity[e].tp += hit;
      r.per_entity[e].predicted += c;
      r.tp += hit;
      r.predicted_total += c;
    }
    for (const auto& [e, c] : gold) {
      r.per_entity[e].gold += c;
      r.gold_total += c;
    }
  }
  r.precision = ratio(r.tp, r.predicted_total);
  r.recall = ratio(r.tp, r.gold_total);
  r.entity_f1 = harmonic(r.precision, r.recall);
  for (auto& [e, s] : r.per_entity) {
    s.precision = ratio(s.tp, s.predicted);
    s.recall = ratio(s.tp, s.gold);
  }
  return r;
}

double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references) {
  if (candidates.empty()) throw DomainError("bleu: empty candidate corpus");
  if (candidates.size() != references.size()) {
    throw DomainError("bleu: candidate and reference counts differ");
  }
  constexpr size_t kMaxOrder = 4;
  std::array<int64_t, kMaxOrder> matches{};
  std::array<int64_t, kMaxOrder> totals{};
  int64_t cand_len = 0;
  int64_t ref_len = 0;
  for (size_t s = 0; s < candidates.size(); ++s) {
    const TokenSeq& c = candidates[s];
    const TokenSeq& r = references[s];
    cand_len += static_cast<int64_t>(c.size());
    ref_len += static_cast<int64_t>(r.size());
    for (size_t n = 1; n <= kMaxOrder; ++n) {
      if (c.size() < n) continue;
      std::map<TokenSeq, int64_t> ref_counts;
      for (size_t i = 0; i + n <= r.size(); ++i) {
        ++ref_counts[TokenSeq(r.begin() + static_cast<std::ptrdiff_t>(i),
                              r.begin() + static_cast<std::ptrdiff_t>(i + n))];
      }
      std::map<TokenSeq, int64_t> cand_counts;
      for (size_t i = 0; i + n <= c.size(); ++i) {
        ++cand_counts[TokenSeq(c.begin() + static_cast<std::ptrdiff_t>(i),
                               c.begin() + static_cast<std::ptrdiff_t>(i + n))];
      }
      for (const auto& [g, cnt] : cand_counts) {
        auto it = ref_counts.find(g);
        if (it != ref_counts.end()) matches[n - 1] += std::min(cnt, it->second);
        totals[n - 1] += cnt;
      }
    }
  }
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  size_t orders = 0;
  for (size_t n = 0; n < kMaxOrder; ++n) {
    if (totals[n] == 0) continue;
    const double p = matches[n] == 0 ? kBleuEpsilon : ratio(matches[n], totals[n]);
    log_sum += std::log(p);
    ++orders;
  }
  const double bp = cand_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(orders)), 0.0, 1.0);
}

double EntityHistogram::head_share(size_t k) const {
  if (total == 0) return 0.0;
  int64_t head = 0;
  for (size_t i = 0; i < std::min(k, ranked.size()); ++i) head += ranked[i].second;
  return ratio(head, total);
}

EntityHistogram entity_histogram(const std::vector<Dialogue>& dialogues) {
  std::map<std::string, int64_t> counts;
  for (const Dialogue& d : dialogues) {
    for (const auto& [turn, ents] : d.gold_entities) {
      for (const std::string& e : ents) ++counts[e];
    }
  }
  EntityHistogram h;
  for (const auto& [e, c] : counts) {
    h.ranked.emplace_back(e, c);
    h.total += c;
  }
  std::stable_sort(h.ranked.begin(), h.ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return h;
}

std::string perturb_kind_name(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kWordParaphrase: return "wp";
    case PerturbKind::kWordDelete: return "wd";
    case PerturbKind::kSentenceParaphrase: return "sp";
    case PerturbKind::kSentenceInsert: return "si";
  }
  return "wd";
}

PerturbKind parse_perturb_kind(const std::string& name) {
  if (name == "wp") return PerturbKind::kWordParaphrase;
  if (name == "wd") return PerturbKind::kWordDelete;
  if (name == "sp") return PerturbKind::kSentenceParaphrase;
  if (name == "si") return PerturbKind::kSentenceInsert;
  throw ConfigError("unknown perturbation kind '" + name + "' (expected wp, wd, sp or si)");
}

void validate(const PerturbConfig& config) {
  if (!(config.rate >= 0.0 && config.rate <= 1.0)) throw ConfigError("perturbation rate must lie in [0, 1]");
  const bool needs_lexicon = config.kind == PerturbKind::kWordParaphrase ||
                             config.kind == PerturbKind::kSentenceParaphrase;
  if (needs_lexicon && config.lexicon.empty()) {
    throw ConfigError(perturb_kind_name(config.kind) + " perturbation requires a lexicon");
  }
  if (config.kind == PerturbKind::kSentenceInsert && config.distractors.empty()) {
    throw ConfigError("si perturbation requires a distractor pool");
  }
}

TokenSeq perturb(const TokenSeq& utterance, const PerturbConfig& config,
                 const std::set<std::string>& protected_tokens) {
  validate(config);
  if (config.rate == 0.0 || utterance.empty()) return utterance;
  Rng rng(config.seed);
  auto editable = [&](const Token& t) { return !is_marker(t) && !protected_tokens.contains(t); };
  auto covered = [&](const Token& t) {
    auto it = config.lexicon.find(t);
    return editable(t) && it != config.lexicon.end() && !it->second.empty();
  };
  const auto budget = static_cast<size_t>(
      std::ceil(config.rate * static_cast<double>(utterance.size()) - 1e-9));

  std::vector<size_t> candidates;
  switch (config.kind) {
    case PerturbKind::kWordDelete: {
      for (size_t i = 0; i < utterance.size(); ++i) {
        if (editable(utterance[i])) candidates.push_back(i);
      }
      const size_t k = std::min(budget, candidates.size());
      std::vector<bool> drop(utterance.size(), false);
      for (size_t pick : rng.sample_without_replacement(candidates.size(), k)) {
        drop[candidates[pick]] = true;
      }
      TokenSeq out;
      for (size_t i = 0; i < utterance.size(); ++i) {
        if (!drop[i]) out.push_back(utterance[i]);
      }
      return out;
    }
    case PerturbKind::kWordParaphrase:
    case PerturbKind::kSentenceParaphrase: {
      for (size_t i = 0; i < utterance.size(); ++i) {
        if (covered(utterance[i])) candidates.push_back(i);
      }
      std::vector<bool> replace(utterance.size(), false);
      if (config.kind == PerturbKind::kWordParaphrase) {
        const size_t k = std::min(budget, candidates.size());
        for (size_t pick : rng.sample_without_replacement(candidates.size(), k)) {
          replace[candidates[pick]] = true;
        }
      } else {
        for (size_t i : candidates) replace[i] = true;
      }
      TokenSeq out;
      for (size_t i = 0; i < utterance.size(); ++i) {
        if (!replace[i]) {
          out.push_back(utterance[i]);
          continue;
        }
        const auto& syns = config.lexicon.at(utterance[i]);
        for (Token& t : tokenize(syns[rng.below(syns.size())])) out.push_back(std::move(t));
      }
      return out;
    }
    case PerturbKind::kSentenceInsert: {
      const TokenSeq sentence = tokenize(config.distractors[rng.below(config.distractors.size())]);
      const auto pos = static_cast<std::ptrdiff_t>(rng.below(utterance.size() + 1));
      TokenSeq out = utterance;
      out.insert(out.begin() + pos, sentence.begin(), sentence.end());
      return out;
    }
  }
  return utterance;
}

std::set<std::string> entity_tokens(const Dialogue& dialogue) {
  std::set<std::string> out;
  for (const KbRecord& r : dialogue.kb) {
    for (Token& t : tokenize(r.entity)) out.insert(std::move(t));
  }
  for (const auto& [turn, ents] : dialogue.gold_entities) {
    for (const std::string& e : ents) {
      for (Token& t : tokenize(e)) out.insert(std::move(t));
    }
  }
  return out;
}

std::vector<Dialogue> make_adversarial_testset(const std::vector<Dialogue>& dialogues,
                                               const PerturbConfig& config) {
  validate(config);
  std::vector<Dialogue> out = dialogues;
  for (size_t d = 0; d < out.size(); ++d) {
    const std::set<std::string> keep = entity_tokens(out[d]);
    for (size_t t = 0; t < out[d].turns.size(); ++t) {
      Turn& turn = out[d].turns[t];
      if (turn.speaker != Speaker::kUser) continue;
      PerturbConfig local = config;
      local.seed = derive_seed(config.seed, "perturb", d, t);
      turn.text = perturb(turn.text, local, keep);
    }
  }
  return out;
}

std::map<std::string, std::vector<std::string>> load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open lexicon '" + path.string() + "'");
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    std::map<std::string, std::vector<std::string>> lex;
    for (const auto& [word, syns] : j.items()) {
      lex[join(tokenize(word))] = syns.get<std::vector<std::string>>();
    }
    return lex;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad lexicon '" + path.string() + "': " + e.what());
  }
}

std::vector<std::string> load_distractors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open distractor pool '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  }
  return out;
}

}  // namespace debias
