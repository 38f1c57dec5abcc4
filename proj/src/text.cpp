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

#include "debias/text.hpp"

#include <cctype>

namespace debias {

bool is_marker(std::string_view token) {
  return token == kUserMarker || token == kSystemMarker || token == kResponseMarker;
}

bool is_placeholder(std::string_view token) {
  if (token.size() < 3 || token.front() != '[' || token.back() != ']') return false;
  if (token == kNullLabel) return false;
  for (size_t i = 1; i + 1 < token.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(token[i]);
    if (!(std::islower(c) || std::isdigit(c) || c == '_')) return false;
  }
  return true;
}

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

// Length of a marker or placeholder starting at pos, 0 if none.
size_t special_token_length(std::string_view text, size_t pos) {
  for (std::string_view m : {kUserMarker, kSystemMarker, kResponseMarker}) {
    if (text.substr(pos, m.size()) == m) return m.size();
  }
  if (text[pos] == '[') {
    const size_t close = text.find(']', pos);
    if (close != std::string_view::npos) {
      std::string lowered;
      for (size_t i = pos; i <= close; ++i) {
        lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      }
      if (is_placeholder(lowered)) return close - pos + 1;
    }
  }
  return 0;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
      ++i;
      continue;
    }
    if (const size_t len = special_token_length(text, i); len > 0) {
      flush();
      std::string tok(text.substr(i, len));
      for (char& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      out.push_back(std::move(tok));
      i += len;
      continue;
    }
    if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
    ++i;
  }
  flush();
  return out;
}

std::string join(const TokenSeq& tokens, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

}  // namespace debias
