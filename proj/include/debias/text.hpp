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

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace debias {

using Token = std::string;
using TokenSeq = std::vector<Token>;

inline constexpr std::string_view kUserMarker = "<|user|>";
inline constexpr std::string_view kSystemMarker = "<|system|>";
inline constexpr std::string_view kResponseMarker = "<|response|>";
inline constexpr std::string_view kNullLabel = "[NULL]";

bool is_marker(std::string_view token);

// "[slot_type]" tokens produced by delexicalization.
bool is_placeholder(std::string_view token);

// Lowercases, splits on whitespace and isolates every punctuation character as
// its own token. Markers and placeholders survive as single tokens.
TokenSeq tokenize(std::string_view text);

std::string join(const TokenSeq& tokens, std::string_view sep = " ");

// Error hierarchy shared by every module. The CLI maps these to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct TrainingError : Error {
  using Error::Error;
};
struct DegenerateDataError : Error {
  using Error::Error;
};

}  // namespace debias
