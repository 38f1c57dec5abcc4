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

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "debias/corpus.hpp"
#include "debias/rng.hpp"
#include "support/oracles.hpp"

namespace fixture {

using debias::Dialogue;
using debias::TimestepInstance;

// Alternating user/system turns starting with the user.
inline Dialogue dialogue(const std::string& id, const std::vector<std::string>& texts,
                         std::vector<debias::KbRecord> kb = {}) {
  Dialogue d;
  d.id = id;
  for (size_t i = 0; i < texts.size(); ++i) {
    d.turns.push_back({i % 2 == 0 ? debias::Speaker::kUser : debias::Speaker::kSystem,
                       debias::tokenize(texts[i])});
  }
  d.kb = std::move(kb);
  return d;
}

inline TimestepInstance instance(const std::string& context, const std::string& label,
                                 const std::string& id = "d", int timestep = 1) {
  TimestepInstance t;
  t.context = debias::tokenize(context);
  t.label = debias::EntityLabel::from_key(label);
  t.dialogue_id = id;
  t.timestep = timestep;
  return t;
}

// Random instances over a small alphabet; contexts have 2..max_len tokens.
inline std::vector<TimestepInstance> random_instances(uint64_t seed, size_t count,
                                                      size_t alphabet, size_t labels,
                                                      size_t max_len) {
  debias::Rng rng(seed);
  std::vector<TimestepInstance> out;
  for (size_t i = 0; i < count; ++i) {
    TimestepInstance t;
    const size_t len = 2 + rng.below(max_len - 1);
    for (size_t k = 0; k < len; ++k) t.context.push_back("w" + std::to_string(rng.below(alphabet)));
    const size_t l = rng.below(labels);
    t.label = l == 0 ? debias::EntityLabel::null() : debias::EntityLabel::entity("e" + std::to_string(l));
    t.dialogue_id = "r" + std::to_string(i);
    out.push_back(std::move(t));
  }
  return out;
}

// Plain (context, label key) view for the oracles.
inline std::vector<oracle::Labeled> as_labeled(const std::vector<TimestepInstance>& insts) {
  std::vector<oracle::Labeled> out;
  for (const auto& i : insts) out.push_back({i.context, i.label.key()});
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("debias-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
