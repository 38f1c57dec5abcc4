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

// Independent re-derivations used as test oracles. None of these call into
// the library's scoring code; they work from raw token sequences and labels.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline bool is_marker(const std::string& t) {
  return t == "<|user|>" || t == "<|system|>" || t == "<|response|>";
}

// Windows of n consecutive non-marker tokens.
inline std::vector<Tokens> windows(const Tokens& seq, size_t n) {
  std::vector<Tokens> out;
  for (size_t i = 0; i + n <= seq.size(); ++i) {
    Tokens w(seq.begin() + static_cast<long>(i), seq.begin() + static_cast<long>(i + n));
    if (std::none_of(w.begin(), w.end(), is_marker)) out.push_back(w);
  }
  return out;
}

struct Labeled {
  Tokens context;
  std::string label;
};

// p(a,b) log2(p(a,b) / (p(a) p(b))) from a fresh tally: occurrence-level
// probabilities for the n-gram and the pair, instance-level for the label.
inline double mi_direct(const std::vector<Labeled>& data, size_t n, const Tokens& a,
                        const std::string& b) {
  double occurrences = 0, count_a = 0, joint = 0, count_b = 0;
  for (const Labeled& d : data) {
    if (d.label == b) count_b += 1;
    for (const Tokens& w : windows(d.context, n)) {
      occurrences += 1;
      if (w == a) {
        count_a += 1;
        if (d.label == b) joint += 1;
      }
    }
  }
  const double pab = joint / occurrences;
  const double pa = count_a / occurrences;
  const double pb = count_b / static_cast<double>(data.size());
  return pab * std::log2(pab / (pa * pb));
}

// Base-2 JSD over aligned probability vectors, 0 log 0 = 0.
inline double jsd_vectors(const std::vector<double>& p, const std::vector<double>& q) {
  double kl_pm = 0, kl_qm = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) kl_pm += p[i] * std::log2(p[i] / m);
    if (q[i] > 0) kl_qm += q[i] * std::log2(q[i] / m);
  }
  return 0.5 * kl_pm + 0.5 * kl_qm;
}

// For every n-gram type absent from at least one instance: JSD between the
// label distribution of instances containing it and of those lacking it.
inline std::map<Tokens, double> jsd_brute_force(const std::vector<Labeled>& data, size_t n) {
  std::set<std::string> labels;
  std::set<Tokens> types;
  for (const Labeled& d : data) {
    labels.insert(d.label);
    for (const Tokens& w : windows(d.context, n)) types.insert(w);
  }
  std::map<Tokens, double> out;
  for (const Tokens& g : types) {
    std::vector<double> with(labels.size(), 0.0), without(labels.size(), 0.0);
    double n_with = 0, n_without = 0;
    for (const Labeled& d : data) {
      const auto ws = windows(d.context, n);
      const bool has = std::find(ws.begin(), ws.end(), g) != ws.end();
      const size_t li = static_cast<size_t>(std::distance(labels.begin(), labels.find(d.label)));
      if (has) {
        with[li] += 1;
        n_with += 1;
      } else {
        without[li] += 1;
        n_without += 1;
      }
    }
    if (n_without == 0) continue;
    for (double& v : with) v /= n_with;
    for (double& v : without) v /= n_without;
    out[g] = jsd_vectors(with, without);
  }
  return out;
}

// Papineni corpus BLEU-4 written out term by term. Orders with no candidate
// n-grams are undefined and left out; orders with n-grams but no match take
// precision eps.
inline double bleu_literal(const std::vector<Tokens>& cands, const std::vector<Tokens>& refs,
                           double eps = 1e-9) {
  double c = 0, r = 0;
  double log_sum = 0;
  int orders = 0;
  for (size_t k = 0; k < cands.size(); ++k) {
    c += static_cast<double>(cands[k].size());
    r += static_cast<double>(refs[k].size());
  }
  for (size_t n = 1; n <= 4; ++n) {
    double clipped = 0, total = 0;
    for (size_t k = 0; k < cands.size(); ++k) {
      std::map<Tokens, double> cand_counts, ref_counts;
      for (size_t i = 0; i + n <= cands[k].size(); ++i) {
        cand_counts[Tokens(cands[k].begin() + static_cast<long>(i),
                           cands[k].begin() + static_cast<long>(i + n))] += 1;
      }
      for (size_t i = 0; i + n <= refs[k].size(); ++i) {
        ref_counts[Tokens(refs[k].begin() + static_cast<long>(i),
                          refs[k].begin() + static_cast<long>(i + n))] += 1;
      }
      for (const auto& [g, cnt] : cand_counts) {
        total += cnt;
        clipped += std::min(cnt, ref_counts[g]);
      }
    }
    if (total == 0) continue;
    const double p = clipped > 0 ? clipped / total : eps;
    log_sum += std::log(p);
    ++orders;
  }
  if (orders == 0) return 0.0;
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / orders);
}

// Micro F1 over multisets.
inline double f1_multiset(const std::vector<std::pair<Tokens, Tokens>>& pred_gold) {
  double tp = 0, np = 0, ng = 0;
  for (const auto& [pred, gold] : pred_gold) {
    std::multiset<std::string> g(gold.begin(), gold.end());
    for (const std::string& p : pred) {
      auto it = g.find(p);
      if (it != g.end()) {
        tp += 1;
        g.erase(it);
      }
    }
    np += static_cast<double>(pred.size());
    ng += static_cast<double>(gold.size());
  }
  const double prec = np > 0 ? tp / np : 0;
  const double rec = ng > 0 ? tp / ng : 0;
  return prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
}

// Zipf(s) mass of the top k ranks out of m.
inline double zipf_head_share(size_t m, double s, size_t k) {
  double z = 0, head = 0;
  for (size_t r = 1; r <= m; ++r) {
    const double w = 1.0 / std::pow(static_cast<double>(r), s);
    z += w;
    if (r <= k) head += w;
  }
  return head / z;
}

}  // namespace oracle
