// Copyright 2026 The sentsimp Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sentsimp/sari.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "sentsimp/error.h"
#include "sentsimp/text.h"

namespace sentsimp {
namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

double count_of(const NgramCounts& c, const Ngram& g) {
  auto it = c.find(g);
  return it == c.end() ? 0.0 : static_cast<double>(it->second);
}

// Returns {add F1, keep F1, delete precision} in [0, 1].
std::array<double, 3> order_scores(std::span<const std::string> src,
                                   std::span<const std::string> out,
                                   const std::vector<std::vector<std::string>>& refs,
                                   std::size_t n) {
  const NgramCounts s = ngrams(src, n);
  const NgramCounts o = ngrams(out, n);
  std::map<Ngram, double> r;
  for (const auto& ref : refs) {
    for (const auto& [g, c] : ngrams(ref, n)) r[g] += static_cast<double>(c);
  }
  const double num_refs = static_cast<double>(refs.size());
  for (auto& [g, c] : r) c /= num_refs;

  std::set<Ngram> all;
  for (const auto& [g, c] : s) all.insert(g);
  for (const auto& [g, c] : o) all.insert(g);
  for (const auto& [g, c] : r) all.insert(g);

  double keep_hit = 0, keep_sys = 0, keep_ref = 0;
  double del_hit = 0, del_sys = 0;
  double add_hit = 0, add_sys = 0, add_ref = 0;
  for (const auto& g : all) {
    const double cs = count_of(s, g);
    const double co = count_of(o, g);
    auto it = r.find(g);
    const double cr = it == r.end() ? 0.0 : it->second;

    const double k = std::min(cs, co);
    const double k_ref = std::min(cs, cr);
    keep_hit += std::min(k, k_ref);
    keep_sys += k;
    keep_ref += k_ref;

    const double d = std::max(0.0, cs - co);
    const double d_ref = std::max(0.0, cs - cr);
    del_hit += std::min(d, d_ref);
    del_sys += d;

    const double a = std::max(0.0, co - cs);
    const double a_ref = std::max(0.0, cr - cs);
    add_hit += std::min(a, a_ref);
    add_sys += a;
    add_ref += a_ref;
  }
  std::array<double, 3> scores{};
  scores[kAdd] = f1(ratio(add_hit, add_sys), ratio(add_hit, add_ref));
  scores[kKeep] = f1(ratio(keep_hit, keep_sys), ratio(keep_hit, keep_ref));
  scores[kDelete] = ratio(del_hit, del_sys);
  return scores;
}

void finalize(SariReport& report) {
  std::array<double, 3> totals{};
  for (const auto& row : report.per_order) {
    for (std::size_t c = 0; c < 3; ++c) totals[c] += row[c];
  }
  const double orders = static_cast<double>(kMaxNgramOrder);
  report.add = totals[kAdd] / orders;
  report.keep = totals[kKeep] / orders;
  report.del = totals[kDelete] / orders;
  report.sari = (report.add + report.keep + report.del) / 3.0;
}

}  // namespace

NgramCounts ngrams(std::span<const std::string> tokens, std::size_t n) {
  if (n < 1 || n > kMaxNgramOrder) {
    throw ContractError("ngrams: order must be in 1..4, got " + std::to_string(n));
  }
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

SariReport sari_sentence(std::string_view source, std::string_view output,
                         std::span<const std::string> references) {
  if (references.empty()) throw ContractError("sari: at least one reference is required");
  const auto src = split_lower(source);
  const auto out = split_lower(output);
  std::vector<std::vector<std::string>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(split_lower(r));

  SariReport report;
  for (std::size_t n = 1; n <= kMaxNgramOrder; ++n) {
    const auto scores = order_scores(src, out, refs, n);
    for (std::size_t c = 0; c < 3; ++c) report.per_order[n - 1][c] = 100.0 * scores[c];
  }
  finalize(report);
  return report;
}

CorpusSari sari_corpus(std::span<const SariItem> items) {
  if (items.empty()) throw ContractError("sari_corpus: no items");
  CorpusSari result;
  result.sentences.reserve(items.size());
  for (const auto& item : items) {
    result.sentences.push_back(sari_sentence(item.source, item.output, item.references));
  }
  const double n = static_cast<double>(items.size());
  for (std::size_t o = 0; o < kMaxNgramOrder; ++o) {
    for (std::size_t c = 0; c < 3; ++c) {
      double total = 0.0;
      for (const auto& s : result.sentences) total += s.per_order[o][c];
      result.corpus.per_order[o][c] = total / n;
    }
  }
  // Components follow from the averaged per-order table, which keeps the
  // report's internal identities exact; this equals the mean of the
  // sentence components up to rounding.
  finalize(result.corpus);
  return result;
}

std::vector<HistogramBin> score_histogram(std::span<const double> scores, std::size_t num_bins) {
  if (num_bins == 0) throw ContractError("score_histogram: num_bins must be >= 1");
  const double width = 100.0 / static_cast<double>(num_bins);
  std::vector<HistogramBin> bins(num_bins);
  for (std::size_t i = 0; i < num_bins; ++i) bins[i].lower = static_cast<double>(i) * width;
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 100.0)) {
      throw ContractError("score_histogram: score " + std::to_string(s) + " outside [0, 100]");
    }
    auto idx = static_cast<std::size_t>(std::floor(s / width));
    ++bins[std::min(idx, num_bins - 1)].count;
  }
  return bins;
}

}  // namespace sentsimp
