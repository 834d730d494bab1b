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

#ifndef SENTSIMP_SARI_H_
#define SENTSIMP_SARI_H_

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sentsimp {

inline constexpr std::size_t kMaxNgramOrder = 4;

using Ngram = std::vector<std::string>;
// Multiset of contiguous n-grams of one order.
using NgramCounts = std::map<Ngram, std::size_t>;

// Requires 1 <= n <= 4. Sequences shorter than n yield an empty map.
NgramCounts ngrams(std::span<const std::string> tokens, std::size_t n);

enum SariComponent : std::size_t { kAdd = 0, kKeep = 1, kDelete = 2 };

// Scores are on a 0-100 scale.
struct SariReport {
  double sari = 0.0;
  double add = 0.0;
  double keep = 0.0;
  double del = 0.0;
  // per_order[n - 1][component]
  std::array<std::array<double, 3>, kMaxNgramOrder> per_order{};
};

// SARI of one system output against its source and r >= 1 references.
// Texts are lowercased and whitespace-split. Per order n, with fractional
// reference counts R(g) = sum_j c_Rj(g) / r:
//   keep   F1 of min(c_S, c_O) against min(c_S, R)
//   delete precision of max(0, c_S - c_O) against max(0, c_S - R)
//   add    F1 of max(0, c_O - c_S) against max(0, R - c_S)
// with any 0/0 ratio counted as 0. Each component averages all four orders.
SariReport sari_sentence(std::string_view source, std::string_view output,
                         std::span<const std::string> references);

struct SariItem {
  std::string source;
  std::string output;
  std::vector<std::string> references;
};

struct CorpusSari {
  SariReport corpus;  // macro average of the sentences
  std::vector<SariReport> sentences;
};

CorpusSari sari_corpus(std::span<const SariItem> items);

struct HistogramBin {
  double lower = 0.0;
  std::size_t count = 0;

  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

// Equal-width bins over [0, 100]; a score of exactly 100 lands in the last
// bin.
std::vector<HistogramBin> score_histogram(std::span<const double> scores,
                                          std::size_t num_bins);

}  // namespace sentsimp

#endif  // SENTSIMP_SARI_H_
