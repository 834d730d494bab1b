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

#ifndef SENTSIMP_DECODE_H_
#define SENTSIMP_DECODE_H_

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sentsimp/model.h"
#include "sentsimp/tokenizer.h"

namespace sentsimp {

enum class DecodeStrategy { kGreedy, kBeam };

std::string_view to_string(DecodeStrategy s);
DecodeStrategy parse_strategy(std::string_view s);

struct DecodeConfig {
  // Cap on the generated sequence including bos (and eos, when emitted).
  std::size_t max_len = kMaxTokens;
  DecodeStrategy strategy = DecodeStrategy::kGreedy;
  std::size_t beam_width = 4;
  // Finished scores are log_prob / length^length_penalty.
  double length_penalty = 0.0;

  void validate() const;
};

// Next-token logits for each prefix in a batch. All prefixes in one call
// have the same length.
using NextTokenFn =
    std::function<std::vector<std::vector<double>>(const std::vector<std::vector<TokenId>>&)>;

struct Hypothesis {
  std::vector<TokenId> ids;  // starts with bos
  double log_prob = 0.0;
  bool finished = false;     // ended with eos
};

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(const std::vector<double>& values);
std::vector<double> log_softmax(const std::vector<double>& logits);

// Repeated argmax from bos until eos or max_len ids.
Hypothesis greedy_search(const NextTokenFn& next, TokenId bos, TokenId eos,
                         std::size_t max_len);

// Length-penalized beam search. Hypotheses ending in eos retire; the result
// is the best retired hypothesis, or the best unfinished one at max_len.
// The greedy path is tracked alongside the beam and competes in the final
// selection, so the result never scores below greedy_search and
// beam_width 1 reproduces it exactly.
Hypothesis beam_search(const NextTokenFn& next, TokenId bos, TokenId eos,
                       const DecodeConfig& cfg);

// Sum of next-token log-probabilities along `ids` (which start with bos).
double sequence_log_prob(const NextTokenFn& next, const std::vector<TokenId>& ids);

// Scores prefixes against one encoded source sentence. The encoder runs once.
class SourceScorer {
 public:
  SourceScorer(const Model& model, const Vocabulary& vocab, std::string_view source);

  std::vector<std::vector<double>> operator()(
      const std::vector<std::vector<TokenId>>& prefixes) const;

  NextTokenFn as_fn() const {
    return [this](const auto& prefixes) { return (*this)(prefixes); };
  }

 private:
  const Model& model_;
  MaskGrid source_mask_;
  Tensor memory_;
};

std::string greedy_decode(const Model& model, const Vocabulary& vocab,
                          std::string_view source, const DecodeConfig& cfg = {});
std::string beam_decode(const Model& model, const Vocabulary& vocab,
                        std::string_view source, const DecodeConfig& cfg = {});
// Dispatches on cfg.strategy.
std::string simplify(const Model& model, const Vocabulary& vocab, std::string_view source,
                     const DecodeConfig& cfg = {});

}  // namespace sentsimp

#endif  // SENTSIMP_DECODE_H_
