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

#ifndef SENTSIMP_CORPUS_H_
#define SENTSIMP_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentsimp/tokenizer.h"

namespace sentsimp {

// Aligned (complex, simple) sentence pair. Both sides are trimmed and
// non-empty.
struct ParallelExample {
  std::string source;
  std::string target;

  friend bool operator==(const ParallelExample&, const ParallelExample&) = default;
};

// A source sentence with r >= 1 reference simplifications.
struct EvalExample {
  std::string source;
  std::vector<std::string> references;

  friend bool operator==(const EvalExample&, const EvalExample&) = default;
};

struct CorpusStats {
  std::size_t num_pairs = 0;
  std::size_t num_refs = 0;
  std::size_t max_src_tokens = 0;
  std::size_t max_tgt_tokens = 0;

  // Single-line JSON object.
  std::string to_json() const;
};

CorpusStats corpus_stats(const std::vector<ParallelExample>& examples);
CorpusStats corpus_stats(const std::vector<EvalExample>& examples);

using WarningSink = std::function<void(std::string_view)>;

// Writes "warning: <message>" to stderr.
void log_warning(std::string_view message);

// Pairs line i of each file. Pairs with an empty side are dropped and
// reported through `warn`. Throws FormatError when line counts differ and
// IoError when a file cannot be read.
std::vector<ParallelExample> load_parallel(const std::string& src_path,
                                           const std::string& tgt_path,
                                           const WarningSink& warn = log_warning);

// Example i = (src line i, [ref_0 line i, ..., ref_{r-1} line i]). Every file
// must have the same line count and no line may be blank.
std::vector<EvalExample> load_eval(const std::string& src_path,
                                   const std::vector<std::string>& ref_paths);

// `<stem>.ref.0`, `<stem>.ref.1`, ... for as long as the files exist.
std::vector<std::string> find_reference_files(const std::string& stem);

// Loads `<stem>.src` plus every `<stem>.ref.N`.
std::vector<EvalExample> load_eval_stem(const std::string& stem);

void save_parallel(const std::vector<ParallelExample>& examples,
                   const std::string& src_path, const std::string& tgt_path);

// Source and target each framed as [bos, ..., eos].
struct TokenizedPair {
  std::vector<TokenId> source;
  std::vector<TokenId> target;

  friend bool operator==(const TokenizedPair&, const TokenizedPair&) = default;
};

std::vector<TokenizedPair> tokenize_pairs(const Vocabulary& vocab,
                                          const std::vector<ParallelExample>& examples,
                                          std::size_t max_len);

// Row-major rows x cols matrix.
template <class T>
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(std::size_t r, std::size_t c, T fill) : rows(r), cols(c), values(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using IdGrid = Grid<TokenId>;
// 1 marks a real token, 0 a pad position.
using MaskGrid = Grid<std::uint8_t>;

// Teacher-forcing batch. target_in = target without its final eos;
// target_out = target without its leading bos, so target_out is target_in
// shifted left by one with eos appended.
struct Batch {
  IdGrid source_ids;
  MaskGrid source_pad_mask;
  IdGrid target_in_ids;
  IdGrid target_out_ids;
  MaskGrid target_pad_mask;

  std::size_t size() const { return source_ids.rows; }

  friend bool operator==(const Batch&, const Batch&) = default;
};

// Pads each batch to its longest row. With a seed the example order is a
// deterministic shuffle; without one it is input order. Throws ContractError
// if batch_size is 0 or a sequence exceeds max_len.
std::vector<Batch> make_batches(const std::vector<TokenizedPair>& examples,
                                std::size_t batch_size, TokenId pad_id,
                                std::size_t max_len,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

}  // namespace sentsimp

#endif  // SENTSIMP_CORPUS_H_
