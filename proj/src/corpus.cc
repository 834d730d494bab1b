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

#include "sentsimp/corpus.h"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "json.hpp"
#include "sentsimp/error.h"
#include "sentsimp/rng.h"
#include "sentsimp/text.h"

namespace sentsimp {

std::string CorpusStats::to_json() const {
  nlohmann::ordered_json j;
  j["num_pairs"] = num_pairs;
  j["num_refs"] = num_refs;
  j["max_src_tokens"] = max_src_tokens;
  j["max_tgt_tokens"] = max_tgt_tokens;
  return j.dump();
}

CorpusStats corpus_stats(const std::vector<ParallelExample>& examples) {
  CorpusStats stats;
  stats.num_pairs = examples.size();
  stats.num_refs = examples.empty() ? 0 : 1;
  for (const auto& ex : examples) {
    stats.max_src_tokens = std::max(stats.max_src_tokens, split_lower(ex.source).size());
    stats.max_tgt_tokens = std::max(stats.max_tgt_tokens, split_lower(ex.target).size());
  }
  return stats;
}

CorpusStats corpus_stats(const std::vector<EvalExample>& examples) {
  CorpusStats stats;
  stats.num_pairs = examples.size();
  stats.num_refs = examples.empty() ? 0 : examples.front().references.size();
  for (const auto& ex : examples) {
    stats.max_src_tokens = std::max(stats.max_src_tokens, split_lower(ex.source).size());
    for (const auto& ref : ex.references) {
      stats.max_tgt_tokens = std::max(stats.max_tgt_tokens, split_lower(ref).size());
    }
  }
  return stats;
}

void log_warning(std::string_view message) {
  std::cerr << "warning: " << message << '\n';
}

std::vector<ParallelExample> load_parallel(const std::string& src_path,
                                           const std::string& tgt_path,
                                           const WarningSink& warn) {
  const auto src = read_lines(src_path);
  const auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw FormatError("line count mismatch: " + src_path + " has " +
                      std::to_string(src.size()) + " lines, " + tgt_path + " has " +
                      std::to_string(tgt.size()));
  }
  std::vector<ParallelExample> out;
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto s = trim(src[i]);
    const auto t = trim(tgt[i]);
    if (s.empty() || t.empty()) {
      if (warn) {
        warn("dropping pair at line " + std::to_string(i + 1) + ": empty " +
             (s.empty() ? "source" : "target"));
      }
      continue;
    }
    out.push_back({std::string(s), std::string(t)});
  }
  return out;
}

std::vector<EvalExample> load_eval(const std::string& src_path,
                                   const std::vector<std::string>& ref_paths) {
  if (ref_paths.empty()) throw ContractError("load_eval: at least one reference file required");
  const auto src = read_lines(src_path);
  std::vector<std::vector<std::string>> refs;
  refs.reserve(ref_paths.size());
  for (const auto& path : ref_paths) {
    refs.push_back(read_lines(path));
    if (refs.back().size() != src.size()) {
      throw FormatError("line count mismatch: " + path + " has " +
                        std::to_string(refs.back().size()) + " lines, expected " +
                        std::to_string(src.size()) + " (from " + src_path + ")");
    }
  }
  std::vector<EvalExample> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto s = trim(src[i]);
    if (s.empty()) {
      throw FormatError(src_path + ": line " + std::to_string(i + 1) + " is empty");
    }
    out[i].source = std::string(s);
    out[i].references.reserve(refs.size());
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const auto ref = trim(refs[r][i]);
      if (ref.empty()) {
        throw FormatError(ref_paths[r] + ": line " + std::to_string(i + 1) + " is empty");
      }
      out[i].references.emplace_back(ref);
    }
  }
  return out;
}

std::vector<std::string> find_reference_files(const std::string& stem) {
  std::vector<std::string> paths;
  for (std::size_t r = 0;; ++r) {
    auto path = stem + ".ref." + std::to_string(r);
    if (!std::filesystem::exists(path)) break;
    paths.push_back(std::move(path));
  }
  return paths;
}

std::vector<EvalExample> load_eval_stem(const std::string& stem) {
  const auto src = stem + ".src";
  if (!std::filesystem::exists(src)) throw IoError("missing evaluation source: " + src);
  auto refs = find_reference_files(stem);
  if (refs.empty()) throw IoError("no reference files found: " + stem + ".ref.0");
  return load_eval(src, refs);
}

void save_parallel(const std::vector<ParallelExample>& examples,
                   const std::string& src_path, const std::string& tgt_path) {
  std::vector<std::string> src, tgt;
  src.reserve(examples.size());
  tgt.reserve(examples.size());
  for (const auto& ex : examples) {
    src.push_back(ex.source);
    tgt.push_back(ex.target);
  }
  write_lines(src_path, src);
  write_lines(tgt_path, tgt);
}

std::vector<TokenizedPair> tokenize_pairs(const Vocabulary& vocab,
                                          const std::vector<ParallelExample>& examples,
                                          std::size_t max_len) {
  std::vector<TokenizedPair> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({encode(vocab, ex.source, max_len).ids,
                   encode(vocab, ex.target, max_len).ids});
  }
  return out;
}

std::vector<Batch> make_batches(const std::vector<TokenizedPair>& examples,
                                std::size_t batch_size, TokenId pad_id,
                                std::size_t max_len,
                                std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw ContractError("make_batches: batch_size must be >= 1");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (ex.source.size() > max_len || ex.target.size() > max_len) {
      throw ContractError("make_batches: example " + std::to_string(i) +
                          " exceeds max_len " + std::to_string(max_len));
    }
    if (ex.source.empty() || ex.target.size() < 2) {
      throw ContractError("make_batches: example " + std::to_string(i) +
                          " is not framed by bos/eos");
    }
  }

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(order);
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    const std::size_t rows = end - start;
    std::size_t ls = 0, lt = 0;
    for (std::size_t i = start; i < end; ++i) {
      ls = std::max(ls, examples[order[i]].source.size());
      lt = std::max(lt, examples[order[i]].target.size() - 1);
    }
    Batch b;
    b.source_ids = IdGrid(rows, ls, pad_id);
    b.source_pad_mask = MaskGrid(rows, ls, 0);
    b.target_in_ids = IdGrid(rows, lt, pad_id);
    b.target_out_ids = IdGrid(rows, lt, pad_id);
    b.target_pad_mask = MaskGrid(rows, lt, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& ex = examples[order[start + r]];
      for (std::size_t c = 0; c < ex.source.size(); ++c) {
        b.source_ids(r, c) = ex.source[c];
        b.source_pad_mask(r, c) = 1;
      }
      for (std::size_t c = 0; c + 1 < ex.target.size(); ++c) {
        b.target_in_ids(r, c) = ex.target[c];
        b.target_out_ids(r, c) = ex.target[c + 1];
        b.target_pad_mask(r, c) = 1;
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace sentsimp
