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

#include "sentsimp/tokenizer.h"

#include <algorithm>
#include <fstream>
#include <map>

#include "sentsimp/error.h"
#include "sentsimp/text.h"

namespace sentsimp {
namespace {

std::vector<std::string> special_tokens() {
  return {std::string(kPadToken), std::string(kBosToken),
          std::string(kEosToken), std::string(kUnkToken)};
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : id_to_token_(special_tokens()) {
  id_to_token_.reserve(kNumSpecials + tokens.size());
  for (auto& t : tokens) id_to_token_.push_back(std::move(t));
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    const auto& t = id_to_token_[i];
    if (t.empty()) throw FormatError("vocabulary entry " + std::to_string(i) + " is empty");
    auto [it, inserted] = token_to_id_.emplace(t, static_cast<TokenId>(i));
    if (!inserted) {
      throw FormatError("duplicate vocabulary token '" + t + "' at id " +
                        std::to_string(i));
    }
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw ContractError("token id " + std::to_string(id) +
                        " out of range for vocabulary of size " +
                        std::to_string(size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : id_to_token_) {
    for (char c : t) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  return h;
}

void Vocabulary::save(const std::string& path) const { write_lines(path, id_to_token_); }

Vocabulary Vocabulary::load(const std::string& path) {
  auto lines = read_lines(path);
  const auto specials = special_tokens();
  if (lines.size() < kNumSpecials ||
      !std::equal(specials.begin(), specials.end(), lines.begin())) {
    throw FormatError(path + ": vocabulary must start with <pad>, <s>, </s>, <unk>");
  }
  return Vocabulary(std::vector<std::string>(lines.begin() + kNumSpecials, lines.end()));
}

Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_size,
                       std::size_t min_freq) {
  if (max_size < kNumSpecials + 1) {
    throw ContractError("vocabulary max_size must be at least 5");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus) {
    for (auto& tok : split_lower(line)) ++counts[std::move(tok)];
  }
  for (const auto& s : special_tokens()) counts.erase(s);

  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq) ranked.emplace_back(tok, n);
  }
  // counts is already bytewise ordered, so a stable sort on frequency keeps
  // the lexicographic tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kNumSpecials);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return Vocabulary(std::move(tokens));
}

TokenSequence encode(const Vocabulary& vocab, std::string_view text,
                     std::size_t max_len) {
  if (max_len < 3) throw ContractError("encode: max_len must be at least 3");
  const auto words = split_lower(text);
  TokenSequence seq;
  const std::size_t room = max_len - 2;
  const std::size_t n = std::min(words.size(), room);
  seq.truncated = words.size() > room;
  seq.ids.reserve(n + 2);
  seq.ids.push_back(vocab.bos_id());
  for (std::size_t i = 0; i < n; ++i) seq.ids.push_back(vocab.id(words[i]));
  seq.ids.push_back(vocab.eos_id());
  return seq;
}

std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
  for (TokenId id : ids) vocab.token(id);  // range check, even past eos
  std::string out;
  for (TokenId id : ids) {
    const auto& tok = vocab.token(id);
    if (id == vocab.eos_id()) break;
    if (static_cast<std::size_t>(id) < kNumSpecials) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(tok);
  }
  return out;
}

}  // namespace sentsimp
