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

#ifndef SENTSIMP_TOKENIZER_H_
#define SENTSIMP_TOKENIZER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sentsimp/types.h"

namespace sentsimp {

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr std::size_t kNumSpecials = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Word-level vocabulary over lowercased whitespace tokens. Ids 0-3 are the
// special tokens pad, bos, eos, unk in that order. Immutable once built.
class Vocabulary {
 public:
  // Specials only.
  Vocabulary();

  // `tokens` are the non-special entries in id order starting at id 4.
  // Throws FormatError on duplicates or on a token that spells a special.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return id_to_token_.size(); }
  TokenId pad_id() const { return kPadId; }
  TokenId bos_id() const { return kBosId; }
  TokenId eos_id() const { return kEosId; }
  TokenId unk_id() const { return kUnkId; }

  // unk_id() when absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  // Throws ContractError when id is out of range.
  const std::string& token(TokenId id) const;

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // FNV-1a over the token list; used to pair checkpoints with vocab files.
  std::uint64_t fingerprint() const;

  // One token per line, line number == id.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

// Tokens ranked by frequency (descending) then bytewise (ascending); tokens
// seen fewer than `min_freq` times are dropped; at most `max_size` entries
// including the four specials. Requires max_size >= 5.
Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_size,
                       std::size_t min_freq = 1);

struct TokenSequence {
  std::vector<TokenId> ids;
  bool truncated = false;
};

// [bos, tokens..., eos], content cut from the right to fit max_len (>= 3).
TokenSequence encode(const Vocabulary& vocab, std::string_view text,
                     std::size_t max_len);

// Drops specials, stops at the first eos, joins with single spaces.
std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids);

}  // namespace sentsimp

#endif  // SENTSIMP_TOKENIZER_H_
