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

#ifndef SENTSIMP_MODEL_H_
#define SENTSIMP_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentsimp/corpus.h"
#include "sentsimp/rng.h"
#include "sentsimp/tensor.h"

namespace sentsimp {

// Vocabulary sizes of the pretrained checkpoints the variants are named after.
inline constexpr std::size_t kBertVocabSize = 30522;
inline constexpr std::size_t kGpt2VocabSize = 50257;
inline constexpr std::size_t kMaxTokens = 80;

enum class Masking { kBidirectional, kCausal };
enum class Activation { kGelu };
enum class Scale { kPaper, kToy };

std::string_view to_string(Masking m);
std::string_view to_string(Scale s);
Masking parse_masking(std::string_view s);
Scale parse_scale(std::string_view s);

// Encoder/decoder pairing. The decoder is always causal self-attention plus
// cross-attention; only the encoder's masking follows its family.
struct VariantSpec {
  std::string name;  // bert, gpt2, bert+gpt2, gpt2+bert
  Masking encoder_masking;
  std::size_t encoder_vocab_size;
  std::size_t decoder_vocab_size;
};

// All four, in the order bert, gpt2, bert+gpt2, gpt2+bert.
std::span<const VariantSpec> all_variants();
// Throws ContractError for an unknown name.
const VariantSpec& variant_spec(std::string_view name);

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 2;
  std::size_t n_layers = 2;
  std::size_t d_ff = 128;
  std::size_t vocab_size = 0;
  std::size_t max_len = kMaxTokens;
  Masking encoder_masking = Masking::kBidirectional;
  Activation activation = Activation::kGelu;
  double dropout_rate = 0.0;

  // Throws ContractError if any invariant fails.
  void validate() const;

  // Flat key=value lines, round-trippable through from_text.
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Scale::kPaper: 768 wide, 12 heads, 12 layers, 3072 feed-forward, dropout 0.1,
// vocabulary preset from the variant (the larger of the two sides for mixed
// pairings). Toy scale: 64 wide, 2 heads, 2 layers, 128 feed-forward, no
// dropout, vocabulary `corpus_vocab_size`. Both cap sequences at 80 tokens.
ModelConfig variant_config(std::string_view name, Scale scale,
                           std::size_t corpus_vocab_size = 0);

struct ParameterInfo {
  std::string name;
  Shape shape;
  bool is_norm = false;  // layer-norm gain or bias
};

// Every parameter the config instantiates, in canonical order. Cheap; does
// not allocate the tensors.
std::vector<ParameterInfo> parameter_layout(const ModelConfig& config);

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FeedForwardWeights {
  Tensor w1, b1, w2, b2;
};

struct NormWeights {
  Tensor gain, bias;
};

struct EncoderLayer {
  AttentionWeights self_attn;
  NormWeights norm1;
  FeedForwardWeights ffn;
  NormWeights norm2;
};

struct DecoderLayer {
  AttentionWeights self_attn;
  NormWeights norm1;
  AttentionWeights cross_attn;
  NormWeights norm2;
  FeedForwardWeights ffn;
  NormWeights norm3;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
  bool is_norm = false;
};

// Post-layer-norm encoder-decoder transformer with learned positions and an
// untied output projection.
class Model {
 public:
  // Zero-filled parameters; see init_model for the trained starting point.
  explicit Model(ModelConfig config);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // Deep copy with its own parameter storage.
  Model clone() const;

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  // Throws ContractError if `name` is unknown.
  Tensor parameter(std::string_view name) const;

  void zero_grad();

  Tensor src_embedding, src_positions;
  Tensor tgt_embedding, tgt_positions;
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  Tensor out_weight, out_bias;

 private:
  ModelConfig config_;
  std::vector<NamedParameter> params_;
};

// Weights ~ N(0, 0.02^2) from Rng(seed) in parameter_layout order; biases
// zero; layer-norm gains one.
Model init_model(const ModelConfig& config, std::uint64_t seed);

// Self-attention keep-mask [B, 1, L, L] from a [B, L] key pad mask.
Mask self_attention_mask(const MaskGrid& key_mask, Masking masking);
// Cross-attention keep-mask [B, 1, Lq, Lk]: every query sees unpadded keys.
Mask cross_attention_mask(const MaskGrid& key_mask, std::size_t query_len);

// softmax(q k^T / sqrt(d_h), mask) v for q,k,v [B, h, L, d_h].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask& mask);

// Per-call mode. Dropout runs only in train mode and then needs `rng` when
// the config's dropout rate is positive.
struct ForwardMode {
  bool train = false;
  Rng* rng = nullptr;
};

// Encoder output [B, Ls, d].
Tensor encode_source(const Model& model, const IdGrid& source_ids,
                     const MaskGrid& source_mask, ForwardMode mode = {});

// Decoder hidden states [B, Lt, d].
Tensor decode_target(const Model& model, const Tensor& memory,
                     const MaskGrid& source_mask, const IdGrid& target_ids,
                     const MaskGrid& target_mask, ForwardMode mode = {});

// [.., d] -> [.., V].
Tensor project_logits(const Model& model, const Tensor& hidden);

// Full teacher-forced pass: logits [B, Lt, V].
Tensor forward(const Model& model, const Batch& batch, ForwardMode mode = {});

}  // namespace sentsimp

#endif  // SENTSIMP_MODEL_H_
