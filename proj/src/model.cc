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

#include "sentsimp/model.h"

#include <charconv>
#include <cmath>
#include <sstream>

#include "sentsimp/error.h"
#include "sentsimp/text.h"
#include "sentsimp/tokenizer.h"

namespace sentsimp {
namespace {

const std::vector<VariantSpec>& variant_table() {
  static const std::vector<VariantSpec> table = {
      {"bert", Masking::kBidirectional, kBertVocabSize, kBertVocabSize},
      {"gpt2", Masking::kCausal, kGpt2VocabSize, kGpt2VocabSize},
      {"bert+gpt2", Masking::kBidirectional, kBertVocabSize, kGpt2VocabSize},
      {"gpt2+bert", Masking::kCausal, kGpt2VocabSize, kBertVocabSize},
  };
  return table;
}

void add_attention(std::vector<ParameterInfo>& out, const std::string& prefix,
                   std::size_t d) {
  for (const char* p : {"q", "k", "v", "o"}) {
    out.push_back({prefix + ".w" + p, {d, d}, false});
    out.push_back({prefix + ".b" + p, {d}, false});
  }
}

void add_norm(std::vector<ParameterInfo>& out, const std::string& prefix, std::size_t d) {
  out.push_back({prefix + ".gain", {d}, true});
  out.push_back({prefix + ".bias", {d}, true});
}

void add_ffn(std::vector<ParameterInfo>& out, const std::string& prefix, std::size_t d,
             std::size_t d_ff) {
  out.push_back({prefix + ".w1", {d, d_ff}, false});
  out.push_back({prefix + ".b1", {d_ff}, false});
  out.push_back({prefix + ".w2", {d_ff, d}, false});
  out.push_back({prefix + ".b2", {d}, false});
}

bool is_bias_name(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot != std::string::npos && name.size() > dot + 1 && name[dot + 1] == 'b';
}

std::size_t parse_size(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw FormatError("model config: bad integer for " + std::string(key) + ": '" +
                      std::string(value) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw FormatError("model config: bad number for " + std::string(key) + ": '" +
                      std::string(value) + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(Masking m) {
  return m == Masking::kBidirectional ? "bidirectional" : "causal";
}

std::string_view to_string(Scale s) { return s == Scale::kPaper ? "paper" : "toy"; }

Masking parse_masking(std::string_view s) {
  if (s == "bidirectional") return Masking::kBidirectional;
  if (s == "causal") return Masking::kCausal;
  throw FormatError("unknown masking '" + std::string(s) + "'");
}

Scale parse_scale(std::string_view s) {
  if (s == "paper") return Scale::kPaper;
  if (s == "toy") return Scale::kToy;
  throw ContractError("unknown scale '" + std::string(s) + "' (expected paper or toy)");
}

std::span<const VariantSpec> all_variants() { return variant_table(); }

const VariantSpec& variant_spec(std::string_view name) {
  for (const auto& v : variant_table()) {
    if (v.name == name) return v;
  }
  throw ContractError("unknown variant '" + std::string(name) +
                      "' (expected bert, gpt2, bert+gpt2 or gpt2+bert)");
}

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ContractError("model config: d_model " + std::to_string(d_model) +
                        " must be a positive multiple of n_heads " + std::to_string(n_heads));
  }
  if (n_layers == 0 || d_ff == 0) throw ContractError("model config: n_layers and d_ff must be positive");
  if (vocab_size < kNumSpecials + 1) {
    throw ContractError("model config: vocab_size " + std::to_string(vocab_size) + " too small");
  }
  if (max_len < 3) throw ContractError("model config: max_len must be at least 3");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ContractError("model config: dropout_rate must be in [0, 1)");
  }
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "d_model=" << d_model << '\n'
      << "n_heads=" << n_heads << '\n'
      << "n_layers=" << n_layers << '\n'
      << "d_ff=" << d_ff << '\n'
      << "vocab_size=" << vocab_size << '\n'
      << "max_len=" << max_len << '\n'
      << "encoder_masking=" << to_string(encoder_masking) << '\n'
      << "activation=gelu\n"
      << "dropout_rate=" << format_double(dropout_rate) << '\n';
  return out.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig cfg;
  std::size_t seen = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw FormatError("model config: malformed line '" + line + "'");
    const auto key = t.substr(0, eq);
    const auto value = t.substr(eq + 1);
    ++seen;
    if (key == "d_model") cfg.d_model = parse_size(key, value);
    else if (key == "n_heads") cfg.n_heads = parse_size(key, value);
    else if (key == "n_layers") cfg.n_layers = parse_size(key, value);
    else if (key == "d_ff") cfg.d_ff = parse_size(key, value);
    else if (key == "vocab_size") cfg.vocab_size = parse_size(key, value);
    else if (key == "max_len") cfg.max_len = parse_size(key, value);
    else if (key == "encoder_masking") cfg.encoder_masking = parse_masking(value);
    else if (key == "dropout_rate") cfg.dropout_rate = parse_double(key, value);
    else if (key == "activation") {
      if (value != "gelu") throw FormatError("model config: unsupported activation '" + std::string(value) + "'");
    } else {
      --seen;
    }
  }
  if (seen < 9) throw FormatError("model config: missing keys");
  cfg.validate();
  return cfg;
}

ModelConfig variant_config(std::string_view name, Scale scale, std::size_t corpus_vocab_size) {
  const VariantSpec& spec = variant_spec(name);
  ModelConfig cfg;
  cfg.encoder_masking = spec.encoder_masking;
  cfg.max_len = kMaxTokens;
  cfg.activation = Activation::kGelu;
  if (scale == Scale::kPaper) {
    cfg.d_model = 768;
    cfg.n_heads = 12;
    cfg.n_layers = 12;
    cfg.d_ff = 3072;
    cfg.dropout_rate = 0.1;
    cfg.vocab_size = std::max(spec.encoder_vocab_size, spec.decoder_vocab_size);
  } else {
    cfg.d_model = 64;
    cfg.n_heads = 2;
    cfg.n_layers = 2;
    cfg.d_ff = 128;
    cfg.dropout_rate = 0.0;
    cfg.vocab_size = corpus_vocab_size;
  }
  return cfg;
}

std::vector<ParameterInfo> parameter_layout(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.d_model;
  std::vector<ParameterInfo> out;
  out.push_back({"encoder.embedding", {config.vocab_size, d}, false});
  out.push_back({"encoder.positions", {config.max_len, d}, false});
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    const std::string p = "encoder.layers." + std::to_string(i);
    add_attention(out, p + ".self_attn", d);
    add_norm(out, p + ".norm1", d);
    add_ffn(out, p + ".ffn", d, config.d_ff);
    add_norm(out, p + ".norm2", d);
  }
  out.push_back({"decoder.embedding", {config.vocab_size, d}, false});
  out.push_back({"decoder.positions", {config.max_len, d}, false});
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    const std::string p = "decoder.layers." + std::to_string(i);
    add_attention(out, p + ".self_attn", d);
    add_norm(out, p + ".norm1", d);
    add_attention(out, p + ".cross_attn", d);
    add_norm(out, p + ".norm2", d);
    add_ffn(out, p + ".ffn", d, config.d_ff);
    add_norm(out, p + ".norm3", d);
  }
  out.push_back({"output.weight", {d, config.vocab_size}, false});
  out.push_back({"output.bias", {config.vocab_size}, false});
  return out;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(ModelConfig config) : config_(std::move(config)) {
  for (auto& info : parameter_layout(config_)) {
    params_.push_back({info.name, Tensor::zeros(info.shape, true), info.is_norm});
  }
  auto get = [this](const std::string& name) { return parameter(name); };
  auto attn = [&](const std::string& p) {
    return AttentionWeights{get(p + ".wq"), get(p + ".bq"), get(p + ".wk"), get(p + ".bk"),
                            get(p + ".wv"), get(p + ".bv"), get(p + ".wo"), get(p + ".bo")};
  };
  auto norm = [&](const std::string& p) { return NormWeights{get(p + ".gain"), get(p + ".bias")}; };
  auto ffn = [&](const std::string& p) {
    return FeedForwardWeights{get(p + ".w1"), get(p + ".b1"), get(p + ".w2"), get(p + ".b2")};
  };
  src_embedding = get("encoder.embedding");
  src_positions = get("encoder.positions");
  tgt_embedding = get("decoder.embedding");
  tgt_positions = get("decoder.positions");
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    const std::string e = "encoder.layers." + std::to_string(i);
    encoder.push_back({attn(e + ".self_attn"), norm(e + ".norm1"), ffn(e + ".ffn"), norm(e + ".norm2")});
    const std::string d = "decoder.layers." + std::to_string(i);
    decoder.push_back({attn(d + ".self_attn"), norm(d + ".norm1"), attn(d + ".cross_attn"),
                       norm(d + ".norm2"), ffn(d + ".ffn"), norm(d + ".norm3")});
  }
  out_weight = get("output.weight");
  out_bias = get("output.bias");
}

Model Model::clone() const {
  Model copy(config_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto src = params_[i].tensor.data();
    auto dst = copy.params_[i].tensor.mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return copy;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

Tensor Model::parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("model has no parameter named '" + std::string(name) + "'");
}

void Model::zero_grad() {
  for (auto& p : params_) p.tensor.clear_grad();
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  Model model(config);
  Rng rng(seed);
  for (const auto& p : model.parameters()) {
    Tensor t = p.tensor;
    auto data = t.mutable_data();
    if (p.is_norm) {
      const bool gain = p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, ".gain") == 0;
      std::fill(data.begin(), data.end(), gain ? 1.0 : 0.0);
    } else if (is_bias_name(p.name)) {
      std::fill(data.begin(), data.end(), 0.0);
    } else {
      for (double& v : data) v = 0.02 * rng.normal();
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Forward pass

Mask self_attention_mask(const MaskGrid& key_mask, Masking masking) {
  const std::size_t B = key_mask.rows, L = key_mask.cols;
  Mask m{{B, 1, L, L}, std::vector<std::uint8_t>(B * L * L, 0)};
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) {
        const bool visible = masking == Masking::kBidirectional || j <= i;
        m.keep[(b * L + i) * L + j] = (visible && key_mask(b, j)) ? 1 : 0;
      }
    }
  }
  return m;
}

Mask cross_attention_mask(const MaskGrid& key_mask, std::size_t query_len) {
  const std::size_t B = key_mask.rows, Lk = key_mask.cols;
  Mask m{{B, 1, query_len, Lk}, std::vector<std::uint8_t>(B * query_len * Lk, 0)};
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < query_len; ++i) {
      for (std::size_t j = 0; j < Lk; ++j) m.keep[(b * query_len + i) * Lk + j] = key_mask(b, j);
    }
  }
  return m;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask& mask) {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.shape().back()));
  Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt);
  return matmul(masked_softmax(scores, mask), v);
}

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

Tensor maybe_dropout(const Tensor& x, const ModelConfig& cfg, ForwardMode mode) {
  if (!mode.train || cfg.dropout_rate == 0.0) return x;
  if (mode.rng == nullptr) throw ContractError("forward: train mode with dropout needs an Rng");
  return dropout(x, cfg.dropout_rate, *mode.rng);
}

Tensor multi_head(const AttentionWeights& w, const Tensor& query_in, const Tensor& kv_in,
                  const Mask& mask, std::size_t heads) {
  Tensor q = split_heads(linear(query_in, w.wq, w.bq), heads);
  Tensor k = split_heads(linear(kv_in, w.wk, w.bk), heads);
  Tensor v = split_heads(linear(kv_in, w.wv, w.bv), heads);
  return linear(merge_heads(attention(q, k, v, mask)), w.wo, w.bo);
}

Tensor feed_forward(const FeedForwardWeights& w, const Tensor& x) {
  return linear(gelu(linear(x, w.w1, w.b1)), w.w2, w.b2);
}

Tensor residual_norm(const Tensor& x, const Tensor& sub, const NormWeights& n,
                     const ModelConfig& cfg, ForwardMode mode) {
  return layer_norm(add(x, maybe_dropout(sub, cfg, mode)), n.gain, n.bias);
}

Tensor embed(const Tensor& table, const Tensor& positions, const IdGrid& ids,
             const ModelConfig& cfg, ForwardMode mode) {
  if (ids.cols > cfg.max_len) {
    throw ContractError("forward: sequence length " + std::to_string(ids.cols) +
                        " exceeds max_len " + std::to_string(cfg.max_len));
  }
  std::vector<TokenId> pos(ids.rows * ids.cols);
  for (std::size_t r = 0; r < ids.rows; ++r) {
    for (std::size_t c = 0; c < ids.cols; ++c) pos[r * ids.cols + c] = static_cast<TokenId>(c);
  }
  const Shape shape{ids.rows, ids.cols};
  Tensor x = add(embedding(table, ids.values, shape), embedding(positions, pos, shape));
  return maybe_dropout(x, cfg, mode);
}

}  // namespace

Tensor encode_source(const Model& model, const IdGrid& source_ids, const MaskGrid& source_mask,
                     ForwardMode mode) {
  const auto& cfg = model.config();
  Tensor x = embed(model.src_embedding, model.src_positions, source_ids, cfg, mode);
  const Mask mask = self_attention_mask(source_mask, cfg.encoder_masking);
  for (const auto& layer : model.encoder) {
    x = residual_norm(x, multi_head(layer.self_attn, x, x, mask, cfg.n_heads), layer.norm1, cfg, mode);
    x = residual_norm(x, feed_forward(layer.ffn, x), layer.norm2, cfg, mode);
  }
  return x;
}

Tensor decode_target(const Model& model, const Tensor& memory, const MaskGrid& source_mask,
                     const IdGrid& target_ids, const MaskGrid& target_mask, ForwardMode mode) {
  const auto& cfg = model.config();
  Tensor x = embed(model.tgt_embedding, model.tgt_positions, target_ids, cfg, mode);
  const Mask self_mask = self_attention_mask(target_mask, Masking::kCausal);
  const Mask cross_mask = cross_attention_mask(source_mask, target_ids.cols);
  for (const auto& layer : model.decoder) {
    x = residual_norm(x, multi_head(layer.self_attn, x, x, self_mask, cfg.n_heads), layer.norm1, cfg, mode);
    x = residual_norm(x, multi_head(layer.cross_attn, x, memory, cross_mask, cfg.n_heads), layer.norm2,
                      cfg, mode);
    x = residual_norm(x, feed_forward(layer.ffn, x), layer.norm3, cfg, mode);
  }
  return x;
}

Tensor project_logits(const Model& model, const Tensor& hidden) {
  return linear(hidden, model.out_weight, model.out_bias);
}

Tensor forward(const Model& model, const Batch& batch, ForwardMode mode) {
  Tensor memory = encode_source(model, batch.source_ids, batch.source_pad_mask, mode);
  Tensor hidden = decode_target(model, memory, batch.source_pad_mask, batch.target_in_ids,
                                batch.target_pad_mask, mode);
  return project_logits(model, hidden);
}

}  // namespace sentsimp
