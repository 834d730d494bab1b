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

#include "sentsimp/train.h"

#include <charconv>
#include <cmath>
#include <numbers>

#include "sentsimp/error.h"
#include "sentsimp/sari.h"

namespace sentsimp {
namespace {

std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(base_lr > 0.0 && base_lr <= max_lr)) {
    throw ContractError("train config: need 0 < base_lr <= max_lr");
  }
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
    throw ContractError("train config: warmup_fraction must be in (0, 1)");
  }
  if (!(final_lr >= 0.0) || !(final_lr <= max_lr)) {
    throw ContractError("train config: final_lr must be in [0, max_lr]");
  }
  if (patience && *patience < 1) throw ContractError("train config: patience must be >= 1");
  if (epochs < 1 || batch_size < 1) throw ContractError("train config: epochs and batch_size must be >= 1");
  if (weight_decay < 0.0 || clip_norm < 0.0) {
    throw ContractError("train config: weight_decay and clip_norm must be non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps_adam > 0.0)) {
    throw ContractError("train config: invalid Adam constants");
  }
}

double onecycle_lr(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps < 2) throw ContractError("onecycle_lr: total_steps must be >= 2");
  if (step >= total_steps) {
    throw ContractError("onecycle_lr: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(total_steps) + ")");
  }
  const auto peak = static_cast<std::size_t>(
      std::floor(cfg.warmup_fraction * static_cast<double>(total_steps)));
  if (step == peak) return cfg.max_lr;
  if (step < peak) {
    const double t = static_cast<double>(step) / static_cast<double>(peak);
    return cfg.base_lr + (cfg.max_lr - cfg.base_lr) * t;
  }
  const double progress =
      static_cast<double>(step - peak) / static_cast<double>(total_steps - 1 - peak);
  return cfg.final_lr +
         (cfg.max_lr - cfg.final_lr) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

OptState make_opt_state(std::span<const NamedParameter> params) {
  OptState state;
  for (const auto& p : params) {
    state.m.emplace_back(p.tensor.numel(), 0.0);
    state.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return state;
}

void adamw_step(std::span<const NamedParameter> params, OptState& state, double lr,
                const TrainConfig& cfg, double grad_scale) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adamw_step: optimizer state has " + std::to_string(state.m.size()) +
                        " slots for " + std::to_string(params.size()) + " parameters");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.numel() || v.size() != p.numel()) {
      throw ContractError("adamw_step: state shape mismatch for " + params[i].name);
    }
    const bool has = p.has_grad();
    const std::span<const double> g = has ? p.grad() : std::span<const double>{};
    const double decay = params[i].is_norm ? 0.0 : cfg.weight_decay;
    auto w = p.mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has ? g[j] * grad_scale : 0.0;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      const double m_hat = m[j] / correct1;
      const double v_hat = v[j] / correct2;
      w[j] = w[j] - lr * (m_hat / (std::sqrt(v_hat) + cfg.eps_adam)) - lr * decay * w[j];
    }
  }
}

double global_grad_norm(std::span<const NamedParameter> params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) total += g * g;
  }
  return std::sqrt(total);
}

std::string TrainHistory::to_tsv() const {
  std::string out = "epoch\tloss\tsari\tlr\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + '\t' + fmt_double(e.train_loss) + '\t' +
           fmt_double(e.valid_sari) + '\t' + fmt_double(e.lr) + '\n';
  }
  return out;
}

Validator make_sari_validator(const Vocabulary& vocab, std::vector<EvalExample> valid,
                              DecodeConfig decode) {
  if (valid.empty()) throw ContractError("validation set is empty");
  return [&vocab, valid = std::move(valid), decode](const Model& model, std::size_t) {
    std::vector<SariItem> items;
    items.reserve(valid.size());
    for (const auto& ex : valid) {
      items.push_back({ex.source, greedy_decode(model, vocab, ex.source, decode), ex.references});
    }
    return sari_corpus(items).corpus.sari;
  };
}

Checkpoint train_loop(Model model, const Vocabulary& vocab,
                      const std::vector<TokenizedPair>& train, const Validator& validator,
                      const TrainConfig& cfg, const EpochLogger& log) {
  cfg.validate();
  if (train.empty()) throw ContractError("train_loop: training set is empty");
  if (model.config().vocab_size < vocab.size()) {
    throw ContractError("train_loop: model vocabulary " + std::to_string(model.config().vocab_size) +
                        " smaller than tokenizer vocabulary " + std::to_string(vocab.size()));
  }
  const std::size_t per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = per_epoch * cfg.epochs;
  if (total_steps < 2) {
    throw ContractError("train_loop: schedule needs at least 2 optimizer steps, got " +
                        std::to_string(total_steps));
  }

  const auto& params = model.parameters();
  OptState opt = make_opt_state(params);
  Rng dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  const ForwardMode mode{true, &dropout_rng};

  Checkpoint result{Model(model.config()), {"", vocab.size(), vocab.fingerprint()}, {}};
  std::vector<std::vector<double>> best_params;
  double best_sari = -INFINITY;
  std::size_t stale = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = make_batches(train, cfg.batch_size, vocab.pad_id(),
                                      model.config().max_len, cfg.seed + epoch);
    double loss_total = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b, ++step) {
      lr = onecycle_lr(step, total_steps, cfg);
      double loss_value = 0.0;
      try {
        model.zero_grad();
        Tensor loss = cross_entropy(forward(model, batches[b], mode),
                                    batches[b].target_out_ids.values, vocab.pad_id());
        loss_value = loss.item();
        backward(loss);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           ": " + e.what());
      }
      const double norm = global_grad_norm(params);
      if (!std::isfinite(norm)) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           ": non-finite gradient norm");
      }
      const double clip =
          (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;
      adamw_step(params, opt, lr, cfg, clip);
      loss_total += loss_value;
    }
    model.zero_grad();

    EpochRecord record{epoch, loss_total / static_cast<double>(batches.size()),
                       validator(model, epoch), lr};
    result.history.epochs.push_back(record);
    if (log) log(record);

    if (record.valid_sari > best_sari) {
      best_sari = record.valid_sari;
      result.history.best_epoch = epoch;
      stale = 0;
      best_params.clear();
      for (const auto& p : params) best_params.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    } else if (++stale >= cfg.patience.value_or(SIZE_MAX)) {
      result.history.stopped_early = epoch < cfg.epochs;
      break;
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor dst = result.model.parameters()[i].tensor;
    std::copy(best_params[i].begin(), best_params[i].end(), dst.mutable_data().begin());
  }
  return result;
}

}  // namespace sentsimp
