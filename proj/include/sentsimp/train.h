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

#ifndef SENTSIMP_TRAIN_H_
#define SENTSIMP_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentsimp/corpus.h"
#include "sentsimp/decode.h"
#include "sentsimp/model.h"
#include "sentsimp/tokenizer.h"

namespace sentsimp {

struct TrainConfig {
  double base_lr = 1e-4;
  double max_lr = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double warmup_fraction = 0.1;
  double final_lr = 1e-6;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  // Epochs without a validation improvement before stopping; nullopt never
  // stops early.
  std::optional<std::size_t> patience = 3;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// One-cycle schedule: linear warmup from base_lr at step 0 to max_lr at step
// floor(warmup_fraction * total_steps), then cosine decay to final_lr at
// the last step. Requires total_steps >= 2 and step < total_steps.
double onecycle_lr(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

// Adam moments per parameter, mirroring the parameter shapes.
struct OptState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

OptState make_opt_state(std::span<const NamedParameter> params);

// One decoupled-weight-decay Adam update using each tensor's gradient
// (missing gradients count as zero) multiplied by grad_scale. Layer-norm
// parameters are not decayed.
void adamw_step(std::span<const NamedParameter> params, OptState& state, double lr,
                const TrainConfig& cfg, double grad_scale = 1.0);

// sqrt of the summed squared gradients over all parameters.
double global_grad_norm(std::span<const NamedParameter> params);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_sari = 0.0;
  double lr = 0.0;  // rate used by the epoch's last step

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch
  bool stopped_early = false;

  // Header "epoch\tloss\tsari\tlr", one row per epoch.
  std::string to_tsv() const;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// Tells a checkpoint which vocabulary its embedding rows index.
struct VocabRef {
  std::string path;  // relative to the checkpoint's directory
  std::size_t size = 0;
  std::uint64_t fingerprint = 0;

  friend bool operator==(const VocabRef&, const VocabRef&) = default;
};

struct Checkpoint {
  Model model;
  VocabRef vocab;
  TrainHistory history;
};

// Validation score (corpus SARI) of the model after `epoch` (1-based).
using Validator = std::function<double(const Model& model, std::size_t epoch)>;

// Greedy-decodes every validation source and returns corpus SARI.
Validator make_sari_validator(const Vocabulary& vocab, std::vector<EvalExample> valid,
                              DecodeConfig decode = {});

using EpochLogger = std::function<void(const EpochRecord&)>;

// Teacher-forced training with AdamW and the one-cycle schedule. Each epoch
// reshuffles the batches with seed + epoch, validates at its end, and keeps a
// copy of the parameters from the best-scoring epoch. Returns those
// parameters. Throws NumericError naming the epoch and batch when the loss
// or gradient stops being finite.
Checkpoint train_loop(Model model, const Vocabulary& vocab,
                      const std::vector<TokenizedPair>& train, const Validator& validator,
                      const TrainConfig& cfg, const EpochLogger& log = {});

// Binary layout: "SSCK", u32 version, u64 length + key=value config text
// (model config, vocabulary reference, history), u32 record count, then per
// parameter: u32 name length, name, u32 rank, u64 dims, f64 payload. All
// integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// Throws FormatError on bad magic, version or a truncated file.
Checkpoint load_checkpoint(const std::string& path);

// Loads the checkpoint's vocabulary (or `override_path`) and checks that it
// is the one the checkpoint was trained with.
Vocabulary load_checkpoint_vocab(const Checkpoint& ckpt, const std::string& checkpoint_path,
                                 const std::string& override_path = {});

}  // namespace sentsimp

#endif  // SENTSIMP_TRAIN_H_
