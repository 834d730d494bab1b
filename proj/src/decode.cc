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

#include "sentsimp/decode.h"

#include <algorithm>
#include <cmath>

#include "sentsimp/error.h"

namespace sentsimp {

std::string_view to_string(DecodeStrategy s) {
  return s == DecodeStrategy::kGreedy ? "greedy" : "beam";
}

DecodeStrategy parse_strategy(std::string_view s) {
  if (s == "greedy") return DecodeStrategy::kGreedy;
  if (s == "beam") return DecodeStrategy::kBeam;
  throw ContractError("unknown decode strategy '" + std::string(s) + "'");
}

void DecodeConfig::validate() const {
  if (beam_width < 1) throw ContractError("decode: beam_width must be >= 1");
  if (max_len < 3) throw ContractError("decode: max_len must be >= 3");
}

std::size_t argmax(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double x : logits) total += std::exp(x - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

Hypothesis greedy_search(const NextTokenFn& next, TokenId bos, TokenId eos,
                         std::size_t max_len) {
  Hypothesis h{{bos}, 0.0, false};
  while (h.ids.size() < max_len) {
    const auto logits = next({h.ids}).at(0);
    const auto t = static_cast<TokenId>(argmax(logits));
    h.log_prob += log_softmax(logits)[static_cast<std::size_t>(t)];
    h.ids.push_back(t);
    if (t == eos) {
      h.finished = true;
      break;
    }
  }
  return h;
}

namespace {

struct Candidate {
  double score;
  double logit;
  std::size_t beam;
  TokenId token;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.logit != b.logit) return a.logit > b.logit;
  if (a.beam != b.beam) return a.beam < b.beam;
  return a.token < b.token;
}

double final_score(const Hypothesis& h, double length_penalty) {
  if (length_penalty == 0.0) return h.log_prob;
  const double len = static_cast<double>(h.ids.size() - 1);
  return h.log_prob / std::pow(len, length_penalty);
}

}  // namespace

Hypothesis beam_search(const NextTokenFn& next, TokenId bos, TokenId eos,
                       const DecodeConfig& cfg) {
  cfg.validate();
  std::vector<Hypothesis> alive{{{bos}, 0.0, false}};
  std::vector<Hypothesis> retired;
  Hypothesis anchor{{bos}, 0.0, false};  // the greedy path

  std::size_t length = 1;
  while (length < cfg.max_len && (!alive.empty() || !anchor.finished)) {
    std::vector<std::vector<TokenId>> prefixes;
    prefixes.reserve(alive.size() + 1);
    for (const auto& h : alive) prefixes.push_back(h.ids);
    std::size_t anchor_row = prefixes.size();
    if (!anchor.finished) {
      auto it = std::find(prefixes.begin(), prefixes.end(), anchor.ids);
      anchor_row = static_cast<std::size_t>(it - prefixes.begin());
      if (it == prefixes.end()) prefixes.push_back(anchor.ids);
    }
    const auto logits = next(prefixes);

    std::vector<Candidate> candidates;
    std::vector<std::vector<double>> logps(prefixes.size());
    for (std::size_t row = 0; row < prefixes.size(); ++row) logps[row] = log_softmax(logits[row]);
    for (std::size_t b = 0; b < alive.size(); ++b) {
      for (std::size_t t = 0; t < logits[b].size(); ++t) {
        candidates.push_back({alive[b].log_prob + logps[b][t], logits[b][t], b,
                              static_cast<TokenId>(t)});
      }
    }
    const std::size_t keep = std::min(cfg.beam_width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);

    std::vector<Hypothesis> next_alive;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = candidates[i];
      Hypothesis h = alive[c.beam];
      h.ids.push_back(c.token);
      h.log_prob = c.score;
      if (c.token == eos) {
        h.finished = true;
        retired.push_back(std::move(h));
      } else {
        next_alive.push_back(std::move(h));
      }
    }
    alive = std::move(next_alive);

    if (!anchor.finished) {
      const auto t = static_cast<TokenId>(argmax(logits[anchor_row]));
      anchor.log_prob += logps[anchor_row][static_cast<std::size_t>(t)];
      anchor.ids.push_back(t);
      anchor.finished = t == eos;
    }
    ++length;

    // Without a length penalty scores only fall, so nothing still open can
    // overtake the best retired hypothesis.
    if (cfg.length_penalty == 0.0 && !retired.empty()) {
      double best_open = -INFINITY;
      for (const auto& h : alive) best_open = std::max(best_open, h.log_prob);
      if (!anchor.finished) best_open = std::max(best_open, anchor.log_prob);
      double best_done = -INFINITY;
      for (const auto& h : retired) best_done = std::max(best_done, h.log_prob);
      if (anchor.finished) best_done = std::max(best_done, anchor.log_prob);
      if (best_done >= best_open) break;
    }
  }

  std::vector<const Hypothesis*> pool;
  for (const auto& h : retired) pool.push_back(&h);
  if (retired.empty() || length >= cfg.max_len) {
    for (const auto& h : alive) pool.push_back(&h);
  }
  if (anchor.finished || length >= cfg.max_len) pool.push_back(&anchor);

  const Hypothesis* best = pool.front();
  for (const Hypothesis* h : pool) {
    if (final_score(*h, cfg.length_penalty) > final_score(*best, cfg.length_penalty)) best = h;
  }
  return *best;
}

double sequence_log_prob(const NextTokenFn& next, const std::vector<TokenId>& ids) {
  double total = 0.0;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    std::vector<TokenId> prefix(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(i));
    total += log_softmax(next({prefix}).at(0)).at(static_cast<std::size_t>(ids[i]));
  }
  return total;
}

// ---------------------------------------------------------------------------

SourceScorer::SourceScorer(const Model& model, const Vocabulary& vocab, std::string_view source)
    : model_(model) {
  const auto seq = encode(vocab, source, model.config().max_len);
  IdGrid ids(1, seq.ids.size(), vocab.pad_id());
  ids.values = seq.ids;
  source_mask_ = MaskGrid(1, seq.ids.size(), 1);
  NoGradGuard no_grad;
  memory_ = encode_source(model, ids, source_mask_);
}

std::vector<std::vector<double>> SourceScorer::operator()(
    const std::vector<std::vector<TokenId>>& prefixes) const {
  if (prefixes.empty()) return {};
  const std::size_t rows = prefixes.size();
  const std::size_t len = prefixes.front().size();
  IdGrid ids(rows, len, kPadId);
  for (std::size_t r = 0; r < rows; ++r) {
    if (prefixes[r].size() != len) throw ContractError("SourceScorer: prefixes differ in length");
    std::copy(prefixes[r].begin(), prefixes[r].end(), ids.values.begin() + static_cast<std::ptrdiff_t>(r * len));
  }
  NoGradGuard no_grad;
  // Memory has batch 1 and broadcasts across the prefixes.
  Tensor hidden = decode_target(model_, memory_, source_mask_, ids, MaskGrid(rows, len, 1));
  const std::size_t d = model_.config().d_model;
  std::vector<double> last(rows * d);
  const auto hd = hidden.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(hd.data() + (r * len + len - 1) * d, d, last.data() + r * d);
  }
  Tensor logits = project_logits(model_, Tensor::from_data({rows, d}, std::move(last)));
  const std::size_t vocab = model_.config().vocab_size;
  const auto ld = logits.data();
  std::vector<std::vector<double>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r].assign(ld.begin() + static_cast<std::ptrdiff_t>(r * vocab),
                  ld.begin() + static_cast<std::ptrdiff_t>((r + 1) * vocab));
  }
  return out;
}

namespace {

std::size_t effective_max_len(const Model& model, const DecodeConfig& cfg) {
  cfg.validate();
  return std::min(cfg.max_len, model.config().max_len);
}

}  // namespace

std::string greedy_decode(const Model& model, const Vocabulary& vocab, std::string_view source,
                          const DecodeConfig& cfg) {
  const SourceScorer scorer(model, vocab, source);
  const auto h = greedy_search(scorer.as_fn(), vocab.bos_id(), vocab.eos_id(),
                               effective_max_len(model, cfg));
  return decode(vocab, h.ids);
}

std::string beam_decode(const Model& model, const Vocabulary& vocab, std::string_view source,
                        const DecodeConfig& cfg) {
  DecodeConfig capped = cfg;
  capped.max_len = effective_max_len(model, cfg);
  const SourceScorer scorer(model, vocab, source);
  const auto h = beam_search(scorer.as_fn(), vocab.bos_id(), vocab.eos_id(), capped);
  return decode(vocab, h.ids);
}

std::string simplify(const Model& model, const Vocabulary& vocab, std::string_view source,
                     const DecodeConfig& cfg) {
  return cfg.strategy == DecodeStrategy::kBeam ? beam_decode(model, vocab, source, cfg)
                                               : greedy_decode(model, vocab, source, cfg);
}

}  // namespace sentsimp
