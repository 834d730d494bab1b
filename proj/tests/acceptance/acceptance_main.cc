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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sari_oracle.h"
#include "sentsimp/cli.h"
#include "sentsimp/corpus.h"
#include "sentsimp/model.h"
#include "sentsimp/rng.h"
#include "sentsimp/sari.h"
#include "sentsimp/tensor.h"
#include "sentsimp/text.h"
#include "sentsimp/train.h"

namespace fs = std::filesystem;
using namespace sentsimp;

namespace {

const std::string kData = SENTSIMP_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path work_dir(const std::string& name) {
  auto dir = fs::current_path() / "acceptance_work" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig toy_run(const fs::path& out) {
  RunConfig cfg = RunConfig::from_file(kData + "/toy.cfg");
  cfg.set("train_src", kData + "/train.src");
  cfg.set("train_tgt", kData + "/train.tgt");
  cfg.set("valid", kData + "/valid");
  cfg.set("out", out.string());
  return cfg;
}

std::string random_sentence(std::mt19937_64& gen) {
  static const char* kWords[] = {"a", "b", "c", "d", "e", "f", "g"};
  std::string out;
  for (std::size_t i = 0, n = 1 + gen() % 8; i < n; ++i) out += std::string(i ? " " : "") + kWords[gen() % 7];
  return out;
}

Outcome sari_oracle_equivalence() {
  std::mt19937_64 gen(1);
  double worst = 0;
  const int cases = 500;
  for (int t = 0; t < cases; ++t) {
    const auto src = random_sentence(gen), out = random_sentence(gen);
    std::vector<std::string> refs;
    for (std::size_t j = 0, r = 1 + gen() % 3; j < r; ++j) refs.push_back(random_sentence(gen));
    const auto got = sari_sentence(src, out, refs);
    const auto want = oracle::sari(src, out, refs);
    for (double d : {got.sari - want.sari, got.add - want.add, got.keep - want.keep, got.del - want.del}) {
      worst = std::max(worst, std::abs(d));
    }
    for (int n = 0; n < 4; ++n) {
      for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(got.per_order[n][c] - want.order[n][c]));
    }
  }
  const std::vector<std::string> same = {"the cat sat on the mat"};
  const auto identity = sari_sentence(same[0], same[0], same);
  const std::vector<std::string> ab = {"a b"};
  const auto hand = sari_sentence("a b c", "a b", ab);
  const bool identity_ok = fmt("%.2f", identity.sari) == "33.33";
  const bool hand_ok = fmt("%.2f", hand.sari) == "41.67" && hand.keep == 50.0 && hand.del == 75.0 &&
                       hand.add == 0.0;
  return {worst <= 1e-9 && identity_ok && hand_ok,
          std::to_string(cases) + " random cases, max |diff| " + fmt("%.3g", worst) + "; identity " +
              fmt("%.2f", identity.sari) + "; hand-worked SARI " + fmt("%.2f", hand.sari) + " KEEP " +
              fmt("%.2f", hand.keep) + " DELETE " + fmt("%.2f", hand.del) + " ADD " + fmt("%.2f", hand.add)};
}

Outcome model_gradient() {
  const std::size_t vocab = 48;
  const auto cfg = variant_config("bert", Scale::kToy, vocab);
  const auto model = init_model(cfg, 3);
  Rng rng(4);
  Batch b;
  b.source_ids = IdGrid(2, 6, kPadId);
  b.source_pad_mask = MaskGrid(2, 6, 0);
  b.target_in_ids = IdGrid(2, 5, kPadId);
  b.target_out_ids = IdGrid(2, 5, kPadId);
  b.target_pad_mask = MaskGrid(2, 5, 0);
  const std::size_t src_len[2] = {6, 4}, tgt_len[2] = {5, 3};
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < src_len[r]; ++c) {
      b.source_ids(r, c) = static_cast<TokenId>(4 + rng.below(vocab - 4));
      b.source_pad_mask(r, c) = 1;
    }
    for (std::size_t c = 0; c < tgt_len[r]; ++c) {
      b.target_in_ids(r, c) = static_cast<TokenId>(4 + rng.below(vocab - 4));
      b.target_out_ids(r, c) = static_cast<TokenId>(4 + rng.below(vocab - 4));
      b.target_pad_mask(r, c) = 1;
    }
  }
  std::vector<Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  const auto loss = [&] { return cross_entropy(forward(model, b), b.target_out_ids.values, kPadId); };
  const double h = 1e-5;
  const auto r = grad_check_report(loss, params, h, 24, 5);
  const double ulp = std::nextafter(r.loss, 2 * r.loss) - r.loss;
  std::string detail = "toy model (d_model 64, 2 layers, 2 heads, vocab 48, batch 2), " +
                       std::to_string(params.size()) + " tensors, max relative error " +
                       fmt("%.3g", r.max_rel_error);
  if (r.max_rel_error >= 1e-4) {
    detail += " at " + model.parameters()[r.worst_tensor].name + "[" + std::to_string(r.worst_coord) +
              "] (analytic " + fmt("%.3g", r.worst_analytic) + ", numeric " + fmt("%.3g", r.worst_numeric) +
              "); max |analytic-numeric| " + fmt("%.2g", r.max_abs_error) + ", one loss ulp / 2h = " +
              fmt("%.2g", ulp / (2 * h)) + "; " + std::to_string(r.probes_above_floor) + "/" +
              std::to_string(r.probes) + " probes with |grad| >= 1e-6 have max relative error " +
              fmt("%.2g", r.max_rel_error_above_floor);
  }
  return {r.max_rel_error < 1e-4, detail};
}

Outcome masking_semantics() {
  const std::size_t vocab = 40;
  const auto causal = init_model(variant_config("gpt2", Scale::kToy, vocab), 11);
  const auto bidir = init_model(variant_config("bert", Scale::kToy, vocab), 11);
  Rng rng(12);
  const auto random_ids = [&](std::size_t n) {
    IdGrid g(1, n, kPadId);
    for (auto& v : g.values) v = static_cast<TokenId>(4 + rng.below(vocab - 4));
    return g;
  };
  const auto slice = [](const Tensor& t, std::size_t from, std::size_t to) {
    return std::vector<double>(t.data().begin() + from, t.data().begin() + to);
  };
  const std::size_t d = 64;

  int causal_ok = 0, bidir_differs = 0, cross_ok = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t L = 3 + rng.below(6), i = rng.below(L - 1), j = i + 1 + rng.below(L - i - 1);
    const MaskGrid full(1, L, 1);
    // Causal encoder stack and decoder self-attention, both perturbed at j > i.
    auto ids = random_ids(L);
    const auto enc0 = encode_source(causal, ids, full);
    const auto mem = encode_source(causal, random_ids(4), MaskGrid(1, 4, 1));
    auto tgt = random_ids(L);
    const auto dec0 = decode_target(causal, mem, MaskGrid(1, 4, 1), tgt, full);
    ids(0, j) = static_cast<TokenId>(4 + (ids(0, j) - 4 + 1 + rng.below(vocab - 5)) % (vocab - 4));
    tgt(0, j) = ids(0, j) == tgt(0, j) ? static_cast<TokenId>(4 + (tgt(0, j) - 3) % (vocab - 4)) : ids(0, j);
    const auto enc1 = encode_source(causal, ids, full);
    const auto dec1 = decode_target(causal, mem, MaskGrid(1, 4, 1), tgt, full);
    if (slice(enc0, 0, (i + 1) * d) == slice(enc1, 0, (i + 1) * d) &&
        slice(dec0, 0, (i + 1) * d) == slice(dec1, 0, (i + 1) * d)) {
      ++causal_ok;
    }

    const auto b0 = encode_source(bidir, ids, full);
    auto ids2 = ids;
    ids2(0, j) = static_cast<TokenId>(4 + (ids(0, j) - 3) % (vocab - 4));
    const auto b1 = encode_source(bidir, ids2, full);
    if (slice(b0, i * d, (i + 1) * d) != slice(b1, i * d, (i + 1) * d)) ++bidir_differs;

    // Padded source positions must not reach the decoder.
    const std::size_t Ls = 4 + rng.below(4), real = 1 + rng.below(Ls - 1);
    auto src = random_ids(Ls);
    MaskGrid smask(1, Ls, 0);
    for (std::size_t c = 0; c < real; ++c) smask(0, c) = 1;
    const auto tgt_ids = random_ids(3);
    const MaskGrid tmask(1, 3, 1);
    const auto& model = t % 2 ? bidir : causal;
    const auto h0 = decode_target(model, encode_source(model, src, smask), smask, tgt_ids, tmask);
    for (std::size_t c = real; c < Ls; ++c) src(0, c) = static_cast<TokenId>(4 + rng.below(vocab - 4));
    const auto h1 = decode_target(model, encode_source(model, src, smask), smask, tgt_ids, tmask);
    if (slice(h0, 0, h0.numel()) == slice(h1, 0, h1.numel())) ++cross_ok;
  }
  return {causal_ok == 50 && bidir_differs == 50 && cross_ok == 50,
          "causal invariant " + std::to_string(causal_ok) + "/50, bidirectional differs " +
              std::to_string(bidir_differs) + "/50, cross-attention pad invariant " +
              std::to_string(cross_ok) + "/50"};
}

Outcome overfit_run() {
  const auto dir = work_dir("overfit");
  auto cfg = toy_run(dir / "run");
  cfg.set("epochs", "200");
  cfg.set("patience", "none");
  cfg.set("dropout", "0");
  cmd_train(cfg);
  const auto ck = load_checkpoint((dir / "run" / kCheckpointFile).string());
  const double final_loss = ck.history.epochs.back().train_loss;

  RunConfig simp;
  simp.set("out", (dir / "run").string());
  simp.set("input", kData + "/train.src");
  simp.set("output", (dir / "train.out").string());
  cmd_simplify(simp);
  const auto outputs = read_lines((dir / "train.out").string());
  const auto targets = read_lines(kData + "/train.tgt");
  std::size_t exact = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) exact += outputs.at(i) == join(split_lower(targets[i]));

  fs::copy_file(kData + "/train.src", dir / "train.src");
  fs::copy_file(kData + "/train.tgt", dir / "train.ref.0");
  RunConfig ev;
  ev.set("system", (dir / "train.out").string());
  ev.set("eval", (dir / "train").string());
  ev.set("out", (dir / "eval").string());
  const double sari = cmd_eval(ev).corpus.sari;

  const double frac = static_cast<double>(exact) / targets.size();
  return {final_loss < 0.1 && frac >= 0.9 && sari > 90.0,
          "200 epochs, final loss " + fmt("%.4f", final_loss) + ", exact " + std::to_string(exact) + "/" +
              std::to_string(targets.size()) + ", training SARI " + fmt("%.2f", sari)};
}

Outcome schedule_endpoints() {
  const TrainConfig cfg;
  const std::size_t total = 10000;
  const auto peak = static_cast<std::size_t>(std::floor(cfg.warmup_fraction * total));
  const bool start = onecycle_lr(0, total, cfg) == 1e-4;
  const bool top = onecycle_lr(peak, total, cfg) == 1e-3;
  const double bound = (cfg.max_lr - cfg.final_lr) * (std::numbers::pi / 2) / (total - 1 - peak);
  const double warm = (cfg.max_lr - cfg.base_lr) / peak;
  double max_jump = 0;
  bool monotone = true;
  for (std::size_t s = 0; s + 1 < total; ++s) {
    const double a = onecycle_lr(s, total, cfg), b = onecycle_lr(s + 1, total, cfg);
    max_jump = std::max(max_jump, std::abs(b - a));
    if (s < peak) monotone &= b > a && b - a <= warm * (1 + 1e-9);
    else monotone &= b <= a && a - b <= bound;
  }
  const bool end = std::abs(onecycle_lr(total - 1, total, cfg) - cfg.final_lr) < 1e-18;
  return {start && top && monotone && end,
          "lr(0)=" + fmt("%g", onecycle_lr(0, total, cfg)) + ", lr(" + std::to_string(peak) +
              ")=" + fmt("%g", onecycle_lr(peak, total, cfg)) + ", lr(last)=" +
              fmt("%g", onecycle_lr(total - 1, total, cfg)) + ", max step change " + fmt("%.3g", max_jump) +
              (monotone ? ", up then down" : ", NOT piecewise monotone")};
}

Outcome early_stopping() {
  const auto ex = load_parallel(kData + "/train.src", kData + "/train.tgt");
  std::vector<std::string> text;
  for (const auto& e : ex) text.push_back(e.source), text.push_back(e.target);
  const auto vocab = build_vocab(text, 1000);
  auto pairs = tokenize_pairs(vocab, ex, 80);
  pairs.resize(8);
  const std::vector<double> scores = {10, 12, 11, 11, 11};
  std::vector<std::vector<double>> snapshots;
  const Validator v = [&](const Model& m, std::size_t epoch) {
    const auto w = m.parameter("output.weight").data();
    snapshots.emplace_back(w.begin(), w.end());
    return scores.at(epoch - 1);
  };
  TrainConfig cfg;
  cfg.patience = 3;
  const auto ck = train_loop(init_model(variant_config("bert", Scale::kToy, vocab.size()), 1), vocab,
                             pairs, v, cfg);
  const auto w = ck.model.parameter("output.weight").data();
  const bool restored = snapshots.size() == 5 && std::vector<double>(w.begin(), w.end()) == snapshots[1];
  return {ck.history.epochs.size() == 5 && ck.history.best_epoch == 2 && ck.history.stopped_early && restored,
          "SARI [10,12,11,11,11], patience 3: ran " + std::to_string(ck.history.epochs.size()) +
              " epochs, best epoch " + std::to_string(ck.history.best_epoch) +
              (restored ? ", parameters from epoch 2" : ", parameters NOT from epoch 2")};
}

Outcome reproducibility() {
  const auto dir = work_dir("repro");
  cmd_train(toy_run(dir / "a"));
  cmd_train(toy_run(dir / "b"));
  const bool hist = read_bytes(dir / "a" / kHistoryFile) == read_bytes(dir / "b" / kHistoryFile);
  const bool ckpt = read_bytes(dir / "a" / kCheckpointFile) == read_bytes(dir / "b" / kCheckpointFile);
  const auto epochs = read_lines((dir / "a" / kHistoryFile).string()).size() - 1;
  return {hist && ckpt, std::to_string(epochs) + "-epoch toy runs: history " +
                            (hist ? "identical" : "DIFFERS") + ", checkpoint " + (ckpt ? "identical" : "DIFFERS")};
}

Outcome variant_differentiation() {
  const auto dir = work_dir("variants");
  std::vector<std::string> run_dirs;
  for (const auto& v : all_variants()) {
    auto cfg = toy_run(dir / v.name);
    cfg.set("variant", v.name);
    cmd_train(cfg);
    RunConfig simp;
    simp.set("out", (dir / v.name).string());
    simp.set("input", kData + "/valid.src");
    simp.set("output", (dir / v.name / "valid.out").string());
    cmd_simplify(simp);
    RunConfig ev;
    ev.set("system", (dir / v.name / "valid.out").string());
    ev.set("eval", kData + "/valid");
    ev.set("out", (dir / v.name).string());
    cmd_eval(ev);
    run_dirs.push_back((dir / v.name).string());
  }
  const auto sari_column = [&](const std::string& name) {
    std::vector<double> out;
    for (const auto& e : load_checkpoint((dir / name / kCheckpointFile).string()).history.epochs) {
      out.push_back(e.valid_sari);
    }
    return out;
  };
  const auto bert = sari_column("bert"), gpt2 = sari_column("gpt2");
  const auto rows = cmd_report(run_dirs);
  const auto table = format_report_table(rows);
  std::ofstream(dir / "report.txt") << table;
  std::size_t runs = 0, lit = 0;
  for (const auto& r : rows) (r.published ? lit : runs)++;
  bool sorted = true;
  for (std::size_t i = 1; i < runs; ++i) sorted &= *rows[i - 1].sari >= *rows[i].sari;
  std::size_t differing = 0;
  for (std::size_t i = 0; i < std::min(bert.size(), gpt2.size()); ++i) differing += bert[i] != gpt2[i];
  return {bert != gpt2 && runs == 4 && lit == 5 && sorted,
          "bert vs gpt2 validation SARI differs at " + std::to_string(differing) + "/" +
              std::to_string(bert.size()) + " epochs; report has " + std::to_string(runs) + "+" +
              std::to_string(lit) + " rows" + (sorted ? "" : ", NOT sorted")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_s;
  };
  const std::vector<Criterion> criteria = {
      {1, "SARI oracle equivalence", sari_oracle_equivalence, 10},
      {2, "gradient correctness", model_gradient, 120},
      {3, "masking semantics", masking_semantics, 60},
      {4, "overfit run", overfit_run, 300},
      {5, "schedule endpoints", schedule_endpoints, 60},
      {6, "early stopping", early_stopping, 60},
      {7, "reproducibility", reproducibility, 300},
      {8, "variant differentiation", variant_differentiation, 1200},
  };
  fs::create_directories(fs::current_path() / "acceptance_work");
  std::ofstream train_log(fs::current_path() / "acceptance_work" / "train.log");
  std::streambuf* const saved_cerr = std::cerr.rdbuf(train_log.rdbuf());
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %d (%s): %s [%.1fs of %.0fs budget]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  std::cerr.rdbuf(saved_cerr);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
