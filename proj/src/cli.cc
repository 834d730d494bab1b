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

#include "sentsimp/cli.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sentsimp/corpus.h"
#include "sentsimp/text.h"

namespace sentsimp {
namespace fs = std::filesystem;

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? fixed2(*v) : "-"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw IoError("missing " + what + ": " + path);
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::from_text(std::string_view text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    cfg.set(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path);
}

const std::string& RunConfig::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    throw UsageError("missing required setting '" + key + "' (flag --" + flag + ")");
  }
  return it->second;
}

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const auto& s = require(key);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw UsageError("setting '" + key + "': not a number: " + s);
  return v;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const auto& s = require(key);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError("setting '" + key + "': not a non-negative integer: " + s);
  }
  return v;
}

void RunConfig::overlay(const RunConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + '=' + v + '\n';
  return out;
}

RunConfig train_defaults() {
  return RunConfig::from_text(
      "seed=0\n"
      "variant=bert\n"
      "scale=toy\n"
      "out=run\n"
      "epochs=20\n"
      "batch_size=8\n"
      "base_lr=0.0001\n"
      "max_lr=0.001\n"
      "warmup_fraction=0.1\n"
      "final_lr=1e-06\n"
      "weight_decay=0.01\n"
      "beta1=0.9\n"
      "beta2=0.999\n"
      "eps_adam=1e-08\n"
      "patience=3\n"
      "clip_norm=1\n"
      "vocab_min_freq=1\n"
      "strategy=greedy\n"
      "beam_width=4\n"
      "length_penalty=0\n"
      "decode_max_len=80\n",
      "<defaults>");
}

TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig t;
  t.base_lr = cfg.get_double("base_lr");
  t.max_lr = cfg.get_double("max_lr");
  t.epochs = cfg.get_size("epochs");
  t.batch_size = cfg.get_size("batch_size");
  t.warmup_fraction = cfg.get_double("warmup_fraction");
  t.final_lr = cfg.get_double("final_lr");
  t.weight_decay = cfg.get_double("weight_decay");
  t.beta1 = cfg.get_double("beta1");
  t.beta2 = cfg.get_double("beta2");
  t.eps_adam = cfg.get_double("eps_adam");
  const auto patience = cfg.require("patience");
  if (patience == "none") {
    t.patience = std::nullopt;
  } else {
    t.patience = cfg.get_size("patience");
  }
  t.clip_norm = cfg.get_double("clip_norm");
  t.seed = cfg.get_size("seed");
  try {
    t.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return t;
}

DecodeConfig decode_config_from(const RunConfig& cfg) {
  DecodeConfig d;
  d.max_len = cfg.has("decode_max_len") ? cfg.get_size("decode_max_len") : kMaxTokens;
  d.strategy = parse_strategy(cfg.get("strategy", "greedy"));
  d.beam_width = cfg.has("beam_width") ? cfg.get_size("beam_width") : 4;
  d.length_penalty = cfg.has("length_penalty") ? cfg.get_double("length_penalty") : 0.0;
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// train

std::string cmd_train(const RunConfig& user) {
  RunConfig cfg = train_defaults();
  cfg.overlay(user);

  const auto& train_src = cfg.require("train_src");
  const auto& train_tgt = cfg.require("train_tgt");
  const auto& valid_stem = cfg.require("valid");
  require_file(train_src, "training source corpus");
  require_file(train_tgt, "training target corpus");
  require_file(valid_stem + ".src", "validation source");

  const VariantSpec& variant = variant_spec(cfg.require("variant"));
  const Scale scale = parse_scale(cfg.require("scale"));
  const std::size_t preset_vocab = std::max(variant.encoder_vocab_size, variant.decoder_vocab_size);
  cfg.set_default("vocab_max_size", scale == Scale::kPaper ? std::to_string(preset_vocab) : "50000");
  const TrainConfig tcfg = train_config_from(cfg);
  const DecodeConfig dcfg = decode_config_from(cfg);

  const auto train_pairs = load_parallel(train_src, train_tgt);
  auto valid = load_eval_stem(valid_stem);
  if (train_pairs.empty()) throw FormatError("training corpus is empty: " + train_src);
  std::cerr << "train " << corpus_stats(train_pairs).to_json() << '\n'
            << "valid " << corpus_stats(valid).to_json() << '\n';

  Vocabulary vocab;
  if (cfg.has("vocab")) {
    vocab = Vocabulary::load(cfg.require("vocab"));
  } else {
    std::vector<std::string> text;
    for (const auto& p : train_pairs) {
      text.push_back(p.source);
      text.push_back(p.target);
    }
    vocab = build_vocab(text, cfg.get_size("vocab_max_size"), cfg.get_size("vocab_min_freq"));
  }

  ModelConfig mcfg = variant_config(variant.name, scale, vocab.size());
  if (scale == Scale::kPaper && mcfg.vocab_size < vocab.size()) {
    throw UsageError("vocabulary of " + std::to_string(vocab.size()) +
                     " tokens exceeds the preset size " + std::to_string(mcfg.vocab_size));
  }
  if (cfg.has("dropout")) mcfg.dropout_rate = cfg.get_double("dropout");
  cfg.set("dropout", [&] {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, mcfg.dropout_rate);
    return std::string(buf, p);
  }());
  try {
    mcfg.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }

  const fs::path out = ensure_dir(cfg.require("out"));
  std::string resolved = cfg.to_text();
  std::istringstream model_lines(mcfg.to_text());
  for (std::string line; std::getline(model_lines, line);) resolved += "model." + line + '\n';
  write_text(out / kResolvedConfigFile, resolved);

  vocab.save((out / kVocabFile).string());
  write_text(out / "corpus_stats.json",
             "{\"train\":" + corpus_stats(train_pairs).to_json() +
                 ",\"valid\":" + corpus_stats(valid).to_json() + "}\n");

  const auto tokenized = tokenize_pairs(vocab, train_pairs, mcfg.max_len);
  Model model = init_model(mcfg, tcfg.seed);
  const auto log = [&](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << '/' << tcfg.epochs << " loss " << r.train_loss
              << " sari " << r.valid_sari << " lr " << r.lr << '\n';
  };
  Checkpoint ckpt = train_loop(std::move(model), vocab, tokenized,
                               make_sari_validator(vocab, std::move(valid), dcfg), tcfg, log);
  ckpt.vocab.path = std::string(kVocabFile);
  save_checkpoint(ckpt, (out / kCheckpointFile).string());
  write_text(out / kHistoryFile, ckpt.history.to_tsv());
  return out.string();
}

// ---------------------------------------------------------------------------
// simplify

std::string cmd_simplify(const RunConfig& cfg) {
  const std::string out_dir = cfg.get("out", "run");
  const std::string ckpt_path =
      cfg.get("checkpoint", (fs::path(out_dir) / kCheckpointFile).string());
  const std::string& input = cfg.require("input");
  require_file(ckpt_path, "checkpoint");
  require_file(input, "input file");
  const DecodeConfig dcfg = decode_config_from(cfg);

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Vocabulary vocab = load_checkpoint_vocab(ckpt, ckpt_path, cfg.get("vocab"));
  if (ckpt.model.config().vocab_size < vocab.size()) {
    throw FormatError("checkpoint/vocab mismatch: model has " +
                      std::to_string(ckpt.model.config().vocab_size) + " embedding rows, vocabulary " +
                      std::to_string(vocab.size()) + " tokens");
  }

  std::vector<std::string> outputs;
  for (const auto& line : read_lines(input)) {
    const auto src = trim(line);
    outputs.push_back(src.empty() ? std::string() : simplify(ckpt.model, vocab, src, dcfg));
  }
  std::string output = cfg.get("output");
  if (output.empty()) output = (ensure_dir(out_dir) / "simplified.txt").string();
  write_lines(output, outputs);
  return output;
}

// ---------------------------------------------------------------------------
// eval

const std::vector<ReportRow>& literature_rows() {
  static const std::vector<ReportRow> rows = {
      {"Zhao et al. (2018)", 40.42, 5.72, 42.23, 73.41, true},
      {"Martin et al. (2019)", 41.87, std::nullopt, std::nullopt, std::nullopt, true},
      {"Omelianchuk et al. (2021)", 41.46, 6.96, 47.87, 69.56, true},
      {"Sheang and Saggion (2021)", 43.31, std::nullopt, std::nullopt, std::nullopt, true},
      {"Štajner et al. (2022)", 43.30, std::nullopt, std::nullopt, std::nullopt, true},
  };
  return rows;
}

const std::vector<ReportRow>& published_variant_rows() {
  static const std::vector<ReportRow> rows = {
      {"BERT+GPT-2", 42.31, 11.07, 62.82, 53.93, true},
      {"GPT-2+BERT", 42.35, 10.74, 62.37, 54.05, true},
      {"GPT-2", 46.35, 12.60, 66.64, 59.73, true},
      {"BERT", 46.80, 12.13, 67.16, 61.22, true},
  };
  return rows;
}

std::string format_eval_text(const CorpusSari& result, std::size_t num_refs) {
  const auto& c = result.corpus;
  std::ostringstream out;
  out << "SARI evaluation: " << result.sentences.size() << " sentences, " << num_refs
      << " reference(s) each\n\n";
  out << "  SARI     ADD      DELETE   KEEP\n";
  char line[128];
  std::snprintf(line, sizeof line, "  %-8.2f %-8.2f %-8.2f %-8.2f\n", c.sari, c.add, c.del, c.keep);
  out << line << "\nPer n-gram order:\n  n  ADD      DELETE   KEEP\n";
  for (std::size_t n = 0; n < kMaxNgramOrder; ++n) {
    std::snprintf(line, sizeof line, "  %zu  %-8.2f %-8.2f %-8.2f\n", n + 1, c.per_order[n][kAdd],
                  c.per_order[n][kDelete], c.per_order[n][kKeep]);
    out << line;
  }
  out << "\nPublished reference scores, Mechanical Turk test set (SARI ADD DELETE KEEP):\n";
  for (const auto* rows : {&published_variant_rows(), &literature_rows()}) {
    for (const auto& r : *rows) {
      out << r.name << ' ' << cell(r.sari) << ' ' << cell(r.add) << ' ' << cell(r.del) << ' '
          << cell(r.keep) << '\n';
    }
  }
  return out.str();
}

std::string eval_json(const CorpusSari& result, std::size_t num_refs) {
  const auto& c = result.corpus;
  nlohmann::ordered_json j;
  j["sari"] = c.sari;
  j["add"] = c.add;
  j["keep"] = c.keep;
  j["delete"] = c.del;
  j["n"] = result.sentences.size();
  j["num_refs"] = num_refs;
  auto orders = nlohmann::ordered_json::array();
  for (std::size_t n = 0; n < kMaxNgramOrder; ++n) {
    orders.push_back({{"n", n + 1},
                      {"add", c.per_order[n][kAdd]},
                      {"keep", c.per_order[n][kKeep]},
                      {"delete", c.per_order[n][kDelete]}});
  }
  j["per_order"] = orders;
  return j.dump(2) + '\n';
}

CorpusSari cmd_eval(const RunConfig& cfg) {
  const std::string& system = cfg.require("system");
  const std::string& stem = cfg.require("eval");
  require_file(system, "system output");
  const auto examples = load_eval_stem(stem);
  const auto outputs = read_lines(system);
  if (outputs.size() != examples.size()) {
    throw FormatError("line count mismatch: " + system + " has " + std::to_string(outputs.size()) +
                      " lines, " + stem + ".src has " + std::to_string(examples.size()));
  }
  std::vector<SariItem> items;
  items.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    items.push_back({examples[i].source, std::string(trim(outputs[i])), examples[i].references});
  }
  CorpusSari result = sari_corpus(items);
  const std::size_t num_refs = examples.front().references.size();
  const std::size_t bins = cfg.has("bins") ? cfg.get_size("bins") : 20;

  const fs::path out = ensure_dir(cfg.get("out", "run"));
  write_text(out / kEvalTextFile, format_eval_text(result, num_refs));
  write_text(out / kEvalJsonFile, eval_json(result, num_refs));

  std::string scores = "index\tsari\tsari_norm\tadd\tkeep\tdelete\n";
  std::vector<double> saris;
  for (std::size_t i = 0; i < result.sentences.size(); ++i) {
    const auto& s = result.sentences[i];
    char line[160];
    std::snprintf(line, sizeof line, "%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", i, s.sari,
                  s.sari / 100.0, s.add, s.keep, s.del);
    scores += line;
    saris.push_back(s.sari);
  }
  write_text(out / kScoresFile, scores);

  std::string hist = "bin_lower\tcount\n";
  for (const auto& b : score_histogram(saris, bins)) {
    char line[64];
    std::snprintf(line, sizeof line, "%g\t%zu\n", b.lower, b.count);
    hist += line;
  }
  write_text(out / kHistogramFile, hist);
  return result;
}

// ---------------------------------------------------------------------------
// report

std::vector<ReportRow> cmd_report(const std::vector<std::string>& run_dirs) {
  std::vector<ReportRow> runs;
  for (const auto& dir : run_dirs) {
    const fs::path json_path = fs::path(dir) / kEvalJsonFile;
    if (!fs::is_regular_file(json_path)) {
      log_warning("skipping " + dir + ": no " + std::string(kEvalJsonFile));
      continue;
    }
    std::ifstream in(json_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      log_warning("skipping " + dir + ": unreadable " + std::string(kEvalJsonFile) + ": " + e.what());
      continue;
    }
    std::string name = fs::path(dir).filename().string();
    if (name.empty()) name = fs::path(dir).parent_path().filename().string();
    const fs::path resolved = fs::path(dir) / kResolvedConfigFile;
    if (fs::is_regular_file(resolved)) {
      name = RunConfig::from_file(resolved.string()).get("variant", name);
    }
    runs.push_back({name, j.at("sari").get<double>(), j.at("add").get<double>(),
                    j.at("delete").get<double>(), j.at("keep").get<double>(), false});
  }
  std::stable_sort(runs.begin(), runs.end(),
                   [](const ReportRow& a, const ReportRow& b) { return *a.sari > *b.sari; });
  for (const auto& r : literature_rows()) runs.push_back(r);
  return runs;
}

std::string format_report_table(const std::vector<ReportRow>& rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, utf8_length(r.name));
  std::ostringstream out;
  auto line = [&](const std::string& name, const std::string& a, const std::string& b,
                  const std::string& c, const std::string& d) {
    out << name << std::string(width - utf8_length(name) + 2, ' ');
    for (const auto* v : {&a, &b, &c, &d}) out << *v << std::string(v->size() < 8 ? 8 - v->size() : 1, ' ');
    out << '\n';
  };
  line("Model", "SARI", "ADD", "DELETE", "KEEP");
  bool separator_done = false;
  for (const auto& r : rows) {
    if (r.published && !separator_done) {
      out << std::string(width + 2 + 32, '-') << '\n';
      separator_done = true;
    }
    line(r.name, cell(r.sari), cell(r.add), cell(r.del), cell(r.keep));
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// argv entry point

namespace {

struct FlagSet {
  std::map<std::string, std::string> store;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(CLI::App* app, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    options.emplace_back(key, app->add_option(flag, store[key], help));
  }

  // Defaults < --config file < explicit flags.
  RunConfig resolve() const {
    RunConfig cfg;
    for (const auto& [key, opt] : options) {
      if (key == "config" && opt->count() > 0) cfg.overlay(RunConfig::from_file(store.at(key)));
    }
    for (const auto& [key, opt] : options) {
      if (key != "config" && opt->count() > 0) cfg.set(key, store.at(key));
    }
    return cfg;
  }

  bool given(const std::string& key) const {
    for (const auto& [k, opt] : options) {
      if (k == key) return opt->count() > 0;
    }
    return false;
  }
};

void add_shared(CLI::App* app, FlagSet& flags) {
  flags.add(app, "config", "key=value config file; flags override it");
  flags.add(app, "seed", "random seed");
  flags.add(app, "variant", "bert | gpt2 | bert+gpt2 | gpt2+bert");
  flags.add(app, "scale", "paper | toy");
  flags.add(app, "out", "output directory");
}

void add_decode(CLI::App* app, FlagSet& flags) {
  flags.add(app, "strategy", "greedy | beam");
  flags.add(app, "beam_width", "beam width (beam strategy)");
  flags.add(app, "length_penalty", "length penalty exponent (beam strategy)");
  flags.add(app, "decode_max_len", "maximum generated length in tokens");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Sentence simplification: train encoder-decoder transformers, decode, score with SARI"};
  app.require_subcommand(1);

  FlagSet train_flags, simplify_flags, eval_flags, report_flags;

  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  add_shared(train, train_flags);
  for (const char* key : {"train_src", "train_tgt", "valid", "vocab", "vocab_max_size",
                          "vocab_min_freq", "epochs", "batch_size", "base_lr", "max_lr",
                          "warmup_fraction", "final_lr", "weight_decay", "beta1", "beta2",
                          "eps_adam", "patience", "clip_norm", "dropout"}) {
    train_flags.add(train, key, key);
  }
  add_decode(train, train_flags);

  auto* simp = app.add_subcommand("simplify", "simplify one sentence per line with a checkpoint");
  add_shared(simp, simplify_flags);
  simplify_flags.add(simp, "checkpoint", "checkpoint file (default <out>/checkpoint.ssck)");
  simplify_flags.add(simp, "input", "input file, one sentence per line");
  simplify_flags.add(simp, "output", "output file (default <out>/simplified.txt)");
  simplify_flags.add(simp, "vocab", "vocabulary file overriding the checkpoint's reference");
  add_decode(simp, simplify_flags);

  auto* eval = app.add_subcommand("eval", "score a system output file with SARI");
  add_shared(eval, eval_flags);
  eval_flags.add(eval, "system", "system output file, one sentence per line");
  eval_flags.add(eval, "eval", "evaluation stem: <stem>.src and <stem>.ref.N");
  eval_flags.add(eval, "bins", "histogram bins (default 20)");

  auto* report = app.add_subcommand("report", "compare evaluated run directories");
  add_shared(report, report_flags);
  std::vector<std::string> run_dirs;
  report->add_option("runs", run_dirs, "run directories containing eval.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      std::cout << cmd_train(train_flags.resolve()) << '\n';
    } else if (simp->parsed()) {
      std::cout << cmd_simplify(simplify_flags.resolve()) << '\n';
    } else if (eval->parsed()) {
      RunConfig cfg = eval_flags.resolve();
      const auto result = cmd_eval(cfg);
      std::cout << format_eval_text(result, load_eval_stem(cfg.require("eval")).front().references.size());
    } else if (report->parsed()) {
      const auto rows = cmd_report(run_dirs);
      const std::string table = format_report_table(rows);
      std::cout << table;
      if (report_flags.given("out")) {
        write_text(ensure_dir(report_flags.resolve().require("out")) / "report.txt", table);
      }
    }
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sentsimp
