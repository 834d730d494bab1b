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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scratch.h"
#include "sentsimp/error.h"
#include "sentsimp/text.h"

namespace sentsimp {
namespace {

namespace fs = std::filesystem;
using testing_support::read_file;
using testing_support::scratch_dir;
using testing_support::write_file;

const std::string kData = SENTSIMP_DATA_DIR;

struct Run {
  int code;
  std::string err;
};

Run run_binary(const std::string& args, const fs::path& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(SENTSIMP_CLI_PATH) + " " + args + " >" +
                          (dir / "stdout.txt").string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err)};
}

RunConfig toy_train(const fs::path& out, std::size_t epochs) {
  RunConfig cfg = RunConfig::from_file(kData + "/toy.cfg");
  cfg.set("train_src", kData + "/train.src");
  cfg.set("train_tgt", kData + "/train.tgt");
  cfg.set("valid", kData + "/valid");
  cfg.set("epochs", std::to_string(epochs));
  cfg.set("out", out.string());
  return cfg;
}

TEST(RunConfig, ParsesAndOverlays) {
  auto a = RunConfig::from_text("# comment\nseed = 3\n\nvariant=gpt2\n");
  EXPECT_EQ(a.require("seed"), "3");
  EXPECT_EQ(a.get_size("seed"), 3u);
  a.overlay(RunConfig::from_text("seed=9"));
  EXPECT_EQ(a.get("seed"), "9");
  EXPECT_EQ(a.get("variant"), "gpt2");
  EXPECT_THROW(RunConfig::from_text("novalue"), UsageError);
  EXPECT_THROW(a.require("missing"), UsageError);
  EXPECT_THROW(RunConfig::from_text("x=abc").get_double("x"), UsageError);
}

TEST(RunConfig, TrainDefaultsMatchTrainConfig) {
  const auto t = train_config_from(train_defaults());
  const TrainConfig want;
  EXPECT_EQ(t.base_lr, want.base_lr);
  EXPECT_EQ(t.max_lr, want.max_lr);
  EXPECT_EQ(t.epochs, want.epochs);
  EXPECT_EQ(t.batch_size, want.batch_size);
  EXPECT_EQ(t.warmup_fraction, want.warmup_fraction);
  EXPECT_EQ(t.final_lr, want.final_lr);
  EXPECT_EQ(t.weight_decay, want.weight_decay);
  EXPECT_EQ(t.patience, want.patience);
  auto none = train_defaults();
  none.set("patience", "none");
  EXPECT_FALSE(train_config_from(none).patience.has_value());
}

TEST(CmdTrain, WritesRunDirectory) {
  const auto dir = scratch_dir();
  cmd_train(toy_train(dir / "run", 2));
  for (std::string_view f : {kCheckpointFile, kVocabFile, kHistoryFile, kResolvedConfigFile}) {
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  }
  const auto history = read_lines((dir / "run" / kHistoryFile).string());
  EXPECT_EQ(history.size(), 3u);
  EXPECT_EQ(history[0], "epoch\tloss\tsari\tlr");
  const auto resolved = RunConfig::from_file((dir / "run" / kResolvedConfigFile).string());
  EXPECT_EQ(resolved.get("epochs"), "2");
  EXPECT_EQ(resolved.get("max_lr"), "0.001");
  EXPECT_EQ(resolved.get("model.d_model"), "64");
}

TEST(CmdTrain, ResolvedConfigReproducesRun) {
  const auto dir = scratch_dir();
  cmd_train(toy_train(dir / "a", 2));
  auto again = RunConfig::from_file((dir / "a" / kResolvedConfigFile).string());
  again.set("out", (dir / "b").string());
  cmd_train(again);
  EXPECT_EQ(read_file(dir / "a" / kHistoryFile), read_file(dir / "b" / kHistoryFile));
  EXPECT_EQ(read_file(dir / "a" / kCheckpointFile), read_file(dir / "b" / kCheckpointFile));
}

TEST(CmdTrain, MissingCorpusExitsTwoNamingPath) {
  const auto dir = scratch_dir();
  const auto r = run_binary("train --train-src /no/such/file.src --train-tgt " + kData +
                                "/train.tgt --valid " + kData + "/valid --out " + (dir / "r").string(),
                            dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/no/such/file.src"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto dir = scratch_dir();
  EXPECT_EQ(run_binary("", dir).code, 2);
  EXPECT_EQ(run_binary("frobnicate", dir).code, 2);
  EXPECT_EQ(run_binary("train --variant t5 --train-src " + kData + "/train.src --train-tgt " + kData +
                           "/train.tgt --valid " + kData + "/valid --out " + (dir / "r").string(),
                       dir)
                .code,
            2);
  EXPECT_EQ(run_binary("--help", dir).code, 0);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = scratch_dir();
  write_file(dir / "c.cfg", "epochs=5\nseed=1\nscale=toy\n");
  const auto r = run_binary("train --config " + (dir / "c.cfg").string() + " --epochs 1 --train-src " + kData +
                                "/train.src --train-tgt " + kData + "/train.tgt --valid " + kData +
                                "/valid --out " + (dir / "r").string(),
                            dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto resolved = RunConfig::from_file((dir / "r" / kResolvedConfigFile).string());
  EXPECT_EQ(resolved.get("epochs"), "1");
  EXPECT_EQ(resolved.get("seed"), "1");
  EXPECT_EQ(read_lines((dir / "r" / kHistoryFile).string()).size(), 2u);
}

class TrainedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "sentsimp_tests" / "TrainedRun";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    cmd_train(toy_train(dir_ / "run", 2));
  }
  static fs::path dir_;
};
fs::path TrainedRun::dir_;

TEST_F(TrainedRun, SimplifyPreservesLineCount) {
  write_file(dir_ / "in5.txt", "a b\nthe river\nthe old bridge\n\nthe painter\n");
  RunConfig cfg;
  cfg.set("out", (dir_ / "run").string());
  cfg.set("input", (dir_ / "in5.txt").string());
  cfg.set("output", (dir_ / "out5.txt").string());
  cmd_simplify(cfg);
  EXPECT_EQ(read_lines((dir_ / "out5.txt").string()).size(), 5u);
}

TEST_F(TrainedRun, SimplifyEmptyInput) {
  write_file(dir_ / "empty.txt", "");
  RunConfig cfg;
  cfg.set("checkpoint", (dir_ / "run" / kCheckpointFile).string());
  cfg.set("input", (dir_ / "empty.txt").string());
  cfg.set("output", (dir_ / "empty_out.txt").string());
  cmd_simplify(cfg);
  EXPECT_EQ(read_file(dir_ / "empty_out.txt"), "");
}

TEST_F(TrainedRun, SimplifyRejectsForeignVocabulary) {
  write_file(dir_ / "in.txt", "a b\n");
  write_file(dir_ / "foreign.txt", "<pad>\n<s>\n</s>\n<unk>\nzz\n");
  RunConfig cfg;
  cfg.set("out", (dir_ / "run").string());
  cfg.set("input", (dir_ / "in.txt").string());
  cfg.set("vocab", (dir_ / "foreign.txt").string());
  EXPECT_THROW(cmd_simplify(cfg), FormatError);
  const auto r = run_binary("simplify --out " + (dir_ / "run").string() + " --input " +
                                (dir_ / "in.txt").string() + " --vocab " + (dir_ / "foreign.txt").string(),
                            dir_);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checkpoint/vocab mismatch"), std::string::npos);
}

TEST_F(TrainedRun, EvalOfReferenceCopy) {
  RunConfig cfg;
  cfg.set("system", kData + "/valid.ref.0");
  cfg.set("eval", kData + "/valid");
  cfg.set("out", (dir_ / "eval").string());
  const auto result = cmd_eval(cfg);
  ASSERT_EQ(result.sentences.size(), 8u);
  for (const auto& s : result.sentences) {
    EXPECT_GE(s.sari, 0.0);
    EXPECT_LE(s.sari, 100.0);
  }
  const auto j = nlohmann::json::parse(read_file(dir_ / "eval" / kEvalJsonFile));
  for (const char* key : {"sari", "add", "keep", "delete", "n"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["n"], 8);
  EXPECT_NEAR(j["sari"].get<double>(), result.corpus.sari, 1e-12);

  const auto text = read_file(dir_ / "eval" / kEvalTextFile);
  EXPECT_NE(text.find("\nBERT 46.80 12.13 67.16 61.22\n"), std::string::npos) << text;

  const auto scores = read_lines((dir_ / "eval" / kScoresFile).string());
  EXPECT_EQ(scores.size(), 9u);
  EXPECT_EQ(scores[0], "index\tsari\tsari_norm\tadd\tkeep\tdelete");
  const auto hist = read_lines((dir_ / "eval" / kHistogramFile).string());
  EXPECT_EQ(hist.size(), 21u);
  std::size_t total = 0;
  for (std::size_t i = 1; i < hist.size(); ++i) total += std::stoul(hist[i].substr(hist[i].find('\t') + 1));
  EXPECT_EQ(total, 8u);
}

TEST_F(TrainedRun, EvalLineCountMismatch) {
  write_file(dir_ / "short.txt", "one line\n");
  RunConfig cfg;
  cfg.set("system", (dir_ / "short.txt").string());
  cfg.set("eval", kData + "/valid");
  cfg.set("out", (dir_ / "eval_bad").string());
  EXPECT_THROW(cmd_eval(cfg), FormatError);
}

TEST(CmdReport, SortsAndAppendsLiterature) {
  const auto dir = scratch_dir();
  const auto make = [&](const std::string& name, double sari) {
    fs::create_directories(dir / name);
    write_file(dir / name / kEvalJsonFile,
               "{\"sari\":" + std::to_string(sari) + ",\"add\":1,\"keep\":2,\"delete\":3,\"n\":4}");
    write_file(dir / name / kResolvedConfigFile, "variant=" + name + "\n");
  };
  make("bert", 30);
  make("gpt2", 35);
  make("bert+gpt2", 20);
  fs::create_directories(dir / "empty");
  const auto rows = cmd_report({(dir / "bert").string(), (dir / "gpt2").string(),
                                (dir / "empty").string(), (dir / "bert+gpt2").string()});
  ASSERT_EQ(rows.size(), 3u + 5u);
  EXPECT_EQ(rows[0].name, "gpt2");
  EXPECT_EQ(rows[1].name, "bert");
  EXPECT_EQ(rows[2].name, "bert+gpt2");
  const auto table = format_report_table(rows);
  EXPECT_NE(table.find("43.31"), std::string::npos);
  EXPECT_NE(table.find("43.30"), std::string::npos);
  EXPECT_NE(table.find("Zhao et al. (2018)"), std::string::npos);
}

TEST(CmdReport, ColumnsAlignWithMultibyteNames) {
  std::vector<ReportRow> rows = literature_rows();
  const auto lines = [](const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  };
  const auto table = lines(format_report_table(rows));
  const auto header_col = utf8_length(table[0].substr(0, table[0].find("SARI")));
  for (const auto& l : table) {
    if (l.empty() || l[0] == '-') continue;
    const auto pos = l.find_first_of("0123456789S", l.find(')') == std::string::npos ? 0 : l.find(')') + 1);
    ASSERT_NE(pos, std::string::npos) << l;
    EXPECT_EQ(utf8_length(l.substr(0, pos)), header_col) << l;
  }
}

}  // namespace
}  // namespace sentsimp
