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

#ifndef SENTSIMP_CLI_H_
#define SENTSIMP_CLI_H_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentsimp/decode.h"
#include "sentsimp/error.h"
#include "sentsimp/sari.h"
#include "sentsimp/train.h"

namespace sentsimp {

// Bad flags, missing required settings, unparsable values. Exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Flat key=value settings. Later layers override earlier ones: defaults,
// then the --config file, then command-line flags.
class RunConfig {
 public:
  // Lines are `key=value`; blank lines and lines starting with '#' are
  // skipped.
  static RunConfig from_text(std::string_view text, const std::string& origin = "<text>");
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void set_default(const std::string& key, std::string value) { values_.emplace(key, std::move(value)); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  // Throws UsageError when the key is missing.
  const std::string& require(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback = {}) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;

  // Merges `other` on top of this.
  void overlay(const RunConfig& other);

  // Sorted key=value lines.
  std::string to_text() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Every setting `train` understands, with its default.
RunConfig train_defaults();
TrainConfig train_config_from(const RunConfig& cfg);
DecodeConfig decode_config_from(const RunConfig& cfg);

inline constexpr std::string_view kCheckpointFile = "checkpoint.ssck";
inline constexpr std::string_view kVocabFile = "vocab.txt";
inline constexpr std::string_view kHistoryFile = "history.tsv";
inline constexpr std::string_view kResolvedConfigFile = "resolved.cfg";
inline constexpr std::string_view kEvalJsonFile = "eval.json";
inline constexpr std::string_view kEvalTextFile = "eval.txt";
inline constexpr std::string_view kScoresFile = "scores.tsv";
inline constexpr std::string_view kHistogramFile = "histogram.tsv";

// Builds (toy) or loads the vocabulary, trains, and writes checkpoint,
// vocabulary, history TSV, corpus stats and resolved config under `out`.
// Returns the run directory.
std::string cmd_train(const RunConfig& cfg);

// Simplifies `input` one line at a time into `output`. Returns the output
// path.
std::string cmd_simplify(const RunConfig& cfg);

// Scores `system` against `eval`.src / `eval`.ref.*; writes the text and
// JSON reports, per-sentence scores and histogram under `out`.
CorpusSari cmd_eval(const RunConfig& cfg);

struct ReportRow {
  std::string name;
  std::optional<double> sari, add, del, keep;
  bool published = false;  // static literature entry
};

// Published comparison rows (SARI, ADD, DELETE, KEEP) on the Turk test set.
const std::vector<ReportRow>& literature_rows();
// Published rows for the four encoder/decoder pairings.
const std::vector<ReportRow>& published_variant_rows();

// One row per run directory with an eval.json (sorted by SARI, highest
// first), then the literature rows.
std::vector<ReportRow> cmd_report(const std::vector<std::string>& run_dirs);

std::string format_report_table(const std::vector<ReportRow>& rows);
std::string format_eval_text(const CorpusSari& result, std::size_t num_refs);
std::string eval_json(const CorpusSari& result, std::size_t num_refs);

// argv-level entry point. 0 success, 1 numeric failure, 2 usage or file
// errors.
int run_cli(int argc, char** argv);

}  // namespace sentsimp

#endif  // SENTSIMP_CLI_H_
