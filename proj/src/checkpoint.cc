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

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sentsimp/error.h"
#include "sentsimp/text.h"
#include "sentsimp/train.h"

namespace sentsimp {
namespace {

constexpr char kMagic[4] = {'S', 'S', 'C', 'K'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.append(c, n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError(path_ + ": truncated checkpoint");
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
T parse_number(std::string_view s, const std::string& what) {
  T out{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("checkpoint: bad value for " + what + ": '" + std::string(s) + "'");
  }
  return out;
}

std::string header_text(const Checkpoint& ckpt) {
  std::string text = ckpt.model.config().to_text();
  text += "vocab_path=" + ckpt.vocab.path + '\n';
  text += "vocab_entries=" + std::to_string(ckpt.vocab.size) + '\n';
  text += "vocab_fingerprint=" + std::to_string(ckpt.vocab.fingerprint) + '\n';
  text += "best_epoch=" + std::to_string(ckpt.history.best_epoch) + '\n';
  text += std::string("stopped_early=") + (ckpt.history.stopped_early ? "1" : "0") + '\n';
  for (const auto& e : ckpt.history.epochs) {
    text += "epoch=" + std::to_string(e.epoch) + ',' + fmt_double(e.train_loss) + ',' +
            fmt_double(e.valid_sari) + ',' + fmt_double(e.lr) + '\n';
  }
  return text;
}

void parse_header(std::string_view text, VocabRef& vocab, TrainHistory& history) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "vocab_path") {
      vocab.path = value;
    } else if (key == "vocab_entries") {
      vocab.size = parse_number<std::size_t>(value, key);
    } else if (key == "vocab_fingerprint") {
      vocab.fingerprint = parse_number<std::uint64_t>(value, key);
    } else if (key == "best_epoch") {
      history.best_epoch = parse_number<std::size_t>(value, key);
    } else if (key == "stopped_early") {
      history.stopped_early = value == "1";
    } else if (key == "epoch") {
      std::vector<std::string_view> parts;
      std::string_view rest = value;
      for (auto comma = rest.find(','); comma != std::string_view::npos; comma = rest.find(',')) {
        parts.push_back(rest.substr(0, comma));
        rest.remove_prefix(comma + 1);
      }
      parts.push_back(rest);
      if (parts.size() != 4) throw FormatError("checkpoint: malformed epoch record '" + value + "'");
      history.epochs.push_back({parse_number<std::size_t>(parts[0], key),
                                parse_number<double>(parts[1], key),
                                parse_number<double>(parts[2], key),
                                parse_number<double>(parts[3], key)});
    }
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  const std::string header = header_text(ckpt);
  w.u64(header.size());
  w.bytes(header.data(), header.size());
  const auto& params = ckpt.model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    const auto& shape = p.tensor.shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) w.u64(d);
    for (double v : p.tensor.data()) w.f64(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str(), path);

  if (r.bytes(4) != std::string(kMagic, 4)) {
    throw FormatError(path + ": not a checkpoint (bad magic bytes)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t header_len = r.u64();
  const std::string header = r.bytes(static_cast<std::size_t>(header_len));

  Checkpoint ckpt{Model(ModelConfig::from_text(header)), {}, {}};
  parse_header(header, ckpt.vocab, ckpt.history);

  const auto& params = ckpt.model.parameters();
  const std::uint32_t count = r.u32();
  if (count != params.size()) {
    throw FormatError(path + ": checkpoint has " + std::to_string(count) +
                      " tensors, config implies " + std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const std::string name = r.bytes(r.u32());
    if (name != p.name) {
      throw FormatError(path + ": expected tensor '" + p.name + "', found '" + name + "'");
    }
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
    if (shape != p.tensor.shape()) {
      throw FormatError(path + ": tensor '" + name + "' has shape " + shape_to_string(shape) +
                        ", expected " + shape_to_string(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    r.need(t.numel() * 8);
    for (double& v : t.mutable_data()) v = r.f64();
  }
  if (!r.at_end()) throw FormatError(path + ": trailing bytes after last tensor");
  return ckpt;
}

Vocabulary load_checkpoint_vocab(const Checkpoint& ckpt, const std::string& checkpoint_path,
                                 const std::string& override_path) {
  std::string path = override_path;
  if (path.empty()) {
    if (ckpt.vocab.path.empty()) throw FormatError(checkpoint_path + ": no vocabulary reference");
    path = (std::filesystem::path(checkpoint_path).parent_path() / ckpt.vocab.path).string();
  }
  Vocabulary vocab = Vocabulary::load(path);
  if (vocab.size() != ckpt.vocab.size || vocab.fingerprint() != ckpt.vocab.fingerprint) {
    throw FormatError("checkpoint/vocab mismatch: " + checkpoint_path + " expects " +
                      std::to_string(ckpt.vocab.size) + " tokens (fingerprint " +
                      std::to_string(ckpt.vocab.fingerprint) + "), " + path + " has " +
                      std::to_string(vocab.size()) + " (fingerprint " +
                      std::to_string(vocab.fingerprint()) + ")");
  }
  return vocab;
}

}  // namespace sentsimp
