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

#ifndef SENTSIMP_TEXT_H_
#define SENTSIMP_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace sentsimp {

// Strips ASCII whitespace (including CR) from both ends.
std::string_view trim(std::string_view s);

bool is_valid_utf8(std::string_view s);

// Number of code points in valid UTF-8.
std::size_t utf8_length(std::string_view s);

// Shared surface rule for tokenizer and SARI: ASCII-lowercase, then split on
// runs of whitespace. Non-ASCII bytes pass through unchanged.
std::vector<std::string> split_lower(std::string_view text);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

// Reads a one-sentence-per-line text file. LF or CRLF; a final newline does
// not add an empty line. Throws IoError if the file cannot be opened and
// FormatError on invalid UTF-8.
std::vector<std::string> read_lines(const std::string& path);

void write_lines(const std::string& path, const std::vector<std::string>& lines);

}  // namespace sentsimp

#endif  // SENTSIMP_TEXT_H_
