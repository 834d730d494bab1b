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

#ifndef SENTSIMP_ERROR_H_
#define SENTSIMP_ERROR_H_

#include <stdexcept>
#include <string>

namespace sentsimp {

// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed inputs: corpus alignment, checkpoint layout, config syntax.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Caller broke an operation's precondition (bad shape, bad id, bad config).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a diverged training run.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sentsimp

#endif  // SENTSIMP_ERROR_H_
