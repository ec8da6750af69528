// Copyright 2026 The cawa-field Authors
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cawa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the mathematical domain of an operation
// (non-finite position, out-of-range grid coordinate, ...).
class InputDomainError : public Error {
 public:
  using Error::Error;
};

// Caller broke a structural contract: mismatched shapes, incompatible
// artifacts, invalid configuration.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A serialized artifact could not be decoded.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Quantized indices that do not fit the container's i16 slots.
class IndexOverflowError : public Error {
 public:
  explicit IndexOverflowError(std::size_t count)
      : Error(std::to_string(count) +
              " quantized indices overflow the 16-bit container range"),
        count_(count) {}
  std::size_t count() const { return count_; }

 private:
  std::size_t count_;
};

}  // namespace cawa
