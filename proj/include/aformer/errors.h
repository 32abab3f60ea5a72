// Copyright (c) 2026 Aformer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFORMER_ERRORS_H_
#define AFORMER_ERRORS_H_

#include <stdexcept>
#include <string>

namespace aformer {

// Error categories. The CLI maps each category onto a distinct exit code.
enum class ErrorKind {
  kDimension,
  kNumeric,
  kContract,
  kInfeasible,
  kConfig,
  kData,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w)
      : Error(ErrorKind::kDimension, w) {}
};

// NaN/Inf detected at a check barrier.
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::kNumeric, w) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& w)
      : Error(ErrorKind::kContract, w) {}
};

// A CTC target that no alignment can produce within the available frames.
struct InfeasibleError : Error {
  explicit InfeasibleError(const std::string& w)
      : Error(ErrorKind::kInfeasible, w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, w) {}
};

// Corpus / checkpoint container problems. `reason` distinguishes them.
struct DataError : Error {
  enum class Reason { kMagic, kTruncated, kIntegrity, kVocab, kOther };
  DataError(Reason reason, const std::string& w)
      : Error(ErrorKind::kData, w), reason(reason) {}
  Reason reason;
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};

}  // namespace aformer

#endif  // AFORMER_ERRORS_H_
