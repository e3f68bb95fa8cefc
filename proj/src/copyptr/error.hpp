// Copyright 2026 The copyptr Authors.
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

#ifndef COPYPTR_ERROR_HPP_
#define COPYPTR_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace copyptr {

enum class ErrorCode {
  // tree
  kEmptyInput,
  kUnbalancedBrackets,
  kAlternationViolation,
  kTokenOutsideTree,
  kInvalidLabel,
  // corpus
  kEmptyCorpus,
  kFileNotFound,
  kMalformedRecord,
  kParseError,
  kUnknownDomain,
  kInvalidSpis,
  kTokenNotInSource,
  // diffcore
  kShapeMismatch,
  kNumericalOverflow,
  kNonScalarLoss,
  kGraphReuse,
  // model
  kTargetSourceMismatch,
  kInvalidPreviousSymbol,
  kInvalidConfig,
  // train
  kDivergedLoss,
  kBatchCountMismatch,
  kDomainMismatch,
  kUnknownRegime,
  // checkpoints and files
  kCheckpointMismatch,
  kIo,
};

const char* error_code_name(ErrorCode code);

// All failures inside the library are reported with this exception. `line`
// is the 1-based input line for file-level errors, 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int line = 0);

  ErrorCode code() const { return code_; }
  int line() const { return line_; }

 private:
  ErrorCode code_;
  int line_;
};

}  // namespace copyptr

#endif  // COPYPTR_ERROR_HPP_
