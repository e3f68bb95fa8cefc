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

#include "copyptr/error.hpp"

namespace copyptr {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kUnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorCode::kAlternationViolation: return "AlternationViolation";
    case ErrorCode::kTokenOutsideTree: return "TokenOutsideTree";
    case ErrorCode::kInvalidLabel: return "InvalidLabel";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnknownDomain: return "UnknownDomain";
    case ErrorCode::kInvalidSpis: return "InvalidSpis";
    case ErrorCode::kTokenNotInSource: return "TokenNotInSource";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNumericalOverflow: return "NumericalOverflow";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kGraphReuse: return "GraphReuse";
    case ErrorCode::kTargetSourceMismatch: return "TargetSourceMismatch";
    case ErrorCode::kInvalidPreviousSymbol: return "InvalidPreviousSymbol";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kBatchCountMismatch: return "BatchCountMismatch";
    case ErrorCode::kDomainMismatch: return "DomainMismatch";
    case ErrorCode::kUnknownRegime: return "UnknownRegime";
    case ErrorCode::kCheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           int line) {
  std::string out = error_code_name(code);
  if (line > 0) out += " (line " + std::to_string(line) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, int line)
    : std::runtime_error(format_message(code, message, line)),
      code_(code),
      line_(line) {}

}  // namespace copyptr
