// Copyright 2026 The fsclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fsc {

enum class ErrorCode {
  ShapeMismatch,
  DomainError,
  NotScalar,
  DetachedTensor,
  MissingEOS,
  UnknownWord,
  BatchTooSmall,
  AllInvalid,
  NoValidTokens,
  DegenerateP,
  DuplicateClass,
  EmptySuite,
  KTooLarge,
  CellCollision,
  Divergence,
  StructureMismatch,
  CorruptFile,
  ConfigError,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::DetachedTensor: return "DetachedTensor";
    case ErrorCode::MissingEOS: return "MissingEOS";
    case ErrorCode::UnknownWord: return "UnknownWord";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::AllInvalid: return "AllInvalid";
    case ErrorCode::NoValidTokens: return "NoValidTokens";
    case ErrorCode::DegenerateP: return "DegenerateP";
    case ErrorCode::DuplicateClass: return "DuplicateClass";
    case ErrorCode::EmptySuite: return "EmptySuite";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::CellCollision: return "CellCollision";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::StructureMismatch: return "StructureMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace fsc
