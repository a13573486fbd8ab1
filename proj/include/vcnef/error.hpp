// Copyright 2026 The VCNeF Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace vcnef {

/// Error categories. The numeric values are shared with the C API status
/// codes in vcnef.h, keep both in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kShape = 2,
  kNonFinite = 3,
  kIo = 4,
  kBadMagic = 5,
  kTruncated = 6,
  kMetadata = 7,
  kVersion = 8,
  kConfig = 9,
  kCfl = 10,
  kMismatch = 11,
  kInternal = 12,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vcnef
