// Copyright 2026 The kaprobe Authors
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

namespace kaprobe {

enum class ErrorCode {
  kLength = 1,
  kVersion,
  kMalformed,
  kDomain,
  kInput,
  kConfig,
  kUnknownProfile,
  kUnknownExperiment,
  kBind,
  kTransport,
};

const char* error_code_name(ErrorCode code);

// Base of every error raised by the library. The C API maps `code()` onto its
// status enumeration.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define KAPROBE_DEFINE_ERROR(Name, Code)                          \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(Code, what) {} \
  }

KAPROBE_DEFINE_ERROR(LengthError, ErrorCode::kLength);
KAPROBE_DEFINE_ERROR(VersionError, ErrorCode::kVersion);
KAPROBE_DEFINE_ERROR(MalformedError, ErrorCode::kMalformed);
KAPROBE_DEFINE_ERROR(DomainError, ErrorCode::kDomain);
KAPROBE_DEFINE_ERROR(InputError, ErrorCode::kInput);
KAPROBE_DEFINE_ERROR(ConfigError, ErrorCode::kConfig);
KAPROBE_DEFINE_ERROR(UnknownProfileError, ErrorCode::kUnknownProfile);
KAPROBE_DEFINE_ERROR(UnknownExperimentError, ErrorCode::kUnknownExperiment);
KAPROBE_DEFINE_ERROR(BindError, ErrorCode::kBind);
KAPROBE_DEFINE_ERROR(TransportError, ErrorCode::kTransport);

#undef KAPROBE_DEFINE_ERROR

}  // namespace kaprobe
