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

#include "kaprobe/errors.hpp"

namespace kaprobe {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kLength: return "LengthError";
    case ErrorCode::kVersion: return "VersionError";
    case ErrorCode::kMalformed: return "MalformedError";
    case ErrorCode::kDomain: return "DomainError";
    case ErrorCode::kInput: return "InputError";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kUnknownProfile: return "UnknownProfile";
    case ErrorCode::kUnknownExperiment: return "UnknownExperiment";
    case ErrorCode::kBind: return "BindError";
    case ErrorCode::kTransport: return "TransportError";
  }
  return "Error";
}

}  // namespace kaprobe
