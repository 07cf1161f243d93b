// Copyright 2026 The penaltydp Authors
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

#ifndef PENALTYDP_ERRORS_HPP_
#define PENALTYDP_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace penaltydp {

// Bad user-supplied configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad data encountered at run time, e.g. records outside the declared
// bounds or malformed CSV (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Multi-party protocol violations and exhausted retries (CLI exit code 4).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed wire frame; carries the byte offset of the failure.
struct DecodeError : ProtocolError {
  DecodeError(const std::string& msg, std::size_t offset)
      : ProtocolError(msg + " (byte " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

}  // namespace penaltydp

#endif  // PENALTYDP_ERRORS_HPP_
