// Copyright 2026 The xmodal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XMODAL_ERROR_H_
#define XMODAL_ERROR_H_

#include <stdexcept>
#include <string>

namespace xmodal {

// Failure categories. The CLI maps these onto its exit codes.
enum class ErrorKind {
  kInvalidArgument,  // violated precondition of a library call
  kConfig,           // malformed or inconsistent configuration
  kNumerical,        // NaN/Inf encountered during training or evaluation
  kIo,               // unreadable or unwritable file
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(const std::string& what) {
  throw Error(ErrorKind::kInvalidArgument, what);
}

inline void Check(bool condition, const char* what) {
  if (!condition) Fail(what);
}

// Overflow or NaN met during a computation.
inline void CheckFinite(bool condition, const char* what) {
  if (!condition) throw Error(ErrorKind::kNumerical, what);
}

}  // namespace xmodal

#endif  // XMODAL_ERROR_H_
