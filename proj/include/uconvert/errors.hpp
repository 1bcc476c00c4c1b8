// Copyright 2026 The U-Convert Authors. All Rights Reserved.
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

namespace uconvert {

/// Base of every error raised by the library. Messages are single-line and
/// start with a stable reason phrase so callers (and the CLI) can grep them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter or configuration outside its documented domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor or volume geometry that an operation cannot accept.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (MVOL, manifest, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised when optimisation produces a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace uconvert
