/*
 * Copyright 2026 The lesionfuse Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace lesionfuse {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed manifest, config or checkpoint input.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by its arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Training diverged or could not start.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace lesionfuse
