/*
 * Copyright 2026 raes authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
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

namespace raes {

/// Base class of every library error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix/vector dimensions. Message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (negative learning rate, bad fold index, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that violates a domain invariant (score out of range, empty essay).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file structure (missing TSV column, bad header).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Token id outside the vocabulary.
class VocabError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint header does not match the expected model dimensions.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Degenerate numeric input: zero-norm vector, undefined kappa,
/// zero-variance differences in a paired test.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// A loss function re-evaluated to a different value during a gradient check.
class DeterminismError : public Error {
 public:
  using Error::Error;
};

/// Operation does not apply to the given rubric group or data.
class NotApplicableError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened or read.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace raes
