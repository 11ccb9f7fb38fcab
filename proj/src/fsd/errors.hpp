// Copyright 2026 The fsdbench Authors. All Rights Reserved.
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

namespace fsd {

// Root of every error thrown by the library. The C API maps each subclass to
// a status code, which the CLI turns into its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// log of a non-positive value, sqrt of a negative value, ...
class DomainError : public Error {
 public:
  using Error::Error;
};

// An operation produced NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// HSIC denominator of a CKA term fell below the degeneracy threshold.
class DegenerateFeatures : public Error {
 public:
  using Error::Error;
};

// Every sample of a batch was degenerate for the per-sample CKA.
class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

// Misuse of the autodiff tape (double backward, non-scalar root, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration, flag or argument.
class UsageError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage ran before the stage it depends on.
class DependencyError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset / checkpoint / CSV input.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsd
