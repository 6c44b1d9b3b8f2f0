// Copyright 2026 The flowfid Authors
// SPDX-License-Identifier: Apache-2.0
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

#ifndef FLOWFID_ERROR_HPP_
#define FLOWFID_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace flowfid {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible extents, ranks or channel counts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input outside an operation's mathematical domain (log of a non-positive
// value, division by zero, zero ActNorm scale, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An operation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed files: checkpoints, PNGs, configs, manifests.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowfid

#endif  // FLOWFID_ERROR_HPP_
