// Copyright 2026 The Derev Authors. All Rights Reserved.
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

#pragma once

#include <stdexcept>
#include <string>

namespace derev {

// Base class for every error raised by the toolkit. The CLI maps the
// subclasses onto distinct process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (window lengths, room geometry, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing, malformed or mismatched input data (WAV files, manifests, shapes).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses, infeasible acoustics and other numerical failures.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. calling backward() without a recorded forward pass.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace derev
