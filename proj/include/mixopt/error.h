/*
 * Copyright 2026 The mixopt Authors.
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

#ifndef MIXOPT_ERROR_H_
#define MIXOPT_ERROR_H_

#include <stdexcept>
#include <string>

namespace mixopt {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent inputs (dimension mismatch, bad tables, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Numerical failure during fitting or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// File missing, unreadable, or not in the expected format.
class IoError : public Error {
 public:
  using Error::Error;
};

// Run configuration invalid; the message names the offending key or path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mixopt

#endif  // MIXOPT_ERROR_H_
