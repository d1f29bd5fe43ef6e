// Copyright 2026 The qsector Authors
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

namespace qsector {

// Every error raised by the library derives from Error. The CLI maps the
// categories onto exit codes: InputError -> 1, ValidationError and
// StructureError -> 2, NumericalError -> 3. AmbiguityError is an analysis
// outcome rather than bad input and maps to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class UnknownOutcomeError : public InputError {
 public:
  using InputError::InputError;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class StructureError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotPsdError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AmbiguityError : public Error {
 public:
  using Error::Error;
};

}  // namespace qsector
