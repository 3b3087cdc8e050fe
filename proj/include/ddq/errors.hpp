// Copyright 2026 The ddq Authors
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

namespace ddq {

/// Base of all library errors. Each subclass maps onto one CLI exit code.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or invalid argument to a public entry point.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Failure while building or executing a pulse sequence.
class SimulationError : public Error {
  public:
    using Error::Error;
};

/// Sequence DSL syntax or semantic error, with a 1-based source position.
class ParseError : public SimulationError {
  public:
    ParseError(int line, int column, const std::string &message)
        : SimulationError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
          line_(line),
          column_(column) {
    }
    int line() const {
        return line_;
    }
    int column() const {
        return column_;
    }

  private:
    int line_;
    int column_;
};

/// Failure of a statistical fit.
class FitError : public Error {
  public:
    using Error::Error;
};

/// All counts are 0 or n (or the fringe is flat): phase/contrast unidentifiable.
class DegenerateDataError : public FitError {
  public:
    using FitError::FitError;
};

class NonConvergenceError : public FitError {
  public:
    using FitError::FitError;
};

class NonIdentifiableError : public FitError {
  public:
    using FitError::FitError;
};

}  // namespace ddq
