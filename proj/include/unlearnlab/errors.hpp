//
// Copyright 2026 The UnlearnLab Authors
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
//

#pragma once

#include <stdexcept>
#include <string>

namespace unlearnlab {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidIdError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericsError : public Error {
 public:
  using Error::Error;
};

class InsufficientTokensError : public Error {
 public:
  using Error::Error;
};

/// Transport-level endpoint failure (timeouts, 5xx after retries).
class EndpointError : public Error {
 public:
  EndpointError(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  explicit EndpointError(const std::string& what) : Error(what) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_ = 0;
};

/// Non-retryable 4xx response.
class ClientError : public Error {
 public:
  using Error::Error;
};

class EmptyRewriteError : public Error {
 public:
  using Error::Error;
};

class DegenerateGenerationError : public Error {
 public:
  using Error::Error;
};

class JudgeParseError : public Error {
 public:
  using Error::Error;
};

class FixtureError : public Error {
 public:
  using Error::Error;
};

}  // namespace unlearnlab
