/* Copyright 2026 The RePrompt Lab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef REPROMPT_ERRORS_HPP_
#define REPROMPT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace reprompt {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or unknown configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller-side contract was violated (bad arguments, missing inputs).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A required file (config, dataset, checkpoint) does not exist.
class MissingInputError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// Numerical failure during optimization (overflowed ratios and the like).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace reprompt

#endif  // REPROMPT_ERRORS_HPP_
