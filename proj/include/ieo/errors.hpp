// Copyright 2026 The ieo-pdm Authors
//
//    Licensed under the Apache License, Version 2.0 (the "License");
//    you may not use this file except in compliance with the License.
//    You may obtain a copy of the License at
//
//        http://www.apache.org/licenses/LICENSE-2.0
//
//    Unless required by applicable law or agreed to in writing, software
//    distributed under the License is distributed on an "AS IS" BASIS,
//    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//    See the License for the specific language governing permissions and
//    limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ieo {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

/// A value left the finite range (overflow, NaN, non-finite activation).
class NumericError : public Error {
 public:
    explicit NumericError(const std::string& what, std::ptrdiff_t layer = -1)
        : Error(what), layer_(layer) {}

    /// Index of the network layer that produced the value, or -1.
    std::ptrdiff_t layer() const noexcept { return layer_; }

 private:
    std::ptrdiff_t layer_;
};

/// An argument violates an operation's precondition.
class DomainError : public Error {
 public:
    using Error::Error;
};

/// Discretization produced no probability mass at all.
class DegenerateDistributionError : public Error {
 public:
    using Error::Error;
};

/// Cross entropy against a distribution that is zero where the reference is not.
class InfiniteDivergenceError : public Error {
 public:
    using Error::Error;
};

/// No feasible window satisfies the quantile constraint.
class InfeasibleError : public Error {
 public:
    using Error::Error;
};

/// Invalid configuration (shapes, hyperparameters, sensor selection).
class ConfigError : public Error {
 public:
    using Error::Error;
};

class ParseError : public Error {
 public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

 private:
    std::size_t line_;
};

/// A training loss or gradient became non-finite.
class TrainingDivergedError : public Error {
 public:
    TrainingDivergedError(const std::string& what, std::size_t step)
        : Error("step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

 private:
    std::size_t step_;
};

}  // namespace ieo
