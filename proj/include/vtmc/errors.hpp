// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vtmc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (includes variant/input mismatches).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// An operation was called in the wrong lifecycle state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

/// File system failures; the message always carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Not enough negative audio to estimate the requested operating point.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace vtmc
