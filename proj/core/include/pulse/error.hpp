// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pulse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced from finite inputs, or an argument outside an operation's domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient input data (CSV parsing, split sizes, windowing).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or incompatible checkpoint files.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace pulse
