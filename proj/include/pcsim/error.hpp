// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <stdexcept>
#include <string>

namespace pcsim {

/// Operand or tensor extents do not line up.
class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A file or document does not conform to its format.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Invalid configuration value.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace pcsim
