// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pier {

// Invalid or inconsistent configuration (bad field value, size mismatch).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A collective or driver invariant was violated at run time.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a metric.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Training produced a NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace pier
