// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace skelmax {

/// Malformed parameters or files (the CLI maps these to exit code 2).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Well-formed input on which an operation is undefined, e.g. a degenerate
/// box or a weight vanishing on a skeleton.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace skelmax
