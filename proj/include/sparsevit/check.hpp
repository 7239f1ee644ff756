// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sparsevit {

/// Thrown when an operation rejects its input (dimension mismatch, bad
/// hyperparameter, malformed sparse structure).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation produces non-finite values where finite ones
/// are required (e.g. a training step about to apply a NaN gradient).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidArgument(message);
}

} // namespace sparsevit
