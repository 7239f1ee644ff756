// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

#include "sparsevit/dense_matrix.hpp"
#include "sparsevit/vit.hpp"

namespace sparsevit {

/// Thrown on unreadable, unwritable or malformed pixmap files.
class PnmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads a binary RGB pixmap (P6, maxval <= 255) into [0,1] doubles.
Image read_ppm(const std::string& path);

void write_ppm(const Image& image, const std::string& path);

/// Writes a binary graymap (P5) of the matrix with linear min-max scaling
/// to 0..255 per image; a constant matrix maps to all zeros.
void write_pgm(const DenseMatrix& values, const std::string& path);

} // namespace sparsevit
