// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sparsevit {

/// Row-major dense matrix of doubles; holds Q/K/V blocks, projections and
/// every other small dense operand in the engine.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b);

/// a * b^T without materializing the transpose. Both operands must share
/// their column count.
DenseMatrix dense_matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix transpose(const DenseMatrix& a);

/// Per-row softmax of scale*a with max-subtraction stabilization. Rows of
/// the output sum to 1; an all-equal row maps to the uniform row.
DenseMatrix softmax_rows(const DenseMatrix& a, double scale);

/// Concatenate blocks left-to-right. All blocks must share a row count.
DenseMatrix hconcat(const std::vector<DenseMatrix>& blocks);

double max_abs(const DenseMatrix& a);

/// max_ij |a_ij - b_ij| / max(max|a|, max|b|); 0 for two zero matrices.
double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b);

} // namespace sparsevit
