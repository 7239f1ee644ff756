// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparsevit/dense_matrix.hpp"

namespace sparsevit {

/// Compressed sparse row matrix. Stores the connectivity mask, the
/// sparsified low-rank attention, the up-projection basis and the
/// reconstructed sparse attention.
///
/// Structural invariants (enforced by validate()):
///   - row_ptr has rows+1 entries, non-decreasing, row_ptr[0] == 0,
///     row_ptr[rows] == nnz
///   - column indices strictly increase within each row and are < cols
///   - values has exactly nnz finite entries
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
              std::vector<std::size_t> col_idx, std::vector<double> values);

    static CsrMatrix identity(std::size_t n);
    /// Builds a CSR copy of `a`, dropping exact zeros.
    static CsrMatrix from_dense(const DenseMatrix& a);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }
    std::size_t row_nnz(std::size_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

    const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    std::span<const std::size_t> row_cols(std::size_t i) const {
        return {col_idx_.data() + row_ptr_[i], row_nnz(i)};
    }
    std::span<const double> row_vals(std::size_t i) const {
        return {values_.data() + row_ptr_[i], row_nnz(i)};
    }
    std::span<double> row_vals(std::size_t i) {
        return {values_.data() + row_ptr_[i], row_nnz(i)};
    }

    bool has_entry(std::size_t i, std::size_t j) const;

    double density() const {
        return rows_ == 0 || cols_ == 0
                   ? 0.0
                   : static_cast<double>(nnz()) / (static_cast<double>(rows_) * cols_);
    }

    DenseMatrix to_dense() const;

    /// Throws InvalidArgument if any structural invariant is broken.
    void validate() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

/// Incremental row-by-row CSR assembly. Entries must be pushed with
/// strictly increasing columns inside each row.
class CsrBuilder {
public:
    CsrBuilder(std::size_t rows, std::size_t cols);

    void push(std::size_t col, double value);
    void finish_row();
    CsrMatrix build();

private:
    std::size_t rows_;
    std::size_t cols_;
    std::size_t rows_done_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

/// Indices of the min(k, #positive entries) largest stored values of a
/// sparse row. Ties break toward the smaller column index; zero and
/// negative values are never selected. The result is sorted by column.
std::vector<std::size_t> top_k_row(std::span<const std::size_t> cols,
                                   std::span<const double> vals, std::size_t k);

/// Sparse-sparse product a*b. Work is proportional to the sum over a's
/// nonzeros of the matching b-row sizes; entries that cancel to exactly
/// zero are dropped from the result.
CsrMatrix spsp_matmul(const CsrMatrix& a, const CsrMatrix& b);

/// Sparse-dense product touching only a's stored entries
/// (nnz(a) * b.cols() multiply-accumulates).
DenseMatrix sp_dense_matmul(const CsrMatrix& a, const DenseMatrix& b);

} // namespace sparsevit
