// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/csr_matrix.hpp"

#include <algorithm>
#include <cmath>

#include "sparsevit/check.hpp"

namespace sparsevit {

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols,
                     std::vector<std::size_t> row_ptr, std::vector<std::size_t> col_idx,
                     std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
    validate();
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
    CsrBuilder b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        b.push(i, 1.0);
        b.finish_row();
    }
    return b.build();
}

CsrMatrix CsrMatrix::from_dense(const DenseMatrix& a) {
    CsrBuilder b(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0.0) b.push(j, a(i, j));
        b.finish_row();
    }
    return b.build();
}

bool CsrMatrix::has_entry(std::size_t i, std::size_t j) const {
    const auto cols = row_cols(i);
    return std::binary_search(cols.begin(), cols.end(), j);
}

DenseMatrix CsrMatrix::to_dense() const {
    DenseMatrix out(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
        const auto cols = row_cols(i);
        const auto vals = row_vals(i);
        for (std::size_t t = 0; t < cols.size(); ++t) out(i, cols[t]) = vals[t];
    }
    return out;
}

void CsrMatrix::validate() const {
    require(row_ptr_.size() == rows_ + 1, "CsrMatrix: row_ptr length != rows+1");
    require(row_ptr_.front() == 0, "CsrMatrix: row_ptr[0] != 0");
    for (std::size_t i = 0; i < rows_; ++i)
        require(row_ptr_[i] <= row_ptr_[i + 1], "CsrMatrix: row_ptr decreases");
    require(row_ptr_.back() == col_idx_.size(), "CsrMatrix: row_ptr[rows] != nnz");
    require(values_.size() == col_idx_.size(),
            "CsrMatrix: values/col_idx length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) {
        const auto cols = row_cols(i);
        for (std::size_t t = 0; t < cols.size(); ++t) {
            require(cols[t] < cols_, "CsrMatrix: column index out of range");
            if (t > 0)
                require(cols[t - 1] < cols[t],
                        "CsrMatrix: columns not strictly increasing within row");
        }
    }
    for (double v : values_)
        require(std::isfinite(v), "CsrMatrix: non-finite stored value");
}

CsrBuilder::CsrBuilder(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_{0} {}

void CsrBuilder::push(std::size_t col, double value) {
    require(rows_done_ < rows_, "CsrBuilder: all rows already finished");
    require(col < cols_, "CsrBuilder: column index out of range");
    require(col_idx_.size() == row_ptr_.back() || col_idx_.back() < col,
            "CsrBuilder: columns must strictly increase within a row");
    col_idx_.push_back(col);
    values_.push_back(value);
}

void CsrBuilder::finish_row() {
    require(rows_done_ < rows_, "CsrBuilder: too many rows");
    row_ptr_.push_back(col_idx_.size());
    ++rows_done_;
}

CsrMatrix CsrBuilder::build() {
    require(rows_done_ == rows_, "CsrBuilder: not all rows finished");
    return CsrMatrix(rows_, cols_, std::move(row_ptr_), std::move(col_idx_),
                     std::move(values_));
}

std::vector<std::size_t> top_k_row(std::span<const std::size_t> cols,
                                   std::span<const double> vals, std::size_t k) {
    require(k >= 1, "top_k_row: k must be >= 1");
    require(cols.size() == vals.size(), "top_k_row: cols/vals length mismatch");

    std::vector<std::size_t> order;
    order.reserve(cols.size());
    for (std::size_t t = 0; t < vals.size(); ++t)
        if (vals[t] > 0.0) order.push_back(t);

    const std::size_t take = std::min(k, order.size());
    auto better = [&](std::size_t lhs, std::size_t rhs) {
        if (vals[lhs] != vals[rhs]) return vals[lhs] > vals[rhs];
        return cols[lhs] < cols[rhs];
    };
    std::partial_sort(order.begin(), order.begin() + take, order.end(), better);
    order.resize(take);

    std::vector<std::size_t> selected(take);
    for (std::size_t t = 0; t < take; ++t) selected[t] = cols[order[t]];
    std::sort(selected.begin(), selected.end());
    return selected;
}

CsrMatrix spsp_matmul(const CsrMatrix& a, const CsrMatrix& b) {
    require(a.cols() == b.rows(), "spsp_matmul: inner dimensions differ");

    CsrBuilder builder(a.rows(), b.cols());
    std::vector<double> acc(b.cols(), 0.0);
    std::vector<bool> touched(b.cols(), false);
    std::vector<std::size_t> touched_cols;
    touched_cols.reserve(b.cols());

    for (std::size_t i = 0; i < a.rows(); ++i) {
        touched_cols.clear();
        const auto a_cols = a.row_cols(i);
        const auto a_vals = a.row_vals(i);
        for (std::size_t t = 0; t < a_cols.size(); ++t) {
            const std::size_t k = a_cols[t];
            const double av = a_vals[t];
            const auto b_cols = b.row_cols(k);
            const auto b_vals = b.row_vals(k);
            for (std::size_t u = 0; u < b_cols.size(); ++u) {
                const std::size_t j = b_cols[u];
                if (!touched[j]) {
                    touched[j] = true;
                    touched_cols.push_back(j);
                }
                acc[j] += av * b_vals[u];
            }
        }
        std::sort(touched_cols.begin(), touched_cols.end());
        for (std::size_t j : touched_cols) {
            if (acc[j] != 0.0) builder.push(j, acc[j]);
            acc[j] = 0.0;
            touched[j] = false;
        }
        builder.finish_row();
    }
    return builder.build();
}

DenseMatrix sp_dense_matmul(const CsrMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), "sp_dense_matmul: inner dimensions differ");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out_row = out.row(i).data();
        const auto cols = a.row_cols(i);
        const auto vals = a.row_vals(i);
        for (std::size_t t = 0; t < cols.size(); ++t) {
            const double* b_row = b.row(cols[t]).data();
            const double av = vals[t];
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += av * b_row[j];
        }
    }
    return out;
}

} // namespace sparsevit
