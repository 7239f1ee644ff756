// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/dense_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sparsevit/check.hpp"

namespace sparsevit {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_,
            "DenseMatrix: data length does not match rows*cols");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), "dense_matmul: inner dimensions differ");
    DenseMatrix out(a.rows(), b.cols());
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out_row = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* b_row = b.row(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

DenseMatrix dense_matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.cols(), "dense_matmul_nt: column counts differ");
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* a_row = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* b_row = b.row(j).data();
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a_row[k] * b_row[k];
            out(i, j) = acc;
        }
    }
    return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

DenseMatrix softmax_rows(const DenseMatrix& a, double scale) {
    require(a.rows() > 0 && a.cols() > 0, "softmax_rows: empty input");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto in_row = a.row(i);
        auto out_row = out.row(i);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (double v : in_row) max_logit = std::max(max_logit, scale * v);
        double sum = 0.0;
        for (std::size_t j = 0; j < in_row.size(); ++j) {
            const double e = std::exp(scale * in_row[j] - max_logit);
            out_row[j] = e;
            sum += e;
        }
        for (double& v : out_row) v /= sum;
    }
    return out;
}

DenseMatrix hconcat(const std::vector<DenseMatrix>& blocks) {
    require(!blocks.empty(), "hconcat: no blocks");
    const std::size_t rows = blocks.front().rows();
    std::size_t cols = 0;
    for (const auto& b : blocks) {
        require(b.rows() == rows, "hconcat: row counts differ");
        cols += b.cols();
    }
    DenseMatrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t offset = 0;
        for (const auto& b : blocks) {
            const auto src = b.row(i);
            std::copy(src.begin(), src.end(), out.row(i).data() + offset);
            offset += b.cols();
        }
    }
    return out;
}

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(),
            "max_rel_diff: shape mismatch");
    const double scale = std::max(max_abs(a), max_abs(b));
    if (scale == 0.0) return 0.0;
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m / scale;
}

} // namespace sparsevit
