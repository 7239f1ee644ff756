// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "sparsevit/csr_matrix.hpp"
#include "sparsevit/dense_matrix.hpp"

namespace sparsevit {

/// Parameters of the connectivity-mask predictor for one layer. w_down and
/// w_up are shared across the heads of the layer; the predicted mask is
/// per-head because each head has its own Q and K.
struct PredictorParams {
    DenseMatrix w_down; // n_down x n, projects keys along the token axis
    CsrMatrix w_up;     // n_down x n, sparse basis mapping scores back to n columns
    std::size_t n_down = 0;
    double tau = 0.0;      // threshold applied to the low-rank attention
    std::size_t budget = 0; // per-row cap B on mask entries

    void validate() const;
};

/// Binary n x n connectivity mask. Every stored value is exactly 1; each
/// row carries at least one entry (the diagonal is always present) and at
/// most `budget` entries.
struct ConnectivityMask {
    CsrMatrix mask;
    std::vector<std::size_t> budget_used; // nnz per row

    /// Throws if any mask invariant is violated for the given budget.
    void validate(std::size_t budget) const;
};

/// Low-rank attention approximation: softmax(Q (w_down K)^T / sqrt(d_head))
/// per row. q, k are n x d_head; the result is n x n_down and row-stochastic.
DenseMatrix lowrank_attention(const DenseMatrix& q, const DenseMatrix& k,
                              const PredictorParams& p);

/// Keeps entries strictly greater than tau. A row in which nothing clears
/// the threshold retains its single maximum entry (lowest column on ties)
/// so that downstream scoring never sees an empty row.
CsrMatrix sparsify_lowrank(const DenseMatrix& a_down, double tau);

/// Scores each row as a_down_sparse * w_up (sparse-sparse product), keeps
/// the top `budget` positive scores per row and binarizes them to 1. The
/// diagonal is force-inserted when absent: appended if the row is under
/// budget, otherwise it displaces the lowest-scoring selection.
ConnectivityMask predict_mask(const CsrMatrix& a_down_sparse,
                              const PredictorParams& p);

/// Budget B = ceil(keep_rate * n) for keep_rate in (0, 1].
std::size_t budget_from_keep_rate(double keep_rate, std::size_t n);

} // namespace sparsevit
