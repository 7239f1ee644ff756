// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "sparsevit/dense_matrix.hpp"

namespace sparsevit {

/// Per-head query/key/value projections, each d_model x d_head.
struct AttentionHeadParams {
    DenseMatrix w_q;
    DenseMatrix w_k;
    DenseMatrix w_v;
    std::size_t d_head = 0;

    void validate() const;
};

struct AttentionHeadOutput {
    DenseMatrix attn; // n x n, rows sum to 1
    DenseMatrix out;  // n x d_head
};

/// Full-attention reference head: A = softmax(QK^T / sqrt(d_head)),
/// out = A V. The dense oracle every sparse path is checked against.
AttentionHeadOutput naive_attention_head(const DenseMatrix& x,
                                         const AttentionHeadParams& p);

/// Captures per-head intermediates of the dense path when requested
/// (teacher extraction, attention dumps).
struct DenseHeadDetail {
    DenseMatrix q;
    DenseMatrix k;
    DenseMatrix attn;
};

/// Concatenates the per-head outputs and applies the output projection.
/// w_o must have sum(d_head) rows.
DenseMatrix multi_head_attention(const DenseMatrix& x,
                                 const std::vector<AttentionHeadParams>& heads,
                                 const DenseMatrix& w_o,
                                 std::vector<DenseHeadDetail>* detail = nullptr);

/// Low-rank baseline: key and value token dimensions are projected down to
/// n_down_lin rows before attention, so the attention matrix itself is
/// n x n_down_lin.
struct LinformerParams {
    AttentionHeadParams head;
    DenseMatrix e_proj; // n_down_lin x n, applied to K
    DenseMatrix f_proj; // n_down_lin x n, applied to V

    void validate() const;
};

/// out = softmax(Q (E K)^T / sqrt(d_head)) * (F V); n x d_head.
DenseMatrix linformer_head(const DenseMatrix& x, const LinformerParams& p);

} // namespace sparsevit
