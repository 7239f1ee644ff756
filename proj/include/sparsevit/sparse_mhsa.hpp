// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "sparsevit/attention.hpp"
#include "sparsevit/csr_matrix.hpp"
#include "sparsevit/dense_matrix.hpp"
#include "sparsevit/predictor.hpp"

namespace sparsevit {

/// Sparse attention distribution: same pattern as the connectivity mask,
/// stored values positive and summing to 1 per row (renormalized
/// semantics) or equal to the full softmax values at the kept positions
/// (masked semantics).
struct SparseAttention {
    CsrMatrix attn;
};

/// How masked-out logits are treated when normalizing.
///   kRenormalized     — softmax over the kept logits only; rows sum to 1.
///   kFullSoftmaxMasked — full-row softmax evaluated densely, then masked;
///                        rows sum to <= 1. Reference semantics for
///                        comparison, not a lean compute path.
enum class MaskedSoftmaxSemantics { kRenormalized, kFullSoftmaxMasked };

/// Computes <q_i, k_j>/sqrt(d_head) for exactly the stored entries of the
/// mask; no other dot product is formed (nnz(mask) * d_head MACs). The
/// output pattern equals the mask pattern even where a product is zero.
CsrMatrix masked_qk(const DenseMatrix& q, const DenseMatrix& k,
                    const ConnectivityMask& mask);

/// Max-stabilized softmax over each row's stored entries; the pattern is
/// preserved. Rejects rows with no stored entry.
SparseAttention sparse_row_softmax(const CsrMatrix& logits);

/// attn * v touching only stored entries (nnz(attn) * v.cols() MACs).
DenseMatrix sparse_attention_value(const SparseAttention& attn,
                                   const DenseMatrix& v);

/// Per-head work actually performed by the masked kernels, for
/// cross-checking against the analytic cost model.
struct HeadWorkStats {
    std::size_t mask_nnz = 0;
    std::size_t qk_macs = 0; // nnz * d_head
    std::size_t av_macs = 0; // nnz * d_head
};

/// Optional per-head intermediates captured for dumps and analysis.
struct SparseHeadDetail {
    DenseMatrix a_down;      // n x n_down low-rank attention
    CsrMatrix a_down_sparse; // thresholded low-rank attention
    ConnectivityMask mask;
    CsrMatrix attn; // sparse attention values on the mask pattern
};

struct SparseMhsaResult {
    DenseMatrix out; // n x d_model
    std::vector<ConnectivityMask> masks;
    std::vector<HeadWorkStats> stats;
};

/// Mask-predicted sparse MHSA. Per head: low-rank attention, thresholding,
/// mask prediction, masked QK, row softmax, sparse attention-value product;
/// head outputs are concatenated and projected by w_o. The predictor
/// parameters are shared across heads.
SparseMhsaResult sparse_multi_head_attention(
    const DenseMatrix& x, const std::vector<AttentionHeadParams>& heads,
    const PredictorParams& pred, const DenseMatrix& w_o,
    MaskedSoftmaxSemantics semantics = MaskedSoftmaxSemantics::kRenormalized,
    std::vector<SparseHeadDetail>* detail = nullptr);

} // namespace sparsevit
