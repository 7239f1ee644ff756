// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/sparse_mhsa.hpp"

#include <cmath>
#include <limits>

#include "sparsevit/check.hpp"

namespace sparsevit {

CsrMatrix masked_qk(const DenseMatrix& q, const DenseMatrix& k,
                    const ConnectivityMask& mask) {
    require(q.cols() == k.cols(), "masked_qk: q and k disagree on d_head");
    require(q.rows() == k.rows(), "masked_qk: q and k disagree on token count");
    require(mask.mask.rows() == q.rows() && mask.mask.cols() == k.rows(),
            "masked_qk: mask shape != n x n");
    const std::size_t d = q.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    std::vector<double> vals(mask.mask.nnz());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < mask.mask.rows(); ++i) {
        const auto qi = q.row(i);
        for (std::size_t j : mask.mask.row_cols(i)) {
            const auto kj = k.row(j);
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) acc += qi[t] * kj[t];
            vals[pos++] = acc * scale;
        }
    }
    return CsrMatrix(mask.mask.rows(), mask.mask.cols(), mask.mask.row_ptr(),
                     mask.mask.col_idx(), std::move(vals));
}

SparseAttention sparse_row_softmax(const CsrMatrix& logits) {
    CsrMatrix out = logits;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto vals = out.row_vals(i);
        require(!vals.empty(), "sparse_row_softmax: row has no stored entry");
        double m = -std::numeric_limits<double>::infinity();
        for (double v : vals) m = std::max(m, v);
        double sum = 0.0;
        for (double& v : vals) {
            v = std::exp(v - m);
            sum += v;
        }
        for (double& v : vals) v /= sum;
    }
    return SparseAttention{std::move(out)};
}

DenseMatrix sparse_attention_value(const SparseAttention& attn,
                                   const DenseMatrix& v) {
    return sp_dense_matmul(attn.attn, v);
}

namespace {

// Reference masked semantics: dense full-row softmax gathered at the mask
// pattern, values left unnormalized over the kept support.
CsrMatrix full_softmax_masked(const DenseMatrix& q, const DenseMatrix& k,
                              const ConnectivityMask& mask) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    const DenseMatrix a = softmax_rows(dense_matmul_nt(q, k), scale);
    std::vector<double> vals(mask.mask.nnz());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < mask.mask.rows(); ++i)
        for (std::size_t j : mask.mask.row_cols(i)) vals[pos++] = a(i, j);
    return CsrMatrix(mask.mask.rows(), mask.mask.cols(), mask.mask.row_ptr(),
                     mask.mask.col_idx(), std::move(vals));
}

} // namespace

SparseMhsaResult sparse_multi_head_attention(
    const DenseMatrix& x, const std::vector<AttentionHeadParams>& heads,
    const PredictorParams& pred, const DenseMatrix& w_o,
    MaskedSoftmaxSemantics semantics, std::vector<SparseHeadDetail>* detail) {
    require(!heads.empty(), "sparse_multi_head_attention: no heads");
    pred.validate();
    std::size_t d_total = 0;
    for (const auto& h : heads) d_total += h.d_head;
    require(d_total == w_o.rows(),
            "sparse_multi_head_attention: w_o rows != sum of head dims");

    if (detail) detail->clear();
    SparseMhsaResult r;
    std::vector<DenseMatrix> outs;
    outs.reserve(heads.size());
    for (const auto& h : heads) {
        h.validate();
        require(x.cols() == h.w_q.rows(),
                "sparse_multi_head_attention: input width != projection rows");
        const DenseMatrix q = dense_matmul(x, h.w_q);
        const DenseMatrix k = dense_matmul(x, h.w_k);
        const DenseMatrix v = dense_matmul(x, h.w_v);

        DenseMatrix a_down = lowrank_attention(q, k, pred);
        CsrMatrix a_down_sparse = sparsify_lowrank(a_down, pred.tau);
        ConnectivityMask mask = predict_mask(a_down_sparse, pred);

        SparseAttention attn =
            semantics == MaskedSoftmaxSemantics::kRenormalized
                ? sparse_row_softmax(masked_qk(q, k, mask))
                : SparseAttention{full_softmax_masked(q, k, mask)};
        outs.push_back(sparse_attention_value(attn, v));

        HeadWorkStats stats;
        stats.mask_nnz = mask.mask.nnz();
        stats.qk_macs = stats.mask_nnz * h.d_head;
        stats.av_macs = stats.mask_nnz * h.d_head;
        r.stats.push_back(stats);

        if (detail) {
            SparseHeadDetail d;
            d.a_down = a_down;
            d.a_down_sparse = a_down_sparse;
            d.mask = mask;
            d.attn = attn.attn;
            detail->push_back(std::move(d));
        }
        r.masks.push_back(std::move(mask));
    }
    r.out = dense_matmul(hconcat(outs), w_o);
    return r;
}

} // namespace sparsevit
