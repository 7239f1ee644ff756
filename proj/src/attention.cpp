// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/attention.hpp"

#include <cmath>

#include "sparsevit/check.hpp"

namespace sparsevit {

void AttentionHeadParams::validate() const {
    require(d_head >= 1, "AttentionHeadParams: d_head must be >= 1");
    require(w_q.cols() == d_head && w_k.cols() == d_head && w_v.cols() == d_head,
            "AttentionHeadParams: projection column count != d_head");
    require(w_q.rows() == w_k.rows() && w_q.rows() == w_v.rows(),
            "AttentionHeadParams: projections disagree on d_model");
}

AttentionHeadOutput naive_attention_head(const DenseMatrix& x,
                                         const AttentionHeadParams& p) {
    p.validate();
    require(x.cols() == p.w_q.rows(),
            "naive_attention_head: input width != projection rows");
    const DenseMatrix q = dense_matmul(x, p.w_q);
    const DenseMatrix k = dense_matmul(x, p.w_k);
    const DenseMatrix v = dense_matmul(x, p.w_v);
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.d_head));
    AttentionHeadOutput r;
    r.attn = softmax_rows(dense_matmul_nt(q, k), scale);
    r.out = dense_matmul(r.attn, v);
    return r;
}

DenseMatrix multi_head_attention(const DenseMatrix& x,
                                 const std::vector<AttentionHeadParams>& heads,
                                 const DenseMatrix& w_o,
                                 std::vector<DenseHeadDetail>* detail) {
    require(!heads.empty(), "multi_head_attention: no heads");
    std::size_t d_total = 0;
    for (const auto& h : heads) d_total += h.d_head;
    require(d_total == w_o.rows(),
            "multi_head_attention: w_o rows != sum of head dims");

    if (detail) detail->clear();
    std::vector<DenseMatrix> outs;
    outs.reserve(heads.size());
    for (const auto& h : heads) {
        if (detail) {
            h.validate();
            require(x.cols() == h.w_q.rows(),
                    "multi_head_attention: input width != projection rows");
            DenseHeadDetail d;
            d.q = dense_matmul(x, h.w_q);
            d.k = dense_matmul(x, h.w_k);
            const double scale = 1.0 / std::sqrt(static_cast<double>(h.d_head));
            d.attn = softmax_rows(dense_matmul_nt(d.q, d.k), scale);
            outs.push_back(dense_matmul(d.attn, dense_matmul(x, h.w_v)));
            detail->push_back(std::move(d));
        } else {
            outs.push_back(naive_attention_head(x, h).out);
        }
    }
    return dense_matmul(hconcat(outs), w_o);
}

void LinformerParams::validate() const {
    head.validate();
    require(e_proj.rows() == f_proj.rows() && e_proj.cols() == f_proj.cols(),
            "LinformerParams: e_proj and f_proj shapes differ");
    require(e_proj.rows() >= 1, "LinformerParams: n_down_lin must be >= 1");
}

DenseMatrix linformer_head(const DenseMatrix& x, const LinformerParams& p) {
    p.validate();
    require(x.cols() == p.head.w_q.rows(),
            "linformer_head: input width != projection rows");
    require(p.e_proj.cols() == x.rows(),
            "linformer_head: projection columns != token count");
    const DenseMatrix q = dense_matmul(x, p.head.w_q);
    const DenseMatrix k_proj = dense_matmul(p.e_proj, dense_matmul(x, p.head.w_k));
    const DenseMatrix v_proj = dense_matmul(p.f_proj, dense_matmul(x, p.head.w_v));
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.head.d_head));
    const DenseMatrix attn = softmax_rows(dense_matmul_nt(q, k_proj), scale);
    return dense_matmul(attn, v_proj);
}

} // namespace sparsevit
