// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "oracles.hpp"
#include "sparsevit/attention.hpp"
#include "sparsevit/check.hpp"
#include "sparsevit/csr_matrix.hpp"
#include "sparsevit/dense_matrix.hpp"
#include "sparsevit/predictor.hpp"
#include "sparsevit/rng.hpp"
#include "sparsevit/sparse_mhsa.hpp"

using namespace sparsevit;

namespace {

AttentionHeadParams random_head(Rng& rng, std::size_t d_model,
                                std::size_t d_head) {
    AttentionHeadParams p;
    p.w_q = oracles::random_matrix(rng, d_model, d_head);
    p.w_k = oracles::random_matrix(rng, d_model, d_head);
    p.w_v = oracles::random_matrix(rng, d_model, d_head);
    p.d_head = d_head;
    return p;
}

// Predictor with a dense strictly positive basis: every column scores
// positive, so each mask row saturates its budget.
PredictorParams saturating_predictor(Rng& rng, std::size_t n,
                                     std::size_t n_down, std::size_t budget) {
    PredictorParams p;
    p.w_down = oracles::random_matrix(rng, n_down, n);
    DenseMatrix up(n_down, n);
    for (std::size_t i = 0; i < up.size(); ++i)
        up.data()[i] = 0.1 + 0.9 * rng.uniform01();
    p.w_up = CsrMatrix::from_dense(up);
    p.n_down = n_down;
    p.tau = 0.5; // anything in (0,1) works; fallback keeps rows non-empty
    p.budget = budget;
    p.validate();
    return p;
}

ConnectivityMask full_mask(std::size_t n) {
    CsrBuilder b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) b.push(j, 1.0);
        b.finish_row();
    }
    ConnectivityMask m;
    m.mask = b.build();
    m.budget_used.assign(n, n);
    return m;
}

ConnectivityMask diagonal_mask(std::size_t n) {
    ConnectivityMask m;
    m.mask = CsrMatrix::identity(n);
    m.budget_used.assign(n, 1);
    return m;
}

} // namespace

TEST_CASE("masked_qk: full mask reproduces all scaled dot products") {
    Rng rng(60);
    const std::size_t n = 6, d = 4;
    const DenseMatrix q = oracles::random_matrix(rng, n, d);
    const DenseMatrix k = oracles::random_matrix(rng, n, d);
    const CsrMatrix logits = masked_qk(q, k, full_mask(n));
    const DenseMatrix ref = oracles::matmul(q, oracles::transpose(k));
    const double scale = 1.0 / std::sqrt(double(d));
    const DenseMatrix got = logits.to_dense();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            CHECK(got(i, j) == doctest::Approx(ref(i, j) * scale).epsilon(1e-12));
}

TEST_CASE("masked_qk: diagonal mask computes only self scores") {
    Rng rng(61);
    const std::size_t n = 5, d = 3;
    const DenseMatrix q = oracles::random_matrix(rng, n, d);
    const DenseMatrix k = oracles::random_matrix(rng, n, d);
    const CsrMatrix logits = masked_qk(q, k, diagonal_mask(n));
    CHECK(logits.nnz() == n);
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t t = 0; t < d; ++t) dot += q(i, t) * k(i, t);
        CHECK(logits.row_vals(i)[0] ==
              doctest::Approx(dot / std::sqrt(double(d))).epsilon(1e-12));
    }
}

TEST_CASE("masked_qk: pattern preserved even for exactly-zero products") {
    const std::size_t n = 4, d = 2;
    const DenseMatrix q(n, d); // all zeros: every dot product is 0
    const DenseMatrix k(n, d, 1.0);
    ConnectivityMask m = full_mask(n);
    const CsrMatrix logits = masked_qk(q, k, m);
    CHECK(logits.nnz() == n * n); // zeros stay stored
    CHECK(logits.row_ptr() == m.mask.row_ptr());
    CHECK(logits.col_idx() == m.mask.col_idx());
}

TEST_CASE("masked_qk: random mask matches gather of the dense score matrix") {
    Rng rng(62);
    const std::size_t n = 12, d = 5;
    const DenseMatrix q = oracles::random_matrix(rng, n, d);
    const DenseMatrix k = oracles::random_matrix(rng, n, d);
    const PredictorParams pred = saturating_predictor(rng, n, 3, 4);
    const ConnectivityMask mask =
        predict_mask(sparsify_lowrank(lowrank_attention(q, k, pred), pred.tau), pred);
    const CsrMatrix logits = masked_qk(q, k, mask);
    const DenseMatrix dense =
        oracles::matmul(q, oracles::transpose(k)); // unscaled
    const double scale = 1.0 / std::sqrt(double(d));
    for (std::size_t i = 0; i < n; ++i) {
        const auto cols = logits.row_cols(i);
        const auto vals = logits.row_vals(i);
        for (std::size_t t = 0; t < cols.size(); ++t)
            CHECK(vals[t] ==
                  doctest::Approx(dense(i, cols[t]) * scale).epsilon(1e-12));
    }
}

TEST_CASE("sparse_row_softmax: singleton rows become exactly one") {
    const CsrMatrix logits(3, 3, {0, 1, 2, 3}, {0, 2, 1}, {5.0, -3.0, 0.0});
    const SparseAttention a = sparse_row_softmax(logits);
    for (double v : a.attn.values()) CHECK(v == 1.0);
}

TEST_CASE("sparse_row_softmax: equal logits split evenly; stable under shift") {
    CsrMatrix logits(1, 4, {0, 3}, {0, 1, 3}, {2.0, 2.0, 2.0});
    const SparseAttention a = sparse_row_softmax(logits);
    for (double v : a.attn.values()) CHECK(v == doctest::Approx(1.0 / 3.0));

    // Large magnitudes must not overflow.
    CsrMatrix huge(1, 2, {0, 2}, {0, 1}, {1e4, 1e4 - 2.0});
    const SparseAttention h = sparse_row_softmax(huge);
    CHECK(h.attn.values()[0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    CHECK(h.attn.values()[0] + h.attn.values()[1] == doctest::Approx(1.0));
}

TEST_CASE("sparse_row_softmax: matches gather/softmax/scatter oracle") {
    Rng rng(63);
    for (int t = 0; t < 10; ++t) {
        const std::size_t n = 10;
        const CsrMatrix logits = [&] {
            // Random pattern with at least one entry per row.
            CsrBuilder b(n, n);
            for (std::size_t i = 0; i < n; ++i) {
                bool any = false;
                for (std::size_t j = 0; j < n; ++j) {
                    if (rng.uniform01() < 0.4) {
                        b.push(j, rng.symmetric(3.0));
                        any = true;
                    }
                }
                if (!any) b.push(i, rng.symmetric(3.0));
                b.finish_row();
            }
            return b.build();
        }();
        const SparseAttention a = sparse_row_softmax(logits);
        a.attn.validate();
        for (std::size_t i = 0; i < n; ++i) {
            // Oracle: softmax over the row's stored values in long double.
            const auto vals = logits.row_vals(i);
            long double sum = 0.0L;
            for (double v : vals) sum += expl(static_cast<long double>(v));
            const auto got = a.attn.row_vals(i);
            double total = 0.0;
            for (std::size_t t2 = 0; t2 < vals.size(); ++t2) {
                const double want =
                    static_cast<double>(expl(static_cast<long double>(vals[t2])) / sum);
                CHECK(got[t2] == doctest::Approx(want).epsilon(1e-10));
                total += got[t2];
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("sparse_row_softmax: empty row rejected") {
    const CsrMatrix logits(2, 2, {0, 0, 1}, {1}, {1.0});
    CHECK_THROWS_AS(sparse_row_softmax(logits), InvalidArgument);
}

TEST_CASE("sparse_attention_value: identity attention returns v") {
    Rng rng(64);
    const DenseMatrix v = oracles::random_matrix(rng, 6, 4);
    SparseAttention a{CsrMatrix::identity(6)};
    const DenseMatrix out = sparse_attention_value(a, v);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(out.data()[i] == v.data()[i]);
}

TEST_CASE("sparse_attention_value: random attention matches dense product") {
    Rng rng(65);
    const std::size_t n = 9;
    CsrBuilder b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        b.push(i, 0.5);
        if (i + 1 < n) b.push(i + 1, 0.5);
        b.finish_row();
    }
    SparseAttention a{b.build()};
    const DenseMatrix v = oracles::random_matrix(rng, n, 5);
    CHECK(oracles::rel_diff(sparse_attention_value(a, v),
                            oracles::matmul(a.attn.to_dense(), v)) < 1e-12);
}

TEST_CASE("sparse MHSA at full budget equals dense MHSA") {
    Rng rng(66);
    for (int t = 0; t < 5; ++t) {
        const std::size_t n = 6 + 2 * static_cast<std::size_t>(t);
        const std::size_t d_model = 8, n_heads = 2;
        const DenseMatrix x = oracles::random_matrix(rng, n, d_model);
        std::vector<AttentionHeadParams> heads;
        for (std::size_t h = 0; h < n_heads; ++h)
            heads.push_back(random_head(rng, d_model, d_model / n_heads));
        const DenseMatrix w_o = oracles::random_matrix(rng, d_model, d_model);
        const PredictorParams pred = saturating_predictor(rng, n, 3, n);

        const SparseMhsaResult sparse =
            sparse_multi_head_attention(x, heads, pred, w_o);
        const DenseMatrix dense = multi_head_attention(x, heads, w_o);
        CHECK(oracles::rel_diff(sparse.out, dense) < 1e-6);
        for (const auto& m : sparse.masks) CHECK(m.mask.nnz() == n * n);
    }
}

TEST_CASE("sparse MHSA: budget one degenerates to per-token value rows") {
    Rng rng(67);
    const std::size_t n = 7, d_model = 6;
    const DenseMatrix x = oracles::random_matrix(rng, n, d_model);
    std::vector<AttentionHeadParams> heads{random_head(rng, d_model, 3),
                                           random_head(rng, d_model, 3)};
    const DenseMatrix w_o = oracles::random_matrix(rng, d_model, d_model);
    const PredictorParams pred = saturating_predictor(rng, n, 2, 1);

    const SparseMhsaResult r = sparse_multi_head_attention(x, heads, pred, w_o);
    // Budget 1 forces the diagonal-only mask, so each head output is
    // exactly its value matrix.
    std::vector<DenseMatrix> vs;
    for (const auto& h : heads) vs.push_back(dense_matmul(x, h.w_v));
    const DenseMatrix want = dense_matmul(hconcat(vs), w_o);
    CHECK(oracles::rel_diff(r.out, want) < 1e-12);
    for (const auto& m : r.masks) {
        CHECK(m.mask.nnz() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(m.mask.has_entry(i, i));
    }
}

TEST_CASE("sparse MHSA: renormalized semantics match dense mask-and-renormalize") {
    Rng rng(68);
    const std::size_t n = 10, d_model = 8;
    const DenseMatrix x = oracles::random_matrix(rng, n, d_model);
    std::vector<AttentionHeadParams> heads{random_head(rng, d_model, 4),
                                           random_head(rng, d_model, 4)};
    const DenseMatrix w_o = oracles::random_matrix(rng, d_model, d_model);
    const PredictorParams pred = saturating_predictor(rng, n, 3, 4);

    std::vector<SparseHeadDetail> detail;
    const SparseMhsaResult r = sparse_multi_head_attention(
        x, heads, pred, w_o, MaskedSoftmaxSemantics::kRenormalized, &detail);
    REQUIRE(detail.size() == heads.size());

    // Dense pipeline oracle: full scores, gather at the mask, softmax over
    // the gathered set, then attn*v — per head.
    std::vector<DenseMatrix> outs;
    for (std::size_t h = 0; h < heads.size(); ++h) {
        const DenseMatrix q = oracles::matmul(x, heads[h].w_q);
        const DenseMatrix k = oracles::matmul(x, heads[h].w_k);
        const DenseMatrix v = oracles::matmul(x, heads[h].w_v);
        const DenseMatrix scores = oracles::matmul(q, oracles::transpose(k));
        const double scale = 1.0 / 2.0; // d_head = 4
        const ConnectivityMask& mask = detail[h].mask;
        DenseMatrix attn(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            long double sum = 0.0L;
            for (std::size_t j : mask.mask.row_cols(i))
                sum += expl(static_cast<long double>(scores(i, j)) * scale);
            for (std::size_t j : mask.mask.row_cols(i))
                attn(i, j) = static_cast<double>(
                    expl(static_cast<long double>(scores(i, j)) * scale) / sum);
        }
        outs.push_back(oracles::matmul(attn, v));
        CHECK(oracles::rel_diff(detail[h].attn.to_dense(), attn) < 1e-10);
    }
    CHECK(oracles::rel_diff(r.out, oracles::matmul(hconcat(outs), w_o)) < 1e-10);
}

TEST_CASE("sparse MHSA: masked semantics gather the full softmax") {
    Rng rng(69);
    const std::size_t n = 9, d_model = 6;
    const DenseMatrix x = oracles::random_matrix(rng, n, d_model);
    std::vector<AttentionHeadParams> heads{random_head(rng, d_model, 6)};
    const DenseMatrix w_o = DenseMatrix::identity(6);
    const PredictorParams pred = saturating_predictor(rng, n, 3, 4);

    std::vector<SparseHeadDetail> detail;
    const SparseMhsaResult r = sparse_multi_head_attention(
        x, heads, pred, w_o, MaskedSoftmaxSemantics::kFullSoftmaxMasked, &detail);

    const auto dense = naive_attention_head(x, heads[0]);
    const CsrMatrix& attn = detail[0].attn;
    for (std::size_t i = 0; i < n; ++i) {
        const auto cols = attn.row_cols(i);
        const auto vals = attn.row_vals(i);
        double sum = 0.0;
        for (std::size_t t = 0; t < cols.size(); ++t) {
            CHECK(vals[t] == doctest::Approx(dense.attn(i, cols[t])).epsilon(1e-12));
            sum += vals[t];
        }
        CHECK(sum <= 1.0 + 1e-9); // masked rows keep at most the full mass
    }
    // Output equals the masked dense attention applied to v.
    DenseMatrix masked(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j : attn.row_cols(i)) masked(i, j) = dense.attn(i, j);
    const DenseMatrix v = dense_matmul(x, heads[0].w_v);
    CHECK(oracles::rel_diff(r.out, oracles::matmul(masked, v)) < 1e-10);
}

TEST_CASE("sparse MHSA: both semantics coincide on the full mask") {
    Rng rng(70);
    const std::size_t n = 8, d_model = 6;
    const DenseMatrix x = oracles::random_matrix(rng, n, d_model);
    std::vector<AttentionHeadParams> heads{random_head(rng, d_model, 3),
                                           random_head(rng, d_model, 3)};
    const DenseMatrix w_o = oracles::random_matrix(rng, d_model, d_model);
    const PredictorParams pred = saturating_predictor(rng, n, 2, n);
    const SparseMhsaResult renorm = sparse_multi_head_attention(
        x, heads, pred, w_o, MaskedSoftmaxSemantics::kRenormalized);
    const SparseMhsaResult masked = sparse_multi_head_attention(
        x, heads, pred, w_o, MaskedSoftmaxSemantics::kFullSoftmaxMasked);
    CHECK(oracles::rel_diff(renorm.out, masked.out) < 1e-10);
}

TEST_CASE("sparse MHSA: reported work respects the budget bound") {
    Rng rng(71);
    const std::size_t n = 16, d_model = 8, budget = 5;
    const DenseMatrix x = oracles::random_matrix(rng, n, d_model);
    std::vector<AttentionHeadParams> heads{random_head(rng, d_model, 4),
                                           random_head(rng, d_model, 4)};
    const DenseMatrix w_o = oracles::random_matrix(rng, d_model, d_model);
    const PredictorParams pred = saturating_predictor(rng, n, 4, budget);
    const SparseMhsaResult r = sparse_multi_head_attention(x, heads, pred, w_o);
    for (std::size_t h = 0; h < r.stats.size(); ++h) {
        const auto& s = r.stats[h];
        CHECK(s.mask_nnz == r.masks[h].mask.nnz());
        CHECK(s.mask_nnz <= n * budget);
        CHECK(s.qk_macs == s.mask_nnz * 4);
        CHECK(s.av_macs == s.mask_nnz * 4);
        CHECK(s.qk_macs <= n * budget * 4);
    }
}
