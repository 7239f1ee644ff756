// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstddef>
#include <vector>

#include "oracles.hpp"
#include "sparsevit/attention.hpp"
#include "sparsevit/check.hpp"
#include "sparsevit/dense_matrix.hpp"
#include "sparsevit/rng.hpp"

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

} // namespace

TEST_CASE("naive head: single token attends only to itself") {
    Rng rng(20);
    const DenseMatrix x = oracles::random_matrix(rng, 1, 4);
    const AttentionHeadParams p = random_head(rng, 4, 3);
    const AttentionHeadOutput out = naive_attention_head(x, p);
    CHECK(out.attn(0, 0) == doctest::Approx(1.0));
    const DenseMatrix v = dense_matmul(x, p.w_v);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(out.out(0, j) == doctest::Approx(v(0, j)));
}

TEST_CASE("naive head: identical tokens give uniform attention") {
    Rng rng(21);
    DenseMatrix x(5, 4);
    const DenseMatrix row = oracles::random_matrix(rng, 1, 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) x(i, j) = row(0, j);
    const AttentionHeadParams p = random_head(rng, 4, 2);
    const AttentionHeadOutput out = naive_attention_head(x, p);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            CHECK(out.attn(i, j) == doctest::Approx(0.2));
}

TEST_CASE("naive head: matches extended-precision reference on random input") {
    Rng rng(22);
    const DenseMatrix x = oracles::random_matrix(rng, 8, 6);
    const AttentionHeadParams p = random_head(rng, 6, 4);
    const AttentionHeadOutput fast = naive_attention_head(x, p);
    const oracles::AttentionResult ref =
        oracles::attention_head(x, p.w_q, p.w_k, p.w_v);
    CHECK(oracles::rel_diff(fast.attn, ref.attn) < 1e-10);
    CHECK(oracles::rel_diff(fast.out, ref.out) < 1e-10);
}

TEST_CASE("naive head: attention rows sum to one") {
    Rng rng(23);
    const DenseMatrix x = oracles::random_matrix(rng, 7, 5, 2.0);
    const AttentionHeadOutput out = naive_attention_head(x, random_head(rng, 5, 5));
    for (std::size_t i = 0; i < out.attn.rows(); ++i) {
        double sum = 0.0;
        for (double v : out.attn.row(i)) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("naive head: shape validation") {
    AttentionHeadParams p;
    p.w_q = DenseMatrix(4, 2);
    p.w_k = DenseMatrix(4, 3); // mismatched d_head
    p.w_v = DenseMatrix(4, 2);
    p.d_head = 2;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p.w_k = DenseMatrix(4, 2);
    p.validate();
    CHECK_THROWS_AS(naive_attention_head(DenseMatrix(3, 5), p), InvalidArgument);
}

TEST_CASE("multi-head: one head with identity output projection") {
    Rng rng(24);
    const DenseMatrix x = oracles::random_matrix(rng, 6, 4);
    const AttentionHeadParams p = random_head(rng, 4, 4);
    const DenseMatrix mha = multi_head_attention(x, {p}, DenseMatrix::identity(4));
    const AttentionHeadOutput single = naive_attention_head(x, p);
    CHECK(oracles::rel_diff(mha, single.out) == 0.0);
}

TEST_CASE("multi-head: duplicated head halves under averaging projection") {
    Rng rng(25);
    const DenseMatrix x = oracles::random_matrix(rng, 5, 4);
    const AttentionHeadParams p = random_head(rng, 4, 2);
    // Concatenating two copies and averaging the two blocks reproduces the
    // single-head output.
    DenseMatrix w_o(4, 2);
    w_o(0, 0) = w_o(1, 1) = w_o(2, 0) = w_o(3, 1) = 0.5;
    const DenseMatrix mha = multi_head_attention(x, {p, p}, w_o);
    const AttentionHeadOutput single = naive_attention_head(x, p);
    CHECK(oracles::rel_diff(mha, single.out) < 1e-12);
}

TEST_CASE("multi-head: six heads match manual concat + projection") {
    Rng rng(26);
    const std::size_t n = 9, d_model = 12, n_heads = 6;
    const DenseMatrix x = oracles::random_matrix(rng, n, d_model);
    std::vector<AttentionHeadParams> heads;
    for (std::size_t h = 0; h < n_heads; ++h)
        heads.push_back(random_head(rng, d_model, d_model / n_heads));
    const DenseMatrix w_o = oracles::random_matrix(rng, d_model, d_model);

    std::vector<DenseHeadDetail> detail;
    const DenseMatrix mha = multi_head_attention(x, heads, w_o, &detail);
    REQUIRE(detail.size() == n_heads);

    std::vector<DenseMatrix> blocks;
    for (const auto& h : heads) blocks.push_back(naive_attention_head(x, h).out);
    const DenseMatrix manual = oracles::matmul(hconcat(blocks), w_o);
    CHECK(oracles::rel_diff(mha, manual) < 1e-12);

    // Captured intermediates agree with a from-scratch recomputation.
    for (std::size_t h = 0; h < n_heads; ++h) {
        const auto ref =
            oracles::attention_head(x, heads[h].w_q, heads[h].w_k, heads[h].w_v);
        CHECK(oracles::rel_diff(detail[h].attn, ref.attn) < 1e-10);
        CHECK(oracles::rel_diff(detail[h].q, dense_matmul(x, heads[h].w_q)) == 0.0);
        CHECK(oracles::rel_diff(detail[h].k, dense_matmul(x, heads[h].w_k)) == 0.0);
    }
}

TEST_CASE("multi-head: rejects w_o with wrong row count") {
    Rng rng(27);
    const DenseMatrix x = oracles::random_matrix(rng, 4, 6);
    const AttentionHeadParams p = random_head(rng, 6, 3);
    CHECK_THROWS_AS(multi_head_attention(x, {p, p}, DenseMatrix(5, 6)),
                    InvalidArgument);
    CHECK_THROWS_AS(multi_head_attention(x, {}, DenseMatrix(0, 6)),
                    InvalidArgument);
}

TEST_CASE("attention is permutation-equivariant in the token dimension") {
    Rng rng(28);
    const std::size_t n = 7;
    const DenseMatrix x = oracles::random_matrix(rng, n, 5);
    const AttentionHeadParams p = random_head(rng, 5, 4);

    // A fixed permutation of the rows.
    const std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    DenseMatrix xp(n, 5);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 5; ++j) xp(i, j) = x(perm[i], j);

    const AttentionHeadOutput base = naive_attention_head(x, p);
    const AttentionHeadOutput permuted = naive_attention_head(xp, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(permuted.out(i, j) ==
                  doctest::Approx(base.out(perm[i], j)).epsilon(1e-12));
}

TEST_CASE("linformer head: identity projections reproduce dense attention") {
    Rng rng(29);
    const std::size_t n = 6;
    const DenseMatrix x = oracles::random_matrix(rng, n, 4);
    LinformerParams p;
    p.head = random_head(rng, 4, 3);
    p.e_proj = DenseMatrix::identity(n);
    p.f_proj = DenseMatrix::identity(n);
    const DenseMatrix out = linformer_head(x, p);
    const AttentionHeadOutput dense = naive_attention_head(x, p.head);
    CHECK(oracles::rel_diff(out, dense.out) < 1e-12);
}

TEST_CASE("linformer head: rank-1 pooling projection averages keys/values") {
    Rng rng(30);
    const std::size_t n = 5;
    const DenseMatrix x = oracles::random_matrix(rng, n, 4);
    LinformerParams p;
    p.head = random_head(rng, 4, 3);
    p.e_proj = DenseMatrix(1, n, 1.0 / n);
    p.f_proj = DenseMatrix(1, n, 1.0 / n);
    // With a single projected token the attention weight is exactly 1 and
    // the output is each row mapped to the pooled value vector.
    const DenseMatrix out = linformer_head(x, p);
    const DenseMatrix v = dense_matmul(x, p.head.w_v);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += v(i, j) / n;
        for (std::size_t i = 0; i < n; ++i)
            CHECK(out(i, j) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("linformer head: random projections match a step-by-step oracle") {
    Rng rng(31);
    const std::size_t n = 8, k = 3;
    const DenseMatrix x = oracles::random_matrix(rng, n, 6);
    LinformerParams p;
    p.head = random_head(rng, 6, 4);
    p.e_proj = oracles::random_matrix(rng, k, n);
    p.f_proj = oracles::random_matrix(rng, k, n);
    const DenseMatrix out = linformer_head(x, p);

    const DenseMatrix q = oracles::matmul(x, p.head.w_q);
    const DenseMatrix k_proj = oracles::matmul(p.e_proj, oracles::matmul(x, p.head.w_k));
    const DenseMatrix v_proj = oracles::matmul(p.f_proj, oracles::matmul(x, p.head.w_v));
    const DenseMatrix attn = oracles::softmax_rows(
        oracles::matmul(q, oracles::transpose(k_proj)), 1.0 / 2.0);
    CHECK(oracles::rel_diff(out, oracles::matmul(attn, v_proj)) < 1e-10);
}

TEST_CASE("linformer head: mismatched projection shapes rejected") {
    Rng rng(32);
    LinformerParams p;
    p.head = random_head(rng, 4, 2);
    p.e_proj = DenseMatrix(2, 6);
    p.f_proj = DenseMatrix(3, 6); // must match e_proj
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p.f_proj = DenseMatrix(2, 6);
    p.validate();
    // Projection width must equal the token count.
    CHECK_THROWS_AS(linformer_head(DenseMatrix(5, 4), p), InvalidArgument);
}
