// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sparsevit/attention.hpp"
#include "sparsevit/dense_matrix.hpp"
#include "sparsevit/predictor.hpp"
#include "sparsevit/sparse_mhsa.hpp"

namespace sparsevit {

struct ModelConfig {
    std::size_t image_size = 0;
    std::size_t patch_size = 0;
    std::size_t d_model = 0;
    std::size_t n_heads = 0;
    std::size_t n_layers = 0;
    std::size_t n_classes = 0;
    double mlp_ratio = 4.0;

    std::size_t grid() const { return image_size / patch_size; }
    std::size_t n_tokens() const { return grid() * grid() + 1; }
    std::size_t d_head() const { return d_model / n_heads; }
    std::size_t d_mlp() const {
        return static_cast<std::size_t>(mlp_ratio * static_cast<double>(d_model));
    }
    std::size_t patch_dim() const { return patch_size * patch_size * 3; }

    void validate() const;
};

struct LayerParams {
    std::vector<AttentionHeadParams> heads;
    DenseMatrix w_o; // d_model x d_model
    PredictorParams predictor;
    DenseMatrix mlp_in;  // d_model x d_mlp
    DenseMatrix mlp_out; // d_mlp x d_model
    std::vector<double> norm1_scale, norm1_shift;
    std::vector<double> norm2_scale, norm2_shift;
    // Low-rank baseline projections (n_down_lin x n), shared across heads.
    // May be empty when the low-rank mode is unused.
    DenseMatrix lin_e, lin_f;
};

struct VitModel {
    ModelConfig cfg;
    DenseMatrix patch_proj; // patch_dim x d_model
    DenseMatrix cls_token;  // 1 x d_model
    DenseMatrix pos_embed;  // n_tokens x d_model
    std::vector<LayerParams> layers;
    std::vector<double> final_norm_scale, final_norm_shift;
    DenseMatrix head; // d_model x n_classes

    void validate() const;
};

/// Interleaved RGB image, values in [0, 1], row-major (y, x, channel).
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> data;

    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return data[(y * width + x) * 3 + c];
    }
    double& at(std::size_t y, std::size_t x, std::size_t c) {
        return data[(y * width + x) * 3 + c];
    }
};

struct TokenSequence {
    DenseMatrix tokens; // n_tokens x d_model
};

enum class AttentionMode { kDense, kSparse, kLinformer };

/// Per-row layer normalization with learned scale/shift, eps 1e-6.
DenseMatrix layer_norm(const DenseMatrix& x, const std::vector<double>& scale,
                       const std::vector<double>& shift);

/// Exact-erf GELU applied elementwise.
DenseMatrix gelu(const DenseMatrix& x);

/// Flattens non-overlapping patches row-major (y, x, channel), projects
/// them with patch_proj, prepends the CLS token and adds positional
/// embeddings.
TokenSequence patch_embed(const Image& image, const VitModel& model);

/// Per-block capture of sparse-mode masks and work statistics (empty in
/// other modes).
struct BlockTrace {
    std::vector<ConnectivityMask> masks;
    std::vector<HeadWorkStats> stats;
};

struct ForwardTrace {
    std::vector<BlockTrace> blocks;
    DenseMatrix final_tokens; // tokens after the last block, pre final norm
};

/// Pre-norm transformer block: x + Attn(norm1(x)), then + MLP(norm2(.)).
/// The attention path is dispatched on `mode`.
TokenSequence transformer_block(
    const TokenSequence& x, const LayerParams& p, AttentionMode mode,
    MaskedSoftmaxSemantics semantics = MaskedSoftmaxSemantics::kRenormalized,
    BlockTrace* trace = nullptr);

/// Full forward pass; returns n_classes scores from the final CLS token.
std::vector<double> forward_classify(
    const Image& image, const VitModel& model, AttentionMode mode,
    MaskedSoftmaxSemantics semantics = MaskedSoftmaxSemantics::kRenormalized,
    ForwardTrace* trace = nullptr);

/// Everything a distillation run needs from the dense path: per-layer
/// per-head queries, keys and attention maps, the final-block tokens and
/// the class scores.
struct TeacherTrace {
    std::vector<std::vector<DenseHeadDetail>> layers; // [layer][head]
    DenseMatrix final_tokens;
    std::vector<double> scores;
};

TeacherTrace collect_teacher(const Image& image, const VitModel& model);

/// Knobs for deterministic desk-scale models. Weights are drawn from a
/// symmetric uniform scaled by 1/sqrt(fan_in); the predictor basis w_up is
/// drawn positive so that untrained mask scores saturate the budget.
struct SyntheticSpec {
    std::uint64_t seed = 42;
    std::size_t image_size = 32;
    std::size_t patch_size = 8;
    std::size_t d_model = 16;
    std::size_t n_heads = 2;
    std::size_t n_layers = 2;
    std::size_t n_classes = 10;
    double mlp_ratio = 2.0;
    std::size_t n_down = 4;
    double tau = 0.05;
    std::size_t budget = 0; // 0 means full budget (n_tokens)
};

VitModel make_synthetic_model(const SyntheticSpec& spec);

Image make_synthetic_image(std::size_t image_size, std::uint64_t seed);

/// Sets the mask budget of every layer's predictor.
void set_attention_budget(VitModel& model, std::size_t budget);

/// Sets the low-rank attention threshold of every layer's predictor.
void set_tau(VitModel& model, double tau);

/// A positive tau small enough that thresholding keeps every softmax entry.
double keep_all_tau();

} // namespace sparsevit
