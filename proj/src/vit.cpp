// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/vit.hpp"

#include <cmath>
#include <limits>

#include "sparsevit/check.hpp"
#include "sparsevit/rng.hpp"

namespace sparsevit {

namespace {
constexpr double kLayerNormEps = 1e-6;
}

void ModelConfig::validate() const {
    require(image_size >= 1 && patch_size >= 1,
            "ModelConfig: image and patch sizes must be >= 1");
    require(image_size % patch_size == 0,
            "ModelConfig: image_size not divisible by patch_size");
    require(n_heads >= 1 && d_model >= 1, "ModelConfig: d_model/n_heads must be >= 1");
    require(d_model % n_heads == 0, "ModelConfig: d_model not divisible by n_heads");
    require(n_layers >= 1, "ModelConfig: n_layers must be >= 1");
    require(n_classes >= 1, "ModelConfig: n_classes must be >= 1");
    require(mlp_ratio > 0.0, "ModelConfig: mlp_ratio must be positive");
}

void VitModel::validate() const {
    cfg.validate();
    const std::size_t n = cfg.n_tokens();
    require(patch_proj.rows() == cfg.patch_dim() && patch_proj.cols() == cfg.d_model,
            "VitModel: patch_proj shape mismatch");
    require(cls_token.rows() == 1 && cls_token.cols() == cfg.d_model,
            "VitModel: cls_token shape mismatch");
    require(pos_embed.rows() == n && pos_embed.cols() == cfg.d_model,
            "VitModel: pos_embed shape mismatch");
    require(layers.size() == cfg.n_layers, "VitModel: layer count mismatch");
    for (const auto& l : layers) {
        require(l.heads.size() == cfg.n_heads, "VitModel: head count mismatch");
        for (const auto& h : l.heads) {
            h.validate();
            require(h.w_q.rows() == cfg.d_model && h.d_head == cfg.d_head(),
                    "VitModel: head projection shape mismatch");
        }
        require(l.w_o.rows() == cfg.d_model && l.w_o.cols() == cfg.d_model,
                "VitModel: w_o shape mismatch");
        require(l.mlp_in.rows() == cfg.d_model && l.mlp_in.cols() == cfg.d_mlp(),
                "VitModel: mlp_in shape mismatch");
        require(l.mlp_out.rows() == cfg.d_mlp() && l.mlp_out.cols() == cfg.d_model,
                "VitModel: mlp_out shape mismatch");
        require(l.norm1_scale.size() == cfg.d_model &&
                    l.norm1_shift.size() == cfg.d_model &&
                    l.norm2_scale.size() == cfg.d_model &&
                    l.norm2_shift.size() == cfg.d_model,
                "VitModel: norm vector length mismatch");
        l.predictor.validate();
        require(l.predictor.w_down.cols() == n,
                "VitModel: predictor column count != n_tokens");
        if (!l.lin_e.empty() || !l.lin_f.empty()) {
            require(l.lin_e.rows() == l.lin_f.rows() && l.lin_e.cols() == n &&
                        l.lin_f.cols() == n,
                    "VitModel: low-rank projection shape mismatch");
        }
    }
    require(final_norm_scale.size() == cfg.d_model &&
                final_norm_shift.size() == cfg.d_model,
            "VitModel: final norm vector length mismatch");
    require(head.rows() == cfg.d_model && head.cols() == cfg.n_classes,
            "VitModel: classifier head shape mismatch");
}

DenseMatrix layer_norm(const DenseMatrix& x, const std::vector<double>& scale,
                       const std::vector<double>& shift) {
    require(scale.size() == x.cols() && shift.size() == x.cols(),
            "layer_norm: scale/shift length != feature count");
    DenseMatrix out(x.rows(), x.cols());
    const double d = static_cast<double>(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto r = x.row(i);
        double mean = 0.0;
        for (double v : r) mean += v;
        mean /= d;
        double var = 0.0;
        for (double v : r) var += (v - mean) * (v - mean);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = (r[j] - mean) * inv * scale[j] + shift[j];
    }
    return out;
}

DenseMatrix gelu(const DenseMatrix& x) {
    DenseMatrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        out.data()[i] = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    }
    return out;
}

TokenSequence patch_embed(const Image& image, const VitModel& model) {
    const ModelConfig& cfg = model.cfg;
    require(image.width == cfg.image_size && image.height == cfg.image_size,
            "patch_embed: image dimensions do not match the model config");
    require(image.data.size() == image.width * image.height * 3,
            "patch_embed: image buffer size mismatch");
    const std::size_t g = cfg.grid();
    const std::size_t p = cfg.patch_size;

    DenseMatrix tokens(cfg.n_tokens(), cfg.d_model);
    for (std::size_t j = 0; j < cfg.d_model; ++j)
        tokens(0, j) = model.cls_token(0, j);

    std::vector<double> patch(cfg.patch_dim());
    for (std::size_t py = 0; py < g; ++py) {
        for (std::size_t px = 0; px < g; ++px) {
            std::size_t t = 0;
            for (std::size_t y = 0; y < p; ++y)
                for (std::size_t x = 0; x < p; ++x)
                    for (std::size_t c = 0; c < 3; ++c)
                        patch[t++] = image.at(py * p + y, px * p + x, c);
            const std::size_t row = 1 + py * g + px;
            for (std::size_t j = 0; j < cfg.d_model; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < patch.size(); ++i)
                    acc += patch[i] * model.patch_proj(i, j);
                tokens(row, j) = acc;
            }
        }
    }
    for (std::size_t i = 0; i < tokens.rows(); ++i)
        for (std::size_t j = 0; j < tokens.cols(); ++j)
            tokens(i, j) += model.pos_embed(i, j);
    return TokenSequence{std::move(tokens)};
}

namespace {

DenseMatrix linformer_mhsa(const DenseMatrix& x, const LayerParams& p) {
    require(!p.lin_e.empty() && !p.lin_f.empty(),
            "transformer_block: low-rank projections missing for this mode");
    std::vector<DenseMatrix> outs;
    outs.reserve(p.heads.size());
    for (const auto& h : p.heads) {
        LinformerParams lp{h, p.lin_e, p.lin_f};
        outs.push_back(linformer_head(x, lp));
    }
    return dense_matmul(hconcat(outs), p.w_o);
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i)
        out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

} // namespace

TokenSequence transformer_block(const TokenSequence& x, const LayerParams& p,
                                AttentionMode mode,
                                MaskedSoftmaxSemantics semantics,
                                BlockTrace* trace) {
    const DenseMatrix h1 = layer_norm(x.tokens, p.norm1_scale, p.norm1_shift);
    DenseMatrix attn_out;
    switch (mode) {
        case AttentionMode::kDense:
            attn_out = multi_head_attention(h1, p.heads, p.w_o);
            break;
        case AttentionMode::kSparse: {
            SparseMhsaResult r = sparse_multi_head_attention(
                h1, p.heads, p.predictor, p.w_o, semantics);
            attn_out = std::move(r.out);
            if (trace) {
                trace->masks = std::move(r.masks);
                trace->stats = std::move(r.stats);
            }
            break;
        }
        case AttentionMode::kLinformer:
            attn_out = linformer_mhsa(h1, p);
            break;
    }
    const DenseMatrix x1 = add(x.tokens, attn_out);
    const DenseMatrix h2 = layer_norm(x1, p.norm2_scale, p.norm2_shift);
    const DenseMatrix mlp = dense_matmul(gelu(dense_matmul(h2, p.mlp_in)), p.mlp_out);
    return TokenSequence{add(x1, mlp)};
}

std::vector<double> forward_classify(const Image& image, const VitModel& model,
                                     AttentionMode mode,
                                     MaskedSoftmaxSemantics semantics,
                                     ForwardTrace* trace) {
    TokenSequence x = patch_embed(image, model);
    if (trace) trace->blocks.assign(model.layers.size(), BlockTrace{});
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        BlockTrace* bt = trace ? &trace->blocks[l] : nullptr;
        x = transformer_block(x, model.layers[l], mode, semantics, bt);
    }
    if (trace) trace->final_tokens = x.tokens;
    const DenseMatrix normed =
        layer_norm(x.tokens, model.final_norm_scale, model.final_norm_shift);
    std::vector<double> scores(model.cfg.n_classes, 0.0);
    for (std::size_t c = 0; c < model.cfg.n_classes; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < model.cfg.d_model; ++j)
            acc += normed(0, j) * model.head(j, c);
        scores[c] = acc;
    }
    return scores;
}

TeacherTrace collect_teacher(const Image& image, const VitModel& model) {
    TeacherTrace t;
    TokenSequence x = patch_embed(image, model);
    for (const auto& layer : model.layers) {
        const DenseMatrix h1 =
            layer_norm(x.tokens, layer.norm1_scale, layer.norm1_shift);
        std::vector<DenseHeadDetail> detail;
        const DenseMatrix attn_out =
            multi_head_attention(h1, layer.heads, layer.w_o, &detail);
        t.layers.push_back(std::move(detail));
        const DenseMatrix x1 = add(x.tokens, attn_out);
        const DenseMatrix h2 = layer_norm(x1, layer.norm2_scale, layer.norm2_shift);
        x.tokens =
            add(x1, dense_matmul(gelu(dense_matmul(h2, layer.mlp_in)), layer.mlp_out));
    }
    t.final_tokens = x.tokens;
    const DenseMatrix normed =
        layer_norm(x.tokens, model.final_norm_scale, model.final_norm_shift);
    t.scores.assign(model.cfg.n_classes, 0.0);
    for (std::size_t c = 0; c < model.cfg.n_classes; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < model.cfg.d_model; ++j)
            acc += normed(0, j) * model.head(j, c);
        t.scores[c] = acc;
    }
    return t;
}

namespace {

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                          double scale) {
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.symmetric(scale);
    return m;
}

DenseMatrix fanin_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    return random_matrix(rng, rows, cols,
                         1.0 / std::sqrt(static_cast<double>(rows)));
}

std::vector<double> norm_scale_vec(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    for (double& x : v) x = 1.0 + rng.symmetric(0.1);
    return v;
}

std::vector<double> norm_shift_vec(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.symmetric(0.1);
    return v;
}

} // namespace

VitModel make_synthetic_model(const SyntheticSpec& spec) {
    VitModel m;
    m.cfg.image_size = spec.image_size;
    m.cfg.patch_size = spec.patch_size;
    m.cfg.d_model = spec.d_model;
    m.cfg.n_heads = spec.n_heads;
    m.cfg.n_layers = spec.n_layers;
    m.cfg.n_classes = spec.n_classes;
    m.cfg.mlp_ratio = spec.mlp_ratio;
    m.cfg.validate();
    const std::size_t n = m.cfg.n_tokens();
    const std::size_t budget = spec.budget == 0 ? n : spec.budget;
    require(budget <= n, "make_synthetic_model: budget exceeds n_tokens");
    require(spec.n_down >= 1, "make_synthetic_model: n_down must be >= 1");

    Rng rng(spec.seed);
    m.patch_proj = fanin_matrix(rng, m.cfg.patch_dim(), m.cfg.d_model);
    const double tok_scale = 1.0 / std::sqrt(static_cast<double>(m.cfg.d_model));
    m.cls_token = random_matrix(rng, 1, m.cfg.d_model, tok_scale);
    m.pos_embed = random_matrix(rng, n, m.cfg.d_model, tok_scale);

    for (std::size_t l = 0; l < m.cfg.n_layers; ++l) {
        LayerParams layer;
        for (std::size_t h = 0; h < m.cfg.n_heads; ++h) {
            AttentionHeadParams head;
            head.d_head = m.cfg.d_head();
            head.w_q = fanin_matrix(rng, m.cfg.d_model, head.d_head);
            head.w_k = fanin_matrix(rng, m.cfg.d_model, head.d_head);
            head.w_v = fanin_matrix(rng, m.cfg.d_model, head.d_head);
            layer.heads.push_back(std::move(head));
        }
        layer.w_o = fanin_matrix(rng, m.cfg.d_model, m.cfg.d_model);
        layer.mlp_in = fanin_matrix(rng, m.cfg.d_model, m.cfg.d_mlp());
        layer.mlp_out = fanin_matrix(rng, m.cfg.d_mlp(), m.cfg.d_model);
        layer.norm1_scale = norm_scale_vec(rng, m.cfg.d_model);
        layer.norm1_shift = norm_shift_vec(rng, m.cfg.d_model);
        layer.norm2_scale = norm_scale_vec(rng, m.cfg.d_model);
        layer.norm2_shift = norm_shift_vec(rng, m.cfg.d_model);

        PredictorParams pred;
        pred.n_down = spec.n_down;
        pred.tau = spec.tau;
        pred.budget = budget;
        pred.w_down = fanin_matrix(rng, spec.n_down, n);
        // Positive basis: every mask score is positive, so an untrained
        // predictor saturates its budget and, at budget n, reproduces the
        // dense attention pattern exactly.
        DenseMatrix w_up(spec.n_down, n);
        for (std::size_t i = 0; i < w_up.size(); ++i)
            w_up.data()[i] = rng.uniform(0.1, 1.0);
        pred.w_up = CsrMatrix::from_dense(w_up);
        layer.predictor = std::move(pred);
        layer.lin_e = DenseMatrix::identity(n);
        layer.lin_f = DenseMatrix::identity(n);
        m.layers.push_back(std::move(layer));
    }
    m.final_norm_scale = norm_scale_vec(rng, m.cfg.d_model);
    m.final_norm_shift = norm_shift_vec(rng, m.cfg.d_model);
    m.head = fanin_matrix(rng, m.cfg.d_model, m.cfg.n_classes);
    m.validate();
    return m;
}

Image make_synthetic_image(std::size_t image_size, std::uint64_t seed) {
    Image img;
    img.width = image_size;
    img.height = image_size;
    img.data.resize(image_size * image_size * 3);
    Rng rng(seed);
    for (double& v : img.data) v = rng.uniform01();
    return img;
}

void set_attention_budget(VitModel& model, std::size_t budget) {
    require(budget >= 1 && budget <= model.cfg.n_tokens(),
            "set_attention_budget: budget out of range");
    for (auto& l : model.layers) l.predictor.budget = budget;
}

void set_tau(VitModel& model, double tau) {
    require(tau > 0.0 && tau < 1.0, "set_tau: tau must lie in (0, 1)");
    for (auto& l : model.layers) l.predictor.tau = tau;
}

double keep_all_tau() { return std::numeric_limits<double>::min(); }

} // namespace sparsevit
