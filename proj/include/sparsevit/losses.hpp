// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "sparsevit/csr_matrix.hpp"
#include "sparsevit/dense_matrix.hpp"

namespace sparsevit {

/// Mixing weights for the training objective. The L2 term on the basis is
/// applied as decoupled weight decay in the optimizer, not inside
/// total_loss.
struct LossWeights {
    double lambda_token = 0.0;
    double lambda_cls = 0.0;
    double lambda_attn = 0.0;
    double weight_decay = 0.05;

    void validate() const;

    /// Predictor-only distillation: token 0, cls 0, attn 1.
    static LossWeights phase1();
    /// Backbone fine-tuning mix: token 0.5, cls 0.5, attn 0.
    static LossWeights phase2();
};

/// Reference outputs of the dense teacher used for distillation.
struct TeacherOutputs {
    DenseMatrix tokens;                          // final-block tokens
    std::vector<double> class_probs;             // sums to 1
    std::vector<std::vector<DenseMatrix>> attn;  // [layer][head], rows sum to 1
};

/// Cross-entropy of raw scores against an integer label:
/// -log softmax(scores)[label].
double loss_cls(const std::vector<double>& scores, std::size_t label);

/// Mean squared error over all token entries.
double loss_token_distill(const DenseMatrix& x, const DenseMatrix& x_teach);

/// KL(pred || teach); both distributions floored at 1e-12 before the log.
double loss_cls_distill(const std::vector<double>& pred_probs,
                        const std::vector<double>& teach_probs);

/// Mean squared error between predicted attention scores and the teacher
/// attention map, over all entries of one layer/head pair.
double loss_attn_distill(const DenseMatrix& scores, const DenseMatrix& a_teach);

/// Sum of squares of the stored entries of the sparse basis.
double l2_reg(const CsrMatrix& w_up);

/// Softmax of a score vector (stable); used to turn classifier scores into
/// the distribution fed to loss_cls_distill.
std::vector<double> softmax_vector(const std::vector<double>& scores);

struct LossParts {
    double cls = 0.0;
    double token = 0.0;
    double cls_kl = 0.0;
    double attn = 0.0;
};

/// cls + lambda_token*token + lambda_cls*cls_kl + lambda_attn*attn.
/// The decay term is the optimizer's job.
double total_loss(const LossParts& parts, const LossWeights& weights);

} // namespace sparsevit
