// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "sparsevit/csr_matrix.hpp"
#include "sparsevit/dense_matrix.hpp"
#include "sparsevit/predictor.hpp"

namespace sparsevit {

/// One training example for the predictor: a head's queries and keys plus
/// the dense teacher attention map those should reconstruct.
struct Phase1Sample {
    DenseMatrix q;       // n x d_head
    DenseMatrix k;       // n x d_head
    DenseMatrix a_teach; // n x n, rows sum to 1
};

struct Phase1Gradients {
    DenseMatrix w_down;
    DenseMatrix w_up;
    double loss = 0.0;
};

/// Gradient-descent trainer for the mask predictor with the backbone
/// frozen. The objective is the attention-distillation MSE between the
/// up-projected low-rank attention and the teacher map, averaged over the
/// batch. Training runs on a dense basis; thresholding and top-k are
/// inference-time steps and stay out of the training graph. Weight decay
/// is decoupled and applies to the basis w_up only.
class Phase1Trainer {
public:
    Phase1Trainer(DenseMatrix w_down, DenseMatrix w_up);

    /// Densifies the stored basis of `p`.
    static Phase1Trainer from_params(const PredictorParams& p);

    const DenseMatrix& w_down() const { return w_down_; }
    const DenseMatrix& w_up() const { return w_up_; }
    std::size_t n_down() const { return w_down_.rows(); }

    double loss(const std::vector<Phase1Sample>& batch) const;

    /// Analytic gradients of the batch loss (no decay term included).
    Phase1Gradients gradients(const std::vector<Phase1Sample>& batch) const;

    /// One descent step; returns the pre-step batch loss. A non-finite
    /// gradient aborts the step (parameters untouched) with a
    /// NumericalError.
    double step(const std::vector<Phase1Sample>& batch, double lr,
                double weight_decay);

    /// Packages the trained weights, pruning the basis at prune_threshold.
    PredictorParams to_params(double tau, std::size_t budget,
                              double prune_threshold) const;

private:
    DenseMatrix w_down_; // n_down x n
    DenseMatrix w_up_;   // n_down x n, dense during training
};

/// Drops stored entries with |value| < threshold; the survivors keep their
/// values. Density is available from the result.
CsrMatrix prune_wup(const CsrMatrix& w_up, double threshold);

/// Dense variant: keeps nonzero entries with |value| >= threshold.
CsrMatrix prune_wup(const DenseMatrix& w_up, double threshold);

/// Convenience wrapper: densify, take one descent step, re-sparsify
/// (dropping exact zeros only — no pruning), keep the other
/// hyperparameters. Returns the updated parameters.
PredictorParams phase1_step(const std::vector<Phase1Sample>& batch,
                            const PredictorParams& params, double lr,
                            double weight_decay);

} // namespace sparsevit
