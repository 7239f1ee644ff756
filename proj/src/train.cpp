// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/train.hpp"

#include <cmath>

#include "sparsevit/check.hpp"

namespace sparsevit {

namespace {

void check_batch(const std::vector<Phase1Sample>& batch, std::size_t n_down,
                 std::size_t n) {
    require(!batch.empty(), "phase-1: empty batch");
    for (const auto& s : batch) {
        require(s.q.rows() == n && s.k.rows() == n,
                "phase-1: sample token count != predictor column count");
        require(s.q.cols() == s.k.cols() && s.q.cols() >= 1,
                "phase-1: q and k disagree on d_head");
        require(s.a_teach.rows() == n && s.a_teach.cols() == n,
                "phase-1: teacher attention must be n x n");
    }
    require(n_down >= 1, "phase-1: n_down must be >= 1");
}

} // namespace

Phase1Trainer::Phase1Trainer(DenseMatrix w_down, DenseMatrix w_up)
    : w_down_(std::move(w_down)), w_up_(std::move(w_up)) {
    require(w_down_.rows() == w_up_.rows() && w_down_.cols() == w_up_.cols(),
            "Phase1Trainer: w_down and w_up must share their shape");
    require(w_down_.rows() >= 1 && w_down_.cols() >= 1,
            "Phase1Trainer: empty parameters");
}

Phase1Trainer Phase1Trainer::from_params(const PredictorParams& p) {
    p.validate();
    return Phase1Trainer(p.w_down, p.w_up.to_dense());
}

double Phase1Trainer::loss(const std::vector<Phase1Sample>& batch) const {
    const std::size_t n = w_down_.cols();
    check_batch(batch, n_down(), n);
    double acc = 0.0;
    for (const auto& s : batch) {
        const DenseMatrix k_proj = dense_matmul(w_down_, s.k);
        const double scale = 1.0 / std::sqrt(static_cast<double>(s.q.cols()));
        const DenseMatrix soft = softmax_rows(dense_matmul_nt(s.q, k_proj), scale);
        const DenseMatrix pred = dense_matmul(soft, w_up_);
        double mse = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred.data()[i] - s.a_teach.data()[i];
            mse += d * d;
        }
        acc += mse / static_cast<double>(pred.size());
    }
    return acc / static_cast<double>(batch.size());
}

Phase1Gradients Phase1Trainer::gradients(
    const std::vector<Phase1Sample>& batch) const {
    const std::size_t n = w_down_.cols();
    check_batch(batch, n_down(), n);

    Phase1Gradients g;
    g.w_down = DenseMatrix(w_down_.rows(), w_down_.cols());
    g.w_up = DenseMatrix(w_up_.rows(), w_up_.cols());

    for (const auto& s : batch) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(s.q.cols()));
        const DenseMatrix k_proj = dense_matmul(w_down_, s.k); // n_down x d
        const DenseMatrix soft =
            softmax_rows(dense_matmul_nt(s.q, k_proj), scale); // n x n_down
        const DenseMatrix pred = dense_matmul(soft, w_up_);    // n x n

        double mse = 0.0;
        // dL/dpred for the batch-averaged per-entry MSE.
        DenseMatrix g_pred(n, n);
        const double inv =
            2.0 / (static_cast<double>(pred.size()) * static_cast<double>(batch.size()));
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred.data()[i] - s.a_teach.data()[i];
            mse += d * d;
            g_pred.data()[i] = inv * d;
        }
        g.loss += mse / static_cast<double>(pred.size());

        // pred = soft * w_up
        const DenseMatrix g_wup = dense_matmul(transpose(soft), g_pred);
        const DenseMatrix g_soft = dense_matmul_nt(g_pred, w_up_); // n x n_down

        // Row softmax backward: g_z = s .* (g_s - <g_s, s>).
        DenseMatrix g_logits(n, soft.cols());
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < soft.cols(); ++j)
                dot += g_soft(i, j) * soft(i, j);
            for (std::size_t j = 0; j < soft.cols(); ++j)
                g_logits(i, j) = soft(i, j) * (g_soft(i, j) - dot) * scale;
        }

        // logits*scale^-1 = q * k_proj^T, k_proj = w_down * k.
        const DenseMatrix g_kproj = dense_matmul(transpose(g_logits), s.q);
        const DenseMatrix g_wdown = dense_matmul_nt(g_kproj, s.k);

        for (std::size_t i = 0; i < g.w_up.size(); ++i)
            g.w_up.data()[i] += g_wup.data()[i];
        for (std::size_t i = 0; i < g.w_down.size(); ++i)
            g.w_down.data()[i] += g_wdown.data()[i];
    }
    g.loss /= static_cast<double>(batch.size());
    return g;
}

double Phase1Trainer::step(const std::vector<Phase1Sample>& batch, double lr,
                           double weight_decay) {
    require(lr >= 0.0 && weight_decay >= 0.0,
            "Phase1Trainer::step: lr and weight_decay must be >= 0");
    const Phase1Gradients g = gradients(batch);
    if (!g.w_down.all_finite() || !g.w_up.all_finite() || !std::isfinite(g.loss))
        throw NumericalError(
            "Phase1Trainer::step: non-finite gradient, step aborted");
    for (std::size_t i = 0; i < w_down_.size(); ++i)
        w_down_.data()[i] -= lr * g.w_down.data()[i];
    for (std::size_t i = 0; i < w_up_.size(); ++i)
        w_up_.data()[i] -=
            lr * (g.w_up.data()[i] + weight_decay * w_up_.data()[i]);
    return g.loss;
}

PredictorParams Phase1Trainer::to_params(double tau, std::size_t budget,
                                         double prune_threshold) const {
    PredictorParams p;
    p.w_down = w_down_;
    p.w_up = prune_wup(w_up_, prune_threshold);
    p.n_down = n_down();
    p.tau = tau;
    p.budget = budget;
    p.validate();
    return p;
}

CsrMatrix prune_wup(const CsrMatrix& w_up, double threshold) {
    require(threshold >= 0.0, "prune_wup: threshold must be >= 0");
    CsrBuilder b(w_up.rows(), w_up.cols());
    for (std::size_t i = 0; i < w_up.rows(); ++i) {
        const auto cols = w_up.row_cols(i);
        const auto vals = w_up.row_vals(i);
        for (std::size_t t = 0; t < cols.size(); ++t)
            if (!(std::abs(vals[t]) < threshold)) b.push(cols[t], vals[t]);
        b.finish_row();
    }
    return b.build();
}

CsrMatrix prune_wup(const DenseMatrix& w_up, double threshold) {
    require(threshold >= 0.0, "prune_wup: threshold must be >= 0");
    CsrBuilder b(w_up.rows(), w_up.cols());
    for (std::size_t i = 0; i < w_up.rows(); ++i) {
        for (std::size_t j = 0; j < w_up.cols(); ++j) {
            const double v = w_up(i, j);
            if (v != 0.0 && !(std::abs(v) < threshold)) b.push(j, v);
        }
        b.finish_row();
    }
    return b.build();
}

PredictorParams phase1_step(const std::vector<Phase1Sample>& batch,
                            const PredictorParams& params, double lr,
                            double weight_decay) {
    Phase1Trainer trainer = Phase1Trainer::from_params(params);
    trainer.step(batch, lr, weight_decay);
    PredictorParams out;
    out.w_down = trainer.w_down();
    out.w_up = CsrMatrix::from_dense(trainer.w_up());
    out.n_down = params.n_down;
    out.tau = params.tau;
    out.budget = params.budget;
    return out;
}

} // namespace sparsevit
