// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/losses.hpp"

#include <algorithm>
#include <cmath>

#include "sparsevit/check.hpp"

namespace sparsevit {

namespace {
constexpr double kKlFloor = 1e-12;
constexpr double kDistributionTol = 1e-6;

void require_distribution(const std::vector<double>& p, const char* what) {
    require(!p.empty(), std::string(what) + ": empty distribution");
    double sum = 0.0;
    for (double v : p) {
        require(std::isfinite(v) && v >= 0.0,
                std::string(what) + ": entries must be finite and >= 0");
        sum += v;
    }
    require(std::abs(sum - 1.0) <= kDistributionTol,
            std::string(what) + ": entries must sum to 1");
}
} // namespace

void LossWeights::validate() const {
    require(lambda_token >= 0.0 && lambda_cls >= 0.0 && lambda_attn >= 0.0 &&
                weight_decay >= 0.0,
            "LossWeights: weights must be >= 0");
}

LossWeights LossWeights::phase1() { return {0.0, 0.0, 1.0, 0.05}; }

LossWeights LossWeights::phase2() { return {0.5, 0.5, 0.0, 0.05}; }

double loss_cls(const std::vector<double>& scores, std::size_t label) {
    require(!scores.empty(), "loss_cls: empty scores");
    require(label < scores.size(), "loss_cls: label out of range");
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - m);
    return m + std::log(sum) - scores[label];
}

double loss_token_distill(const DenseMatrix& x, const DenseMatrix& x_teach) {
    require(x.rows() == x_teach.rows() && x.cols() == x_teach.cols(),
            "loss_token_distill: shape mismatch");
    require(!x.empty(), "loss_token_distill: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.data()[i] - x_teach.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

double loss_cls_distill(const std::vector<double>& pred_probs,
                        const std::vector<double>& teach_probs) {
    require(pred_probs.size() == teach_probs.size(),
            "loss_cls_distill: length mismatch");
    require_distribution(pred_probs, "loss_cls_distill(pred)");
    require_distribution(teach_probs, "loss_cls_distill(teach)");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred_probs.size(); ++i) {
        const double p = std::max(pred_probs[i], kKlFloor);
        const double t = std::max(teach_probs[i], kKlFloor);
        acc += p * std::log(p / t);
    }
    return acc;
}

double loss_attn_distill(const DenseMatrix& scores, const DenseMatrix& a_teach) {
    require(scores.rows() == a_teach.rows() && scores.cols() == a_teach.cols(),
            "loss_attn_distill: shape mismatch");
    require(!scores.empty(), "loss_attn_distill: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double d = scores.data()[i] - a_teach.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(scores.size());
}

double l2_reg(const CsrMatrix& w_up) {
    double acc = 0.0;
    for (double v : w_up.values()) acc += v * v;
    return acc;
}

std::vector<double> softmax_vector(const std::vector<double>& scores) {
    require(!scores.empty(), "softmax_vector: empty scores");
    const double m = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
    weights.validate();
    return parts.cls + weights.lambda_token * parts.token +
           weights.lambda_cls * parts.cls_kl + weights.lambda_attn * parts.attn;
}

} // namespace sparsevit
