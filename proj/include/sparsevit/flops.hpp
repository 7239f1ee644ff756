// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "sparsevit/sparse_mhsa.hpp"

namespace sparsevit {

/// MAC counts for one layer's attention, split into the three cost
/// centers. One MAC counts as one FLOP; only attention-matrix construction
/// and attention-value products are counted (QKV/output projections,
/// softmax and the MLP are excluded by convention).
struct LayerFlops {
    std::size_t qk_macs = 0;
    std::size_t av_macs = 0;
    std::size_t predictor_macs = 0;

    std::size_t total() const { return qk_macs + av_macs + predictor_macs; }
};

struct FlopReport {
    std::vector<LayerFlops> per_layer;

    std::size_t total_macs() const;
    double total_mflops() const { return static_cast<double>(total_macs()) / 1e6; }
    double qk_share() const;
    double av_share() const;
    double predictor_share() const;
};

/// Dense MHSA: n^2 * d_model MACs for QK^T and the same for AV, per layer.
FlopReport dense_mhsa_flops(std::size_t n, std::size_t d_model,
                            std::size_t n_layers);

/// Mask-predicted sparse MHSA, assuming every row saturates its budget:
/// masked QK and sparse AV cost n*budget*d_model each; the predictor adds
/// 2*n*n_down*d_model (key down-projection and low-rank QK across heads)
/// plus n*n_down*n (up-projection at its dense worst case). n_down = 0
/// models a disabled predictor.
FlopReport sparse_mhsa_flops(std::size_t n, std::size_t d_model,
                             std::size_t n_down, std::size_t budget,
                             std::size_t n_layers);

/// Low-rank baseline: 2*k_lin*n*d_model for the K and V projections plus
/// n*k_lin*d_model each for QK^T and AV.
FlopReport linformer_mhsa_flops(std::size_t n, std::size_t d_model,
                                std::size_t k_lin, std::size_t n_layers);

/// Comparison of the analytic masked-QK/AV budget against instrumented
/// counts. Measured work can only fall short of analytic (rows below
/// budget); equality means every row saturated.
struct WorkDiscrepancy {
    std::size_t analytic_qk_macs = 0;
    std::size_t analytic_av_macs = 0;
    std::size_t measured_qk_macs = 0;
    std::size_t measured_av_macs = 0;

    bool measured_within_analytic() const {
        return measured_qk_macs <= analytic_qk_macs &&
               measured_av_macs <= analytic_av_macs;
    }
    std::size_t qk_gap() const { return analytic_qk_macs - measured_qk_macs; }
    std::size_t av_gap() const { return analytic_av_macs - measured_av_macs; }
};

/// Aggregates instrumented per-head stats of one layer against the layer's
/// analytic budget costs from `report`.
WorkDiscrepancy measured_vs_analytic(const FlopReport& report,
                                     std::size_t layer,
                                     const std::vector<HeadWorkStats>& stats);

} // namespace sparsevit
