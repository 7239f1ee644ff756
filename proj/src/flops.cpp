// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/flops.hpp"

#include "sparsevit/check.hpp"

namespace sparsevit {

std::size_t FlopReport::total_macs() const {
    std::size_t acc = 0;
    for (const auto& l : per_layer) acc += l.total();
    return acc;
}

namespace {
double share(const FlopReport& r, std::size_t LayerFlops::* field) {
    const std::size_t total = r.total_macs();
    if (total == 0) return 0.0;
    std::size_t part = 0;
    for (const auto& l : r.per_layer) part += l.*field;
    return 100.0 * static_cast<double>(part) / static_cast<double>(total);
}
} // namespace

double FlopReport::qk_share() const { return share(*this, &LayerFlops::qk_macs); }
double FlopReport::av_share() const { return share(*this, &LayerFlops::av_macs); }
double FlopReport::predictor_share() const {
    return share(*this, &LayerFlops::predictor_macs);
}

FlopReport dense_mhsa_flops(std::size_t n, std::size_t d_model,
                            std::size_t n_layers) {
    require(n >= 1 && d_model >= 1 && n_layers >= 1,
            "dense_mhsa_flops: dimensions must be >= 1");
    LayerFlops layer;
    layer.qk_macs = n * n * d_model;
    layer.av_macs = n * n * d_model;
    FlopReport r;
    r.per_layer.assign(n_layers, layer);
    return r;
}

FlopReport sparse_mhsa_flops(std::size_t n, std::size_t d_model,
                             std::size_t n_down, std::size_t budget,
                             std::size_t n_layers) {
    require(n >= 1 && d_model >= 1 && n_layers >= 1,
            "sparse_mhsa_flops: dimensions must be >= 1");
    require(budget >= 1, "sparse_mhsa_flops: budget must be >= 1");
    require(budget <= n, "sparse_mhsa_flops: budget exceeds n");
    LayerFlops layer;
    layer.qk_macs = n * budget * d_model;
    layer.av_macs = n * budget * d_model;
    layer.predictor_macs = 2 * n * n_down * d_model + n * n_down * n;
    FlopReport r;
    r.per_layer.assign(n_layers, layer);
    return r;
}

FlopReport linformer_mhsa_flops(std::size_t n, std::size_t d_model,
                                std::size_t k_lin, std::size_t n_layers) {
    require(n >= 1 && d_model >= 1 && n_layers >= 1 && k_lin >= 1,
            "linformer_mhsa_flops: dimensions must be >= 1");
    LayerFlops layer;
    layer.qk_macs = n * k_lin * d_model;
    layer.av_macs = n * k_lin * d_model;
    layer.predictor_macs = 2 * k_lin * n * d_model; // K and V projections
    FlopReport r;
    r.per_layer.assign(n_layers, layer);
    return r;
}

WorkDiscrepancy measured_vs_analytic(const FlopReport& report,
                                     std::size_t layer,
                                     const std::vector<HeadWorkStats>& stats) {
    require(layer < report.per_layer.size(),
            "measured_vs_analytic: layer out of range");
    WorkDiscrepancy d;
    d.analytic_qk_macs = report.per_layer[layer].qk_macs;
    d.analytic_av_macs = report.per_layer[layer].av_macs;
    for (const auto& s : stats) {
        d.measured_qk_macs += s.qk_macs;
        d.measured_av_macs += s.av_macs;
    }
    return d;
}

} // namespace sparsevit
