// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/predictor.hpp"

#include <algorithm>
#include <cmath>

#include "sparsevit/check.hpp"

namespace sparsevit {

void PredictorParams::validate() const {
    require(n_down >= 1, "PredictorParams: n_down must be >= 1");
    require(tau > 0.0 && tau < 1.0, "PredictorParams: tau must lie in (0, 1)");
    require(budget >= 1, "PredictorParams: budget must be >= 1");
    require(w_down.rows() == n_down, "PredictorParams: w_down rows != n_down");
    require(w_up.rows() == n_down, "PredictorParams: w_up rows != n_down");
    require(w_down.cols() == w_up.cols(),
            "PredictorParams: w_down and w_up disagree on n");
    require(budget <= w_down.cols(), "PredictorParams: budget exceeds n");
    w_up.validate();
}

void ConnectivityMask::validate(std::size_t budget) const {
    mask.validate();
    require(mask.rows() == mask.cols(), "ConnectivityMask: mask must be square");
    require(budget_used.size() == mask.rows(),
            "ConnectivityMask: budget_used length != rows");
    for (std::size_t i = 0; i < mask.rows(); ++i) {
        const std::size_t nnz = mask.row_nnz(i);
        require(nnz >= 1, "ConnectivityMask: empty row");
        require(nnz <= budget, "ConnectivityMask: row exceeds budget");
        require(budget_used[i] == nnz, "ConnectivityMask: budget_used mismatch");
        require(mask.has_entry(i, i), "ConnectivityMask: diagonal entry missing");
        for (double v : mask.row_vals(i))
            require(v == 1.0, "ConnectivityMask: stored value != 1");
    }
}

DenseMatrix lowrank_attention(const DenseMatrix& q, const DenseMatrix& k,
                              const PredictorParams& p) {
    require(p.n_down >= 1, "lowrank_attention: n_down must be >= 1");
    require(q.cols() == k.cols(), "lowrank_attention: q and k disagree on d_head");
    require(p.w_down.cols() == k.rows(),
            "lowrank_attention: w_down columns != token count");
    require(p.w_down.rows() == p.n_down, "lowrank_attention: w_down rows != n_down");
    const DenseMatrix k_proj = dense_matmul(p.w_down, k); // n_down x d_head
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    return softmax_rows(dense_matmul_nt(q, k_proj), scale);
}

CsrMatrix sparsify_lowrank(const DenseMatrix& a_down, double tau) {
    CsrBuilder b(a_down.rows(), a_down.cols());
    for (std::size_t i = 0; i < a_down.rows(); ++i) {
        bool kept = false;
        for (std::size_t j = 0; j < a_down.cols(); ++j) {
            if (a_down(i, j) > tau) {
                b.push(j, a_down(i, j));
                kept = true;
            }
        }
        if (!kept && a_down.cols() > 0) {
            // Nothing cleared the threshold: keep the row maximum so the row
            // never goes empty. std::max_element returns the first maximum,
            // i.e. the lowest column on ties.
            std::size_t arg = 0;
            double best = a_down(i, 0);
            for (std::size_t j = 1; j < a_down.cols(); ++j) {
                if (a_down(i, j) > best) {
                    best = a_down(i, j);
                    arg = j;
                }
            }
            b.push(arg, best);
        }
        b.finish_row();
    }
    return b.build();
}

ConnectivityMask predict_mask(const CsrMatrix& a_down_sparse,
                              const PredictorParams& p) {
    require(p.budget >= 1, "predict_mask: budget must be >= 1");
    require(a_down_sparse.cols() == p.w_up.rows(),
            "predict_mask: a_down_sparse columns != w_up rows");
    require(a_down_sparse.rows() == p.w_up.cols(),
            "predict_mask: mask would not be square");
    const std::size_t n = a_down_sparse.rows();
    require(p.budget <= n, "predict_mask: budget exceeds n");

    const CsrMatrix scores = spsp_matmul(a_down_sparse, p.w_up); // n x n

    ConnectivityMask out;
    out.budget_used.reserve(n);
    CsrBuilder b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> sel =
            top_k_row(scores.row_cols(i), scores.row_vals(i), p.budget);
        if (!std::binary_search(sel.begin(), sel.end(), i)) {
            if (sel.size() == p.budget) {
                // Displace the lowest-scoring selection: minimum value,
                // ties resolved toward the larger column (the entry top-k
                // would have dropped first).
                const auto vals = scores.row_vals(i);
                const auto cols = scores.row_cols(i);
                auto value_at = [&](std::size_t col) {
                    const auto it = std::lower_bound(cols.begin(), cols.end(), col);
                    return vals[static_cast<std::size_t>(it - cols.begin())];
                };
                std::size_t worst = 0;
                for (std::size_t s = 1; s < sel.size(); ++s) {
                    const double vw = value_at(sel[worst]);
                    const double vs = value_at(sel[s]);
                    if (vs < vw || (vs == vw && sel[s] > sel[worst])) worst = s;
                }
                sel.erase(sel.begin() + static_cast<std::ptrdiff_t>(worst));
            }
            sel.insert(std::lower_bound(sel.begin(), sel.end(), i), i);
        }
        for (std::size_t col : sel) b.push(col, 1.0);
        b.finish_row();
        out.budget_used.push_back(sel.size());
    }
    out.mask = b.build();
    return out;
}

std::size_t budget_from_keep_rate(double keep_rate, std::size_t n) {
    require(keep_rate > 0.0 && keep_rate <= 1.0,
            "budget_from_keep_rate: keep_rate must lie in (0, 1]");
    require(n >= 1, "budget_from_keep_rate: n must be >= 1");
    const double r = keep_rate * static_cast<double>(n);
    // Snap products that are an integer up to rounding noise (e.g. 0.6 * 5)
    // so the ceiling does not overshoot by one.
    const double nearest = std::round(r);
    const double c = std::abs(r - nearest) < 1e-9 * static_cast<double>(n)
                         ? nearest
                         : std::ceil(r);
    return static_cast<std::size_t>(c);
}

} // namespace sparsevit
