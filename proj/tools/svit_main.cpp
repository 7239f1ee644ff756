// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0
//
// svit — bench front end for the sparse-attention engine.
//
// Exit codes: 0 success, 1 check failure, 2 I/O or format error,
// 64 usage error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparsevit/attention.hpp"
#include "sparsevit/check.hpp"
#include "sparsevit/flops.hpp"
#include "sparsevit/losses.hpp"
#include "sparsevit/pnm.hpp"
#include "sparsevit/predictor.hpp"
#include "sparsevit/rng.hpp"
#include "sparsevit/sparse_mhsa.hpp"
#include "sparsevit/train.hpp"
#include "sparsevit/vit.hpp"
#include "sparsevit/weights.hpp"

namespace sv = sparsevit;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitIoError = 2;
constexpr int kExitUsage = 64;

class CliIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CliUsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CliIoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw CliIoError("short write: " + path.string());
}

fs::path prepare_out_dir(const std::string& out_dir) {
    fs::path p(out_dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw CliIoError("cannot create output directory: " + p.string());
    return p;
}

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(
        std::max_element(v.begin(), v.end()) - v.begin());
}

double vec_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double scale = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
        diff = std::max(diff, std::abs(a[i] - b[i]));
    }
    return scale == 0.0 ? 0.0 : diff / scale;
}

// ---------------------------------------------------------------------------
// Shared synthetic-model flags

struct ModelFlags {
    sv::SyntheticSpec spec;
    std::string weights;

    void add_to(CLI::App* cmd, bool tiny_defaults = true) {
        if (!tiny_defaults) {
            spec.image_size = 224;
            spec.patch_size = 16;
            spec.d_model = 384;
            spec.n_heads = 6;
            spec.n_layers = 12;
            spec.n_down = 32;
        }
        cmd->add_option("--seed", spec.seed, "Synthetic model seed")
            ->envname("SVIT_SEED")
            ->capture_default_str();
        cmd->add_option("--image-size", spec.image_size, "Input image size")
            ->capture_default_str();
        cmd->add_option("--patch-size", spec.patch_size, "Patch size")
            ->capture_default_str();
        cmd->add_option("--d-model", spec.d_model, "Embedding width")
            ->capture_default_str();
        cmd->add_option("--n-heads", spec.n_heads, "Attention heads per layer")
            ->capture_default_str();
        cmd->add_option("--n-layers", spec.n_layers, "Transformer depth")
            ->capture_default_str();
        cmd->add_option("--n-down", spec.n_down, "Predictor low-rank width")
            ->envname("SVIT_N_DOWN")
            ->capture_default_str();
        cmd->add_option("--tau", spec.tau, "Low-rank attention threshold")
            ->envname("SVIT_TAU")
            ->capture_default_str();
        cmd->add_option("--weights", weights,
                        "Load this weight file instead of a synthetic model");
    }

    sv::VitModel build() const {
        if (!weights.empty()) return sv::load_model(weights);
        return sv::make_synthetic_model(spec);
    }
};

// ---------------------------------------------------------------------------
// equivalence

struct EquivalenceOpts {
    std::uint64_t seed = 42;
    std::size_t models = 20;
    std::string weights;
    std::string out_dir = ".";
};

int run_equivalence(const EquivalenceOpts& opt) {
    constexpr double kTol = 1e-5;
    const fs::path out_dir = prepare_out_dir(opt.out_dir);
    std::string report;
    double worst_sparse = 0.0, worst_lin = 0.0;
    std::string failing;

    auto check_model = [&](sv::VitModel model, const std::string& name,
                           std::uint64_t image_seed) {
        sv::set_attention_budget(model, model.cfg.n_tokens());
        sv::set_tau(model, sv::keep_all_tau());
        const sv::Image img = sv::make_synthetic_image(model.cfg.image_size, image_seed);
        const auto dense = sv::forward_classify(img, model, sv::AttentionMode::kDense);
        const auto sparse = sv::forward_classify(img, model, sv::AttentionMode::kSparse);
        const auto lin = sv::forward_classify(img, model, sv::AttentionMode::kLinformer);
        const double sparse_rel = vec_rel_diff(dense, sparse);
        const double lin_rel = vec_rel_diff(dense, lin);
        worst_sparse = std::max(worst_sparse, sparse_rel);
        worst_lin = std::max(worst_lin, lin_rel);
        report += name + " n=" + std::to_string(model.cfg.n_tokens()) +
                  " d_model=" + std::to_string(model.cfg.d_model) +
                  " layers=" + std::to_string(model.cfg.n_layers) +
                  " sparse_rel=" + fmt("%.3e", sparse_rel) +
                  " linformer_rel=" + fmt("%.3e", lin_rel) + "\n";
        if (sparse_rel >= kTol && failing.empty())
            failing = name + ": sparse full-budget equivalence";
        if (lin_rel >= kTol && failing.empty())
            failing = name + ": identity-projection low-rank equivalence";
    };

    if (!opt.weights.empty()) {
        check_model(sv::load_model(opt.weights), "weights:" + opt.weights, opt.seed);
    } else {
        const std::size_t image_sizes[] = {16, 24, 32};
        const std::size_t widths[] = {16, 32, 64};
        const std::size_t heads[] = {2, 4};
        for (std::size_t i = 0; i < opt.models; ++i) {
            sv::SyntheticSpec spec;
            spec.seed = opt.seed + i;
            spec.image_size = image_sizes[i % 3];
            spec.patch_size = 8;
            spec.d_model = widths[(i / 3) % 3];
            spec.n_heads = heads[i % 2];
            spec.n_layers = 1 + i % 4;
            spec.n_down = 2 + 2 * (i % 3);
            spec.mlp_ratio = 2.0;
            check_model(sv::make_synthetic_model(spec),
                        "model_" + std::to_string(i), opt.seed ^ (0x9e37 + i));
        }
    }

    const bool pass = worst_sparse < kTol && worst_lin < kTol;
    report += "max_sparse_rel=" + fmt("%.3e", worst_sparse) +
              " max_linformer_rel=" + fmt("%.3e", worst_lin) +
              " tolerance=" + fmt("%.1e", kTol) +
              " status=" + (pass ? "PASS" : "FAIL") + "\n";
    write_text_file(out_dir / "equivalence.txt", report);
    std::fputs(report.c_str(), stdout);
    if (!pass) {
        std::fprintf(stderr, "equivalence: failed check: %s\n", failing.c_str());
        return kExitCheckFailure;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOpts {
    ModelFlags model;
    std::vector<double> keep_rates{0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05};
    std::string mode = "sparse";
    std::size_t images = 4;
    std::string out_dir = ".";
};

int run_sweep(const SweepOpts& opt) {
    for (double k : opt.keep_rates)
        if (!(k > 0.0 && k <= 1.0))
            throw CliUsageError("sweep: keep rates must lie in (0, 1]");
    if (opt.keep_rates.empty()) throw CliUsageError("sweep: no keep rates given");

    const fs::path out_dir = prepare_out_dir(opt.out_dir);
    sv::VitModel model = opt.model.build();
    const std::size_t n = model.cfg.n_tokens();
    const std::size_t d_model = model.cfg.d_model;
    const std::size_t n_layers = model.cfg.n_layers;
    const std::size_t n_down = model.layers.front().predictor.n_down;

    std::vector<double> rates = opt.keep_rates;
    std::sort(rates.rbegin(), rates.rend());

    std::vector<sv::Image> images;
    for (std::size_t i = 0; i < opt.images; ++i)
        images.push_back(sv::make_synthetic_image(model.cfg.image_size,
                                                  opt.model.spec.seed + 1000 + i));
    std::vector<std::size_t> dense_argmax;
    for (const auto& img : images)
        dense_argmax.push_back(
            argmax(sv::forward_classify(img, model, sv::AttentionMode::kDense)));

    std::string csv =
        "keep_rate,budget,qk_macs,av_macs,predictor_macs,total_mflops,"
        "measured_qk_macs,measured_av_macs,dense_agreement\n";
    std::size_t prev_total = 0;
    bool monotone = true;

    for (std::size_t r = 0; r < rates.size(); ++r) {
        const double keep = rates[r];
        const std::size_t budget = sv::budget_from_keep_rate(keep, n);
        sv::FlopReport report;
        std::size_t measured_qk = 0, measured_av = 0;
        std::size_t agree = 0;

        if (opt.mode == "dense") {
            report = sv::dense_mhsa_flops(n, d_model, n_layers);
            measured_qk = report.per_layer[0].qk_macs * n_layers;
            measured_av = measured_qk;
            agree = images.size();
        } else if (opt.mode == "sparse") {
            report = sv::sparse_mhsa_flops(n, d_model, n_down, budget, n_layers);
            sv::set_attention_budget(model, budget);
            for (std::size_t i = 0; i < images.size(); ++i) {
                sv::ForwardTrace trace;
                const auto scores =
                    sv::forward_classify(images[i], model, sv::AttentionMode::kSparse,
                                         sv::MaskedSoftmaxSemantics::kRenormalized,
                                         &trace);
                if (argmax(scores) == dense_argmax[i]) ++agree;
                if (i == 0) {
                    for (const auto& block : trace.blocks)
                        for (const auto& s : block.stats) {
                            measured_qk += s.qk_macs;
                            measured_av += s.av_macs;
                        }
                }
            }
        } else { // linformer: projections sized by the budget
            report = sv::linformer_mhsa_flops(n, d_model, budget, n_layers);
            measured_qk = report.per_layer[0].qk_macs * n_layers;
            measured_av = report.per_layer[0].av_macs * n_layers;
            sv::Rng rng(opt.model.spec.seed ^ (budget * 0x9e3779b97f4a7c15ull));
            const double scale = 1.0 / std::sqrt(static_cast<double>(n));
            sv::DenseMatrix e(budget, n), f(budget, n);
            for (std::size_t i = 0; i < e.size(); ++i) e.data()[i] = rng.symmetric(scale);
            for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = rng.symmetric(scale);
            for (auto& layer : model.layers) {
                layer.lin_e = e;
                layer.lin_f = f;
            }
            for (std::size_t i = 0; i < images.size(); ++i) {
                const auto scores = sv::forward_classify(
                    images[i], model, sv::AttentionMode::kLinformer);
                if (argmax(scores) == dense_argmax[i]) ++agree;
            }
        }

        const std::size_t total = report.total_macs();
        if (r > 0 && total > prev_total) monotone = false;
        prev_total = total;

        std::size_t qk = 0, av = 0, pred = 0;
        for (const auto& l : report.per_layer) {
            qk += l.qk_macs;
            av += l.av_macs;
            pred += l.predictor_macs;
        }
        csv += fmt("%.6f", keep) + "," + std::to_string(budget) + "," +
               std::to_string(qk) + "," + std::to_string(av) + "," +
               std::to_string(pred) + "," + fmt("%.6f", report.total_mflops()) +
               "," + std::to_string(measured_qk) + "," +
               std::to_string(measured_av) + "," +
               fmt("%.4f", static_cast<double>(agree) /
                               static_cast<double>(images.size())) +
               "\n";
    }

    write_text_file(out_dir / "sweep.csv", csv);
    std::fputs(csv.c_str(), stdout);
    if (!monotone) {
        std::fprintf(stderr,
                     "sweep: analytic FLOPs not monotone across keep rates\n");
        return kExitCheckFailure;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// flops

struct FlopsOpts {
    std::size_t n = 197;
    std::size_t d_model = 384;
    std::size_t n_layers = 12;
    std::size_t n_down = 32;
    std::vector<double> keep_rates{0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05};
    std::vector<std::size_t> k_lin;
    std::string out_dir = ".";
};

int run_flops(const FlopsOpts& opt) {
    for (double k : opt.keep_rates)
        if (!(k > 0.0 && k <= 1.0))
            throw CliUsageError("flops: keep rates must lie in (0, 1]");
    const fs::path out_dir = prepare_out_dir(opt.out_dir);

    std::string csv =
        "model,keep_rate,budget,qk_macs,av_macs,predictor_macs,total_mflops\n";
    auto add_row = [&](const std::string& name, const std::string& keep,
                       std::size_t budget, const sv::FlopReport& r) {
        std::size_t qk = 0, av = 0, pred = 0;
        for (const auto& l : r.per_layer) {
            qk += l.qk_macs;
            av += l.av_macs;
            pred += l.predictor_macs;
        }
        csv += name + "," + keep + "," + std::to_string(budget) + "," +
               std::to_string(qk) + "," + std::to_string(av) + "," +
               std::to_string(pred) + "," + fmt("%.6f", r.total_mflops()) + "\n";
    };

    add_row("dense", "1.000000", opt.n,
            sv::dense_mhsa_flops(opt.n, opt.d_model, opt.n_layers));
    for (double keep : opt.keep_rates) {
        const std::size_t budget = sv::budget_from_keep_rate(keep, opt.n);
        add_row("sparse", fmt("%.6f", keep), budget,
                sv::sparse_mhsa_flops(opt.n, opt.d_model, opt.n_down, budget,
                                      opt.n_layers));
    }
    for (std::size_t k : opt.k_lin) {
        if (k == 0) throw CliUsageError("flops: k-lin must be >= 1");
        add_row("linformer", "", k,
                sv::linformer_mhsa_flops(opt.n, opt.d_model, k, opt.n_layers));
    }

    write_text_file(out_dir / "flops.csv", csv);
    std::fputs(csv.c_str(), stdout);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// dump-attention

struct DumpOpts {
    ModelFlags model;
    std::string image_path;
    std::size_t layer = 0;
    std::size_t head = 0;
    std::size_t query = 0;
    std::size_t budget = 0; // 0 = full
    std::string out_dir = ".";
};

std::string row_csv(const std::vector<double>& row) {
    std::string out = "col,value\n";
    for (std::size_t j = 0; j < row.size(); ++j)
        out += std::to_string(j) + "," + fmt("%.17g", row[j]) + "\n";
    return out;
}

// Patch-token part of a row rendered as the g x g grid (CLS column left to
// the CSV, which carries the full row).
sv::DenseMatrix patch_grid(const std::vector<double>& row, std::size_t g) {
    sv::DenseMatrix m(g, g);
    for (std::size_t i = 0; i < g * g; ++i) m.data()[i] = row[1 + i];
    return m;
}

int run_dump(const DumpOpts& opt) {
    sv::VitModel model = opt.model.build();
    const std::size_t n = model.cfg.n_tokens();
    if (opt.layer >= model.cfg.n_layers)
        throw CliUsageError("dump-attention: layer " + std::to_string(opt.layer) +
                            " out of range [0, " +
                            std::to_string(model.cfg.n_layers) + ")");
    if (opt.head >= model.cfg.n_heads)
        throw CliUsageError("dump-attention: head " + std::to_string(opt.head) +
                            " out of range [0, " +
                            std::to_string(model.cfg.n_heads) + ")");
    if (opt.query >= n)
        throw CliUsageError("dump-attention: query " + std::to_string(opt.query) +
                            " out of range [0, " + std::to_string(n) + ")");
    if (opt.budget > n)
        throw CliUsageError("dump-attention: budget " + std::to_string(opt.budget) +
                            " out of range [1, " + std::to_string(n) + "]");
    if (opt.budget > 0) sv::set_attention_budget(model, opt.budget);
    else sv::set_attention_budget(model, n);

    const fs::path out_dir = prepare_out_dir(opt.out_dir);
    const sv::Image img = opt.image_path.empty()
                              ? sv::make_synthetic_image(model.cfg.image_size,
                                                         opt.model.spec.seed + 7)
                              : sv::read_ppm(opt.image_path);

    // March the tokens up to the requested layer, then expand that layer's
    // attention by hand through the public kernels.
    sv::TokenSequence x = sv::patch_embed(img, model);
    for (std::size_t l = 0; l < opt.layer; ++l)
        x = sv::transformer_block(x, model.layers[l], sv::AttentionMode::kSparse);
    const sv::LayerParams& layer = model.layers[opt.layer];
    const sv::DenseMatrix h1 =
        sv::layer_norm(x.tokens, layer.norm1_scale, layer.norm1_shift);

    std::vector<sv::SparseHeadDetail> detail;
    sv::sparse_multi_head_attention(h1, layer.heads, layer.predictor, layer.w_o,
                                    sv::MaskedSoftmaxSemantics::kRenormalized,
                                    &detail);
    const sv::SparseHeadDetail& d = detail[opt.head];
    const auto full =
        sv::naive_attention_head(h1, layer.heads[opt.head]).attn;

    auto gather_row = [n](const sv::CsrMatrix& m, std::size_t i) {
        std::vector<double> row(n, 0.0);
        const auto cols = m.row_cols(i);
        const auto vals = m.row_vals(i);
        for (std::size_t t = 0; t < cols.size(); ++t) row[cols[t]] = vals[t];
        return row;
    };

    const std::vector<double> mask_row = gather_row(d.mask.mask, opt.query);
    const std::vector<double> sparse_row = gather_row(d.attn, opt.query);
    std::vector<double> full_row(full.row(opt.query).begin(),
                                 full.row(opt.query).end());
    std::vector<double> adown_row(d.a_down.row(opt.query).begin(),
                                  d.a_down.row(opt.query).end());

    const std::size_t g = model.cfg.grid();
    write_text_file(out_dir / "mask_row.csv", row_csv(mask_row));
    sv::write_pgm(patch_grid(mask_row, g), (out_dir / "mask_row.pgm").string());
    write_text_file(out_dir / "sparse_attn_row.csv", row_csv(sparse_row));
    sv::write_pgm(patch_grid(sparse_row, g),
                  (out_dir / "sparse_attn_row.pgm").string());
    write_text_file(out_dir / "full_attn_row.csv", row_csv(full_row));
    sv::write_pgm(patch_grid(full_row, g),
                  (out_dir / "full_attn_row.pgm").string());
    write_text_file(out_dir / "adown_row.csv", row_csv(adown_row));
    sv::write_pgm(sv::DenseMatrix(1, adown_row.size(), adown_row),
                  (out_dir / "adown_row.pgm").string());

    const sv::DenseMatrix wup = layer.predictor.w_up.to_dense();
    std::string wup_csv;
    for (std::size_t i = 0; i < wup.rows(); ++i) {
        for (std::size_t j = 0; j < wup.cols(); ++j)
            wup_csv += (j ? "," : "") + fmt("%.17g", wup(i, j));
        wup_csv += "\n";
    }
    write_text_file(out_dir / "wup.csv", wup_csv);
    sv::write_pgm(wup, (out_dir / "wup.pgm").string());

    std::printf("dump-attention: wrote layer %zu head %zu query %zu to %s\n",
                opt.layer, opt.head, opt.query, out_dir.string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train-phase1

struct TrainOpts {
    ModelFlags model;
    std::size_t steps = 50;
    double lr = 1e-2;
    double weight_decay = 0.05;
    double prune_threshold = 1e-2;
    std::size_t budget = 0; // 0 = full
    std::string out_dir = ".";
};

int run_train(const TrainOpts& opt) {
    if (opt.steps == 0) throw CliUsageError("train-phase1: steps must be >= 1");
    const fs::path out_dir = prepare_out_dir(opt.out_dir);
    sv::VitModel model = opt.model.build();
    const std::size_t n = model.cfg.n_tokens();
    const std::size_t budget = opt.budget == 0 ? n : opt.budget;
    if (budget > n)
        throw CliUsageError("train-phase1: budget " + std::to_string(budget) +
                            " out of range [1, " + std::to_string(n) + "]");

    const sv::Image img =
        sv::make_synthetic_image(model.cfg.image_size, opt.model.spec.seed + 13);
    const sv::TeacherTrace teacher = sv::collect_teacher(img, model);

    std::string csv = "step,layer,loss\n";
    bool ok = true;
    std::string summary;
    for (std::size_t l = 0; l < model.cfg.n_layers; ++l) {
        std::vector<sv::Phase1Sample> batch;
        for (const auto& head : teacher.layers[l])
            batch.push_back({head.q, head.k, head.attn});

        sv::Phase1Trainer trainer =
            sv::Phase1Trainer::from_params(model.layers[l].predictor);
        const double initial = trainer.loss(batch);
        double last = initial;
        for (std::size_t s = 0; s < opt.steps; ++s) {
            trainer.step(batch, opt.lr, opt.weight_decay);
            last = trainer.loss(batch);
            csv += std::to_string(s) + "," + std::to_string(l) + "," +
                   fmt("%.12e", last) + "\n";
        }
        const sv::PredictorParams trained = trainer.to_params(
            model.layers[l].predictor.tau, budget, opt.prune_threshold);
        summary += "layer " + std::to_string(l) +
                   ": initial_loss=" + fmt("%.6e", initial) +
                   " final_loss=" + fmt("%.6e", last) +
                   " basis_density=" + fmt("%.4f", trained.w_up.density()) + "\n";
        if (!(last <= initial) || !std::isfinite(last)) ok = false;
        model.layers[l].predictor = trained;
    }

    // The pruned predictor must still produce valid masks end to end.
    sv::ForwardTrace trace;
    sv::forward_classify(img, model, sv::AttentionMode::kSparse,
                         sv::MaskedSoftmaxSemantics::kRenormalized, &trace);
    for (const auto& block : trace.blocks)
        for (const auto& mask : block.masks) mask.validate(budget);

    write_text_file(out_dir / "losses.csv", csv);
    write_text_file(out_dir / "summary.txt", summary);
    sv::save_model(model, (out_dir / "model.svwf").string());
    std::fputs(summary.c_str(), stdout);
    if (!ok) {
        std::fprintf(stderr, "train-phase1: loss failed to decrease\n");
        return kExitCheckFailure;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse-attention ViT inference and analysis bench"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "INI-style config file; command-line flags override it");

    EquivalenceOpts eq;
    auto* eq_cmd = app.add_subcommand(
        "equivalence", "Dense vs sparse vs low-rank consistency suite");
    eq_cmd->add_option("--seed", eq.seed, "Base seed")->envname("SVIT_SEED")
        ->capture_default_str();
    eq_cmd->add_option("--models", eq.models, "Number of synthetic models")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}))
        ->capture_default_str();
    eq_cmd->add_option("--weights", eq.weights, "Check a saved model instead");
    eq_cmd->add_option("--out-dir", eq.out_dir, "Report directory")
        ->envname("SVIT_OUT_DIR")->capture_default_str();

    SweepOpts sweep;
    auto* sweep_cmd = app.add_subcommand(
        "sweep", "Budget sweep: analytic cost, measured work, agreement");
    sweep.model.add_to(sweep_cmd);
    sweep_cmd->add_option("--keep-rates", sweep.keep_rates,
                          "Keep rates in (0, 1]")
        ->delimiter(',')->envname("SVIT_KEEP_RATES");
    sweep_cmd->add_option("--mode", sweep.mode, "Attention path to sweep")
        ->check(CLI::IsMember({"dense", "sparse", "linformer"}))
        ->envname("SVIT_MODE")->capture_default_str();
    sweep_cmd->add_option("--images", sweep.images,
                          "Synthetic images for the agreement column")
        ->check(CLI::Range(std::size_t{1}, std::size_t{64}))
        ->capture_default_str();
    sweep_cmd->add_option("--out-dir", sweep.out_dir, "Output directory")
        ->envname("SVIT_OUT_DIR")->capture_default_str();

    FlopsOpts flops;
    auto* flops_cmd =
        app.add_subcommand("flops", "Analytic attention cost table");
    flops_cmd->add_option("--n", flops.n, "Token count")->capture_default_str();
    flops_cmd->add_option("--d-model", flops.d_model, "Embedding width")
        ->capture_default_str();
    flops_cmd->add_option("--n-layers", flops.n_layers, "Depth")
        ->capture_default_str();
    flops_cmd->add_option("--n-down", flops.n_down, "Predictor low-rank width")
        ->envname("SVIT_N_DOWN")->capture_default_str();
    flops_cmd->add_option("--keep-rates", flops.keep_rates, "Keep rates")
        ->delimiter(',')->envname("SVIT_KEEP_RATES");
    flops_cmd->add_option("--k-lin", flops.k_lin,
                          "Also emit low-rank baseline rows at these widths")
        ->delimiter(',');
    flops_cmd->add_option("--out-dir", flops.out_dir, "Output directory")
        ->envname("SVIT_OUT_DIR")->capture_default_str();

    DumpOpts dump;
    auto* dump_cmd = app.add_subcommand(
        "dump-attention", "Dump mask/attention rows and the basis as PGM+CSV");
    dump.model.add_to(dump_cmd);
    dump_cmd->add_option("--image", dump.image_path, "Input image (binary PPM)");
    dump_cmd->add_option("--layer", dump.layer, "Layer index")->capture_default_str();
    dump_cmd->add_option("--head", dump.head, "Head index")->capture_default_str();
    dump_cmd->add_option("--query", dump.query, "Query token index")
        ->capture_default_str();
    dump_cmd->add_option("--budget", dump.budget, "Mask budget (0 = full)")
        ->capture_default_str();
    dump_cmd->add_option("--out-dir", dump.out_dir, "Output directory")
        ->envname("SVIT_OUT_DIR")->capture_default_str();

    TrainOpts train;
    auto* train_cmd = app.add_subcommand(
        "train-phase1", "Predictor-only distillation on a synthetic teacher");
    train.model.add_to(train_cmd);
    train_cmd->add_option("--steps", train.steps, "Descent steps")
        ->capture_default_str();
    train_cmd->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
    train_cmd->add_option("--weight-decay", train.weight_decay,
                          "Decoupled decay on the basis")
        ->capture_default_str();
    train_cmd->add_option("--prune-threshold", train.prune_threshold,
                          "Post-training basis prune threshold")
        ->capture_default_str();
    train_cmd->add_option("--budget", train.budget,
                          "Mask budget for the final check (0 = full)")
        ->capture_default_str();
    train_cmd->add_option("--out-dir", train.out_dir, "Output directory")
        ->envname("SVIT_OUT_DIR")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (eq_cmd->parsed()) return run_equivalence(eq);
        if (sweep_cmd->parsed()) return run_sweep(sweep);
        if (flops_cmd->parsed()) return run_flops(flops);
        if (dump_cmd->parsed()) return run_dump(dump);
        if (train_cmd->parsed()) return run_train(train);
    } catch (const CliUsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const sv::WeightsError& e) {
        std::fprintf(stderr, "weight file error: %s\n", e.what());
        return kExitIoError;
    } catch (const sv::PnmError& e) {
        std::fprintf(stderr, "image file error: %s\n", e.what());
        return kExitIoError;
    } catch (const CliIoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIoError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "check failure: %s\n", e.what());
        return kExitCheckFailure;
    }
    return kExitOk;
}
