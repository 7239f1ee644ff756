// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/weights.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparsevit/check.hpp"
#include "sparsevit/csr_matrix.hpp"

namespace sparsevit {

namespace {

constexpr char kMagic[4] = {'S', 'V', 'W', 'F'};
constexpr std::uint32_t kVersion = 1;
// Guards against absurd manifests before any allocation happens.
constexpr std::size_t kMaxElements = 100'000'000;

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint32_t read_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::string tensor_name(const char* fmt, std::size_t a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), fmt, a);
    return buf;
}

std::string tensor_name(const char* fmt, std::size_t a, std::size_t b) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), fmt, a, b);
    return buf;
}

} // namespace

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

Tensor Tensor::from_matrix(const DenseMatrix& m) {
    Tensor t;
    t.dtype = Dtype::kF64;
    t.shape = {m.rows(), m.cols()};
    t.f64 = m.data();
    return t;
}

Tensor Tensor::from_vector(const std::vector<double>& v) {
    Tensor t;
    t.dtype = Dtype::kF64;
    t.shape = {v.size()};
    t.f64 = v;
    return t;
}

Tensor Tensor::from_indices(const std::vector<std::size_t>& v) {
    Tensor t;
    t.dtype = Dtype::kI64;
    t.shape = {v.size()};
    t.i64.reserve(v.size());
    for (std::size_t x : v) t.i64.push_back(static_cast<std::int64_t>(x));
    return t;
}

DenseMatrix Tensor::to_matrix() const {
    require(dtype == Dtype::kF64 && shape.size() == 2,
            "Tensor::to_matrix: need a rank-2 f64 tensor");
    return DenseMatrix(shape[0], shape[1], f64);
}

std::vector<double> Tensor::to_vector() const {
    require(dtype == Dtype::kF64 && shape.size() == 1,
            "Tensor::to_vector: need a rank-1 f64 tensor");
    return f64;
}

std::vector<std::size_t> Tensor::to_indices() const {
    require(dtype == Dtype::kI64 && shape.size() == 1,
            "Tensor::to_indices: need a rank-1 i64 tensor");
    std::vector<std::size_t> out;
    out.reserve(i64.size());
    for (std::int64_t v : i64) {
        require(v >= 0, "Tensor::to_indices: negative index");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

Tensor* TensorFile::find(const std::string& name) {
    for (auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

const Tensor* TensorFile::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void TensorFile::add(const std::string& name, Tensor t) {
    tensors.emplace_back(name, std::move(t));
}

void save_tensor_file(const TensorFile& file, const std::string& path) {
    std::string manifest;
    for (const auto& [name, t] : file.tensors) {
        if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
            throw WeightsError(WeightsErrorCode::kBadManifest,
                               "tensor name unusable in manifest: '" + name + "'");
        const std::size_t count =
            t.dtype == Tensor::Dtype::kF64 ? t.f64.size() : t.i64.size();
        if (count != t.numel())
            throw WeightsError(WeightsErrorCode::kShapeMismatch,
                               "tensor '" + name + "' data does not match its shape");
        manifest += "tensor " + name;
        manifest += t.dtype == Tensor::Dtype::kF64 ? " f64" : " i64";
        for (std::size_t d : t.shape) manifest += " " + std::to_string(d);
        manifest += "\n";
    }

    std::string blob;
    blob.append(kMagic, 4);
    append_u32(blob, kVersion);
    append_u64(blob, manifest.size());
    blob += manifest;
    for (const auto& [name, t] : file.tensors) {
        if (t.dtype == Tensor::Dtype::kF64) {
            for (double v : t.f64) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof(bits));
                append_u64(blob, bits);
            }
        } else {
            for (std::int64_t v : t.i64)
                append_u64(blob, static_cast<std::uint64_t>(v));
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw WeightsError(WeightsErrorCode::kIo, "cannot open for writing: " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw WeightsError(WeightsErrorCode::kIo, "short write: " + path);
}

TensorFile load_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WeightsError(WeightsErrorCode::kIo, "cannot open: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    if (in.bad()) throw WeightsError(WeightsErrorCode::kIo, "read failure: " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());

    if (blob.size() < 16)
        throw WeightsError(WeightsErrorCode::kTruncated, "file shorter than header");
    if (std::memcmp(blob.data(), kMagic, 4) != 0)
        throw WeightsError(WeightsErrorCode::kBadMagic, "bad magic bytes");
    const std::uint32_t version = read_u32(p + 4);
    if (version != kVersion)
        throw WeightsError(WeightsErrorCode::kBadVersion,
                           "unsupported version " + std::to_string(version));
    const std::uint64_t manifest_size = read_u64(p + 8);
    if (16 + manifest_size > blob.size())
        throw WeightsError(WeightsErrorCode::kTruncated, "manifest truncated");

    TensorFile file;
    std::size_t payload_words = 0;
    {
        std::istringstream manifest(blob.substr(16, manifest_size));
        std::string line;
        while (std::getline(manifest, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string keyword, name, dtype;
            if (!(ls >> keyword >> name >> dtype) || keyword != "tensor")
                throw WeightsError(WeightsErrorCode::kBadManifest,
                                   "unparseable manifest line: " + line);
            Tensor t;
            if (dtype == "f64")
                t.dtype = Tensor::Dtype::kF64;
            else if (dtype == "i64")
                t.dtype = Tensor::Dtype::kI64;
            else
                throw WeightsError(WeightsErrorCode::kBadManifest,
                                   "unknown dtype in manifest: " + dtype);
            long long dim;
            while (ls >> dim) {
                if (dim < 0)
                    throw WeightsError(WeightsErrorCode::kBadManifest,
                                       "negative dimension in manifest");
                t.shape.push_back(static_cast<std::size_t>(dim));
            }
            if (!ls.eof())
                throw WeightsError(WeightsErrorCode::kBadManifest,
                                   "unparseable dimension in manifest line: " + line);
            if (t.shape.empty())
                throw WeightsError(WeightsErrorCode::kBadManifest,
                                   "tensor without dimensions: " + name);
            std::size_t numel = 1;
            for (std::size_t d : t.shape) {
                if (d > kMaxElements || numel > kMaxElements / (d == 0 ? 1 : d))
                    throw WeightsError(WeightsErrorCode::kBadManifest,
                                       "tensor too large: " + name);
                numel *= d;
            }
            if (file.find(name))
                throw WeightsError(WeightsErrorCode::kBadManifest,
                                   "duplicate tensor name: " + name);
            payload_words += numel;
            file.add(name, std::move(t));
        }
    }

    const std::size_t payload_offset = 16 + manifest_size;
    if (payload_offset + payload_words * 8 > blob.size())
        throw WeightsError(WeightsErrorCode::kTruncated,
                           "payload shorter than the manifest promises");
    if (payload_offset + payload_words * 8 < blob.size())
        throw WeightsError(WeightsErrorCode::kBadManifest,
                           "trailing bytes after payload");

    const unsigned char* cursor = p + payload_offset;
    for (auto& [name, t] : file.tensors) {
        const std::size_t numel = t.numel();
        if (t.dtype == Tensor::Dtype::kF64) {
            t.f64.resize(numel);
            for (std::size_t i = 0; i < numel; ++i, cursor += 8) {
                const std::uint64_t bits = read_u64(cursor);
                std::memcpy(&t.f64[i], &bits, sizeof(double));
            }
        } else {
            t.i64.resize(numel);
            for (std::size_t i = 0; i < numel; ++i, cursor += 8)
                t.i64[i] = static_cast<std::int64_t>(read_u64(cursor));
        }
    }
    return file;
}

namespace {

const Tensor& need(const TensorFile& file, const std::string& name) {
    const Tensor* t = file.find(name);
    if (!t)
        throw WeightsError(WeightsErrorCode::kMissingTensor,
                           "missing tensor: " + name);
    return *t;
}

DenseMatrix need_matrix(const TensorFile& file, const std::string& name,
                        std::size_t rows, std::size_t cols) {
    const Tensor& t = need(file, name);
    if (t.dtype != Tensor::Dtype::kF64 || t.shape.size() != 2 ||
        t.shape[0] != rows || t.shape[1] != cols)
        throw WeightsError(WeightsErrorCode::kShapeMismatch,
                           "tensor '" + name + "' is not f64 " +
                               std::to_string(rows) + "x" + std::to_string(cols));
    return t.to_matrix();
}

std::vector<double> need_vector(const TensorFile& file, const std::string& name,
                                std::size_t len) {
    const Tensor& t = need(file, name);
    if (t.dtype != Tensor::Dtype::kF64 || t.shape.size() != 1 || t.shape[0] != len)
        throw WeightsError(WeightsErrorCode::kShapeMismatch,
                           "tensor '" + name + "' is not f64 [" +
                               std::to_string(len) + "]");
    return t.to_vector();
}

std::vector<std::size_t> need_indices(const TensorFile& file,
                                      const std::string& name, std::size_t len) {
    const Tensor& t = need(file, name);
    if (t.dtype != Tensor::Dtype::kI64 || t.shape.size() != 1 || t.shape[0] != len)
        throw WeightsError(WeightsErrorCode::kShapeMismatch,
                           "tensor '" + name + "' is not i64 [" +
                               std::to_string(len) + "]");
    try {
        return t.to_indices();
    } catch (const InvalidArgument& e) {
        throw WeightsError(WeightsErrorCode::kShapeMismatch,
                           "tensor '" + name + "': " + e.what());
    }
}

} // namespace

void save_model(const VitModel& model, const std::string& path,
                const TeacherAttn* teacher) {
    model.validate();
    const ModelConfig& cfg = model.cfg;
    TensorFile file;

    Tensor dims;
    dims.dtype = Tensor::Dtype::kI64;
    dims.shape = {6};
    dims.i64 = {static_cast<std::int64_t>(cfg.image_size),
                static_cast<std::int64_t>(cfg.patch_size),
                static_cast<std::int64_t>(cfg.d_model),
                static_cast<std::int64_t>(cfg.n_heads),
                static_cast<std::int64_t>(cfg.n_layers),
                static_cast<std::int64_t>(cfg.n_classes)};
    file.add("config.dims", std::move(dims));
    file.add("config.mlp_ratio", Tensor::from_vector({cfg.mlp_ratio}));

    file.add("patch_proj", Tensor::from_matrix(model.patch_proj));
    file.add("cls_token", Tensor::from_matrix(model.cls_token));
    file.add("pos_embed", Tensor::from_matrix(model.pos_embed));

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const LayerParams& layer = model.layers[l];
        for (std::size_t h = 0; h < layer.heads.size(); ++h) {
            file.add(tensor_name("layer.%zu.head.%zu.w_q", l, h),
                     Tensor::from_matrix(layer.heads[h].w_q));
            file.add(tensor_name("layer.%zu.head.%zu.w_k", l, h),
                     Tensor::from_matrix(layer.heads[h].w_k));
            file.add(tensor_name("layer.%zu.head.%zu.w_v", l, h),
                     Tensor::from_matrix(layer.heads[h].w_v));
        }
        file.add(tensor_name("layer.%zu.w_o", l), Tensor::from_matrix(layer.w_o));
        file.add(tensor_name("layer.%zu.mlp_in", l),
                 Tensor::from_matrix(layer.mlp_in));
        file.add(tensor_name("layer.%zu.mlp_out", l),
                 Tensor::from_matrix(layer.mlp_out));
        file.add(tensor_name("layer.%zu.norm1.scale", l),
                 Tensor::from_vector(layer.norm1_scale));
        file.add(tensor_name("layer.%zu.norm1.shift", l),
                 Tensor::from_vector(layer.norm1_shift));
        file.add(tensor_name("layer.%zu.norm2.scale", l),
                 Tensor::from_vector(layer.norm2_scale));
        file.add(tensor_name("layer.%zu.norm2.shift", l),
                 Tensor::from_vector(layer.norm2_shift));

        const PredictorParams& pred = layer.predictor;
        file.add(tensor_name("layer.%zu.pred.w_down", l),
                 Tensor::from_matrix(pred.w_down));
        file.add(tensor_name("layer.%zu.pred.w_up.indptr", l),
                 Tensor::from_indices(pred.w_up.row_ptr()));
        file.add(tensor_name("layer.%zu.pred.w_up.cols", l),
                 Tensor::from_indices(pred.w_up.col_idx()));
        file.add(tensor_name("layer.%zu.pred.w_up.vals", l),
                 Tensor::from_vector(pred.w_up.values()));
        file.add(tensor_name("layer.%zu.pred.tau", l),
                 Tensor::from_vector({pred.tau}));
        file.add(tensor_name("layer.%zu.pred.budget", l),
                 Tensor::from_indices({pred.budget}));
        if (!layer.lin_e.empty()) {
            file.add(tensor_name("layer.%zu.lin_e", l),
                     Tensor::from_matrix(layer.lin_e));
            file.add(tensor_name("layer.%zu.lin_f", l),
                     Tensor::from_matrix(layer.lin_f));
        }
    }
    file.add("final_norm.scale", Tensor::from_vector(model.final_norm_scale));
    file.add("final_norm.shift", Tensor::from_vector(model.final_norm_shift));
    file.add("head", Tensor::from_matrix(model.head));

    if (teacher) {
        for (std::size_t l = 0; l < teacher->attn.size(); ++l)
            for (std::size_t h = 0; h < teacher->attn[l].size(); ++h)
                file.add(tensor_name("teacher.attn.%zu.%zu", l, h),
                         Tensor::from_matrix(teacher->attn[l][h]));
    }
    save_tensor_file(file, path);
}

VitModel load_model(const std::string& path, TeacherAttn* teacher) {
    const TensorFile file = load_tensor_file(path);

    const Tensor& dims = need(file, "config.dims");
    if (dims.dtype != Tensor::Dtype::kI64 || dims.shape != std::vector<std::size_t>{6})
        throw WeightsError(WeightsErrorCode::kShapeMismatch,
                           "tensor 'config.dims' is not i64 [6]");
    VitModel m;
    m.cfg.image_size = static_cast<std::size_t>(dims.i64[0]);
    m.cfg.patch_size = static_cast<std::size_t>(dims.i64[1]);
    m.cfg.d_model = static_cast<std::size_t>(dims.i64[2]);
    m.cfg.n_heads = static_cast<std::size_t>(dims.i64[3]);
    m.cfg.n_layers = static_cast<std::size_t>(dims.i64[4]);
    m.cfg.n_classes = static_cast<std::size_t>(dims.i64[5]);
    m.cfg.mlp_ratio = need_vector(file, "config.mlp_ratio", 1)[0];
    try {
        m.cfg.validate();
    } catch (const InvalidArgument& e) {
        throw WeightsError(WeightsErrorCode::kShapeMismatch,
                           std::string("invalid config: ") + e.what());
    }

    const std::size_t n = m.cfg.n_tokens();
    const std::size_t d = m.cfg.d_model;
    m.patch_proj = need_matrix(file, "patch_proj", m.cfg.patch_dim(), d);
    m.cls_token = need_matrix(file, "cls_token", 1, d);
    m.pos_embed = need_matrix(file, "pos_embed", n, d);

    for (std::size_t l = 0; l < m.cfg.n_layers; ++l) {
        LayerParams layer;
        for (std::size_t h = 0; h < m.cfg.n_heads; ++h) {
            AttentionHeadParams head;
            head.d_head = m.cfg.d_head();
            head.w_q = need_matrix(file, tensor_name("layer.%zu.head.%zu.w_q", l, h),
                                   d, head.d_head);
            head.w_k = need_matrix(file, tensor_name("layer.%zu.head.%zu.w_k", l, h),
                                   d, head.d_head);
            head.w_v = need_matrix(file, tensor_name("layer.%zu.head.%zu.w_v", l, h),
                                   d, head.d_head);
            layer.heads.push_back(std::move(head));
        }
        layer.w_o = need_matrix(file, tensor_name("layer.%zu.w_o", l), d, d);
        layer.mlp_in =
            need_matrix(file, tensor_name("layer.%zu.mlp_in", l), d, m.cfg.d_mlp());
        layer.mlp_out =
            need_matrix(file, tensor_name("layer.%zu.mlp_out", l), m.cfg.d_mlp(), d);
        layer.norm1_scale =
            need_vector(file, tensor_name("layer.%zu.norm1.scale", l), d);
        layer.norm1_shift =
            need_vector(file, tensor_name("layer.%zu.norm1.shift", l), d);
        layer.norm2_scale =
            need_vector(file, tensor_name("layer.%zu.norm2.scale", l), d);
        layer.norm2_shift =
            need_vector(file, tensor_name("layer.%zu.norm2.shift", l), d);

        PredictorParams pred;
        const Tensor& w_down = need(file, tensor_name("layer.%zu.pred.w_down", l));
        if (w_down.dtype != Tensor::Dtype::kF64 || w_down.shape.size() != 2 ||
            w_down.shape[1] != n)
            throw WeightsError(WeightsErrorCode::kShapeMismatch,
                               tensor_name("tensor 'layer.%zu.pred.w_down' is not "
                                           "f64 [n_down, n_tokens]",
                                           l));
        pred.n_down = w_down.shape[0];
        pred.w_down = w_down.to_matrix();
        const auto indptr = need_indices(
            file, tensor_name("layer.%zu.pred.w_up.indptr", l), pred.n_down + 1);
        const std::size_t nnz = indptr.empty() ? 0 : indptr.back();
        const auto cols =
            need_indices(file, tensor_name("layer.%zu.pred.w_up.cols", l), nnz);
        const auto vals =
            need_vector(file, tensor_name("layer.%zu.pred.w_up.vals", l), nnz);
        try {
            pred.w_up = CsrMatrix(pred.n_down, n, indptr, cols, vals);
        } catch (const InvalidArgument& e) {
            throw WeightsError(WeightsErrorCode::kShapeMismatch,
                               tensor_name("tensor 'layer.%zu.pred.w_up.*' malformed: ",
                                           l) +
                                   e.what());
        }
        pred.tau = need_vector(file, tensor_name("layer.%zu.pred.tau", l), 1)[0];
        pred.budget =
            need_indices(file, tensor_name("layer.%zu.pred.budget", l), 1)[0];
        layer.predictor = std::move(pred);

        if (file.find(tensor_name("layer.%zu.lin_e", l))) {
            const Tensor& lin_e = need(file, tensor_name("layer.%zu.lin_e", l));
            if (lin_e.dtype != Tensor::Dtype::kF64 || lin_e.shape.size() != 2 ||
                lin_e.shape[1] != n)
                throw WeightsError(WeightsErrorCode::kShapeMismatch,
                                   tensor_name("tensor 'layer.%zu.lin_e' is not f64 "
                                               "[n_down_lin, n_tokens]",
                                               l));
            layer.lin_e = lin_e.to_matrix();
            layer.lin_f = need_matrix(file, tensor_name("layer.%zu.lin_f", l),
                                      lin_e.shape[0], n);
        }
        m.layers.push_back(std::move(layer));
    }
    m.final_norm_scale = need_vector(file, "final_norm.scale", d);
    m.final_norm_shift = need_vector(file, "final_norm.shift", d);
    m.head = need_matrix(file, "head", d, m.cfg.n_classes);

    try {
        m.validate();
    } catch (const InvalidArgument& e) {
        throw WeightsError(WeightsErrorCode::kShapeMismatch,
                           std::string("inconsistent model tensors: ") + e.what());
    }

    if (teacher) {
        teacher->attn.assign(m.cfg.n_layers,
                             std::vector<DenseMatrix>(m.cfg.n_heads));
        for (std::size_t l = 0; l < m.cfg.n_layers; ++l)
            for (std::size_t h = 0; h < m.cfg.n_heads; ++h) {
                const std::string name = tensor_name("teacher.attn.%zu.%zu", l, h);
                if (file.find(name))
                    teacher->attn[l][h] = need_matrix(file, name, n, n);
            }
    }
    return m;
}

} // namespace sparsevit
