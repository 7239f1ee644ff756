// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsevit/dense_matrix.hpp"
#include "sparsevit/vit.hpp"

namespace sparsevit {

/// Why a weight file failed to load or save. Each failure mode gets its
/// own code so callers can react (and tests can assert) precisely.
enum class WeightsErrorCode {
    kIo,            // unreadable/unwritable file
    kBadMagic,      // leading bytes are not the format magic
    kBadVersion,    // unsupported format version
    kBadManifest,   // manifest does not parse
    kTruncated,     // payload shorter than the manifest promises
    kShapeMismatch, // tensor present but with an unexpected shape
    kMissingTensor, // manifest lacks a tensor the model needs
};

class WeightsError : public std::runtime_error {
public:
    WeightsError(WeightsErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}
    WeightsErrorCode code() const { return code_; }

private:
    WeightsErrorCode code_;
};

/// One named tensor: 64-bit reals or 64-bit signed integers.
struct Tensor {
    enum class Dtype { kF64, kI64 };

    Dtype dtype = Dtype::kF64;
    std::vector<std::size_t> shape;
    std::vector<double> f64;
    std::vector<std::int64_t> i64;

    std::size_t numel() const;

    static Tensor from_matrix(const DenseMatrix& m);
    static Tensor from_vector(const std::vector<double>& v);
    static Tensor from_indices(const std::vector<std::size_t>& v);

    DenseMatrix to_matrix() const;
    std::vector<double> to_vector() const;
    std::vector<std::size_t> to_indices() const;
};

/// Ordered collection of named tensors — the weight-file contents.
///
/// On-disk layout: 4-byte magic "SVWF", u32 version (little-endian), u64
/// manifest byte length, the manifest text, then raw little-endian payload
/// words in manifest order. Manifest lines read
///   tensor <name> <f64|i64> <dim0> <dim1> ...
struct TensorFile {
    std::vector<std::pair<std::string, Tensor>> tensors;

    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
    void add(const std::string& name, Tensor t);
};

void save_tensor_file(const TensorFile& file, const std::string& path);
TensorFile load_tensor_file(const std::string& path);

/// Teacher attention maps indexed [layer][head], optionally carried inside
/// the weight file under names "teacher.attn.<layer>.<head>".
struct TeacherAttn {
    std::vector<std::vector<DenseMatrix>> attn;
};

void save_model(const VitModel& model, const std::string& path,
                const TeacherAttn* teacher = nullptr);
VitModel load_model(const std::string& path, TeacherAttn* teacher = nullptr);

} // namespace sparsevit
