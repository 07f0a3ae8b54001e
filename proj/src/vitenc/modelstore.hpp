#pragma once

// Named-tensor model archives with a byte-stable on-disk format:
//   [8-byte little-endian manifest length][UTF-8 JSON manifest]
//   [zero padding to the next 64-byte boundary][concatenated raw payloads]
// The manifest holds the config and a tensor table (name, dtype, shape,
// offset, nbytes); offsets are relative to the padded payload base and
// 0-based. Payloads are little-endian row-major scalars.

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "vitenc/errors.hpp"
#include "vitenc/keyperm.hpp"

namespace vitenc {

enum class DType { f32, f64 };

std::size_t dtype_size(DType dtype);
std::string dtype_name(DType dtype);
DType dtype_from_name(const std::string& name);

struct ViTConfig {
    Eigen::Index patch_size = 0;
    Eigen::Index height = 0;
    Eigen::Index width = 0;
    Eigen::Index channels = 0;
    Eigen::Index dim = 0;
    Eigen::Index depth = 0;
    Eigen::Index heads = 0;
    double mlp_ratio = 4.0;
    Eigen::Index num_classes = 0;
    DType precision = DType::f32;

    Eigen::Index num_patches() const {
        return (height / patch_size) * (width / patch_size);
    }
    Eigen::Index patch_len() const { return patch_size * patch_size * channels; }
    Eigen::Index seq_len() const { return num_patches() + 1; }
    Eigen::Index head_dim() const { return dim / heads; }
    Eigen::Index hidden_dim() const {
        return static_cast<Eigen::Index>(std::llround(mlp_ratio * static_cast<double>(dim)));
    }

    bool operator==(const ViTConfig&) const = default;
};

void validate(const ViTConfig& cfg);

struct TensorSpec {
    std::string name;
    DType dtype = DType::f32;
    std::vector<Eigen::Index> shape;

    Eigen::Index count() const;
    std::size_t nbytes() const { return static_cast<std::size_t>(count()) * dtype_size(dtype); }
};

struct TensorData {
    TensorSpec spec;
    std::vector<std::uint8_t> bytes;
};

struct ModelArchive {
    ViTConfig config;
    std::vector<TensorData> tensors;  // order preserved through save/load

    const TensorData* find(std::string_view name) const;
    TensorData* find(std::string_view name);
    const TensorData& at(std::string_view name) const;  // throws ArchiveError
};

// The full set of tensors a model must carry, in canonical order:
// cls_token, pos_embed, patch_embed, per block (ln1, attention, ln2, mlp),
// final_ln, head. Shapes follow the config; dtype is config.precision.
std::vector<TensorSpec> required_tensors(const ViTConfig& cfg);

// Checks required tensors are present with the expected shape, dtype, and
// payload size. Extra tensors are allowed and left alone.
void validate(const ModelArchive& archive);

std::vector<std::uint8_t> save_model(const ModelArchive& archive);
void save_model(const std::string& path, const ModelArchive& archive);
ModelArchive load_model(const std::vector<std::uint8_t>& bytes);
ModelArchive load_model(const std::string& path);

// Deterministic initialization: one ChaCha20 word stream keyed by
// SHA-256(little-endian 64-bit seed) feeds Box-Muller normals; weight
// tensors get 0.02 * normal (computed in double, then cast to the config
// precision) in canonical tensor order, biases and LN beta are zero, LN
// gamma is one. Constant tensors draw nothing from the stream.
ModelArchive init_random(const ViTConfig& cfg, std::uint64_t seed);

// Standalone config JSON (same schema as the manifest's config object).
ViTConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ViTConfig& cfg);

namespace detail {

template <class Scalar, class Stored>
std::vector<Scalar> cast_payload(const TensorData& t) {
    const std::size_t n = t.bytes.size() / sizeof(Stored);
    std::vector<Stored> raw(n);
    std::memcpy(raw.data(), t.bytes.data(), t.bytes.size());
    std::vector<Scalar> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<Scalar>(raw[i]);
    }
    return out;
}

}  // namespace detail

// Payload decoded to the requested scalar type (casting across precisions
// element-wise when they differ).
template <class Scalar>
std::vector<Scalar> tensor_values(const TensorData& t) {
    if (t.bytes.size() != t.spec.nbytes()) {
        throw ArchiveError("tensor " + t.spec.name + ": payload has " +
                           std::to_string(t.bytes.size()) + " bytes, expected " +
                           std::to_string(t.spec.nbytes()));
    }
    return t.spec.dtype == DType::f32 ? detail::cast_payload<Scalar, float>(t)
                                      : detail::cast_payload<Scalar, double>(t);
}

template <class Scalar>
RowMatrix<Scalar> tensor_as_matrix(const TensorData& t, Eigen::Index rows,
                                   Eigen::Index cols) {
    std::vector<Scalar> values = tensor_values<Scalar>(t);
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
        throw ArchiveError("tensor " + t.spec.name + ": has " +
                           std::to_string(values.size()) + " elements, expected " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
    return Eigen::Map<const RowMatrix<Scalar>>(values.data(), rows, cols);
}

template <class Scalar>
Eigen::RowVectorX<Scalar> tensor_as_vector(const TensorData& t, Eigen::Index len) {
    std::vector<Scalar> values = tensor_values<Scalar>(t);
    if (static_cast<Eigen::Index>(values.size()) != len) {
        throw ArchiveError("tensor " + t.spec.name + ": has " +
                           std::to_string(values.size()) + " elements, expected " +
                           std::to_string(len));
    }
    return Eigen::Map<const Eigen::RowVectorX<Scalar>>(values.data(), len);
}

}  // namespace vitenc
