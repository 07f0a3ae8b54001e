#include "vitenc/embedadapt.hpp"

#include <cstring>

namespace vitenc {

namespace {

// Payload rows rearranged in place of arithmetic: dst row i = src row map[i].
void gather_rows(TensorData& t, const Permutation& perm, Eigen::Index row_len) {
    const std::size_t stride = static_cast<std::size_t>(row_len) * dtype_size(t.spec.dtype);
    std::vector<std::uint8_t> out(t.bytes.size());
    for (Eigen::Index i = 0; i < perm.size(); ++i) {
        std::memcpy(out.data() + static_cast<std::size_t>(i) * stride,
                    t.bytes.data() +
                        static_cast<std::size_t>(perm.map[static_cast<std::size_t>(i)]) * stride,
                    stride);
    }
    t.bytes = std::move(out);
}

}  // namespace

ModelArchive adapt_model(const ModelArchive& model, const Permutation& block_perm,
                         const Permutation& pixel_perm) {
    validate(model);
    const ViTConfig& cfg = model.config;
    if (block_perm.size() != cfg.num_patches()) {
        throw ArchiveError("tensor pos_embed: block permutation size " +
                           std::to_string(block_perm.size()) + ", model has " +
                           std::to_string(cfg.num_patches()) + " blocks");
    }
    if (pixel_perm.size() != cfg.patch_len()) {
        throw ArchiveError("tensor patch_embed: pixel permutation size " +
                           std::to_string(pixel_perm.size()) + ", model blocks hold " +
                           std::to_string(cfg.patch_len()) + " samples");
    }
    if (!is_bijection(block_perm) || !is_bijection(pixel_perm)) {
        throw std::invalid_argument("adapt_model: permutation is not a bijection");
    }
    ModelArchive out = model;
    gather_rows(*out.find("pos_embed"), extend_for_class_token(block_perm), cfg.dim);
    gather_rows(*out.find("patch_embed"), pixel_perm, cfg.dim);
    return out;
}

ModelArchive adapt_model(const ModelArchive& model, const PermKey& k1, const PermKey& k2) {
    validate(model);
    return adapt_model(model, derive_permutation(k1, model.config.num_patches()),
                       derive_permutation(k2, model.config.patch_len()));
}

}  // namespace vitenc
