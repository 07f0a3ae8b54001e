#include "vitenc/tinyvit.hpp"

namespace vitenc {

BlockGrid image_blocks(const ImageTensor& img, const ViTConfig& cfg) {
    if (img.height != cfg.height || img.width != cfg.width ||
        img.channels != cfg.channels) {
        throw InvalidGeometry("image is " + std::to_string(img.height) + "x" +
                              std::to_string(img.width) + "x" +
                              std::to_string(img.channels) + ", model expects " +
                              std::to_string(cfg.height) + "x" + std::to_string(cfg.width) +
                              "x" + std::to_string(cfg.channels));
    }
    return split_blocks(img, cfg.patch_size);
}

namespace {

template <class Scalar>
RowMatrixd embed_impl(const ImageTensor& img, const ModelArchive& model) {
    ViTWeights<Scalar> w = load_weights<Scalar>(model);
    return embed_sequence(w, image_blocks(img, model.config)).template cast<double>();
}

template <class Scalar>
RowMatrixd encoder_impl(const RowMatrixd& z, const ModelArchive& model) {
    ViTWeights<Scalar> w = load_weights<Scalar>(model);
    return encoder_forward(w, RowMatrix<Scalar>(z.cast<Scalar>())).template cast<double>();
}

template <class Scalar>
EquivalenceReport verify_impl(const ImageTensor& img, const ModelArchive& model,
                              const PermKey& k1, const PermKey& k2,
                              const KeyPair& adapt_keys, DType precision) {
    const ViTConfig& cfg = model.config;
    BlockGrid plain_grid = image_blocks(img, cfg);
    ImageTensor encrypted = encrypt_image(img, k1, k2, cfg.patch_size);
    ModelArchive adapted = adapt_model(model, adapt_keys.block_key, adapt_keys.pixel_key);

    ViTWeights<Scalar> plain_w = load_weights<Scalar>(model);
    ViTWeights<Scalar> adapted_w = load_weights<Scalar>(adapted);
    RowMatrix<Scalar> z0_plain = embed_sequence(plain_w, plain_grid);
    RowMatrix<Scalar> z0_enc = embed_sequence(adapted_w, image_blocks(encrypted, cfg));

    // The encrypted-domain sequence should be the plain sequence with its
    // token rows rearranged by the extended block permutation, bit for bit.
    Permutation ext =
        extend_for_class_token(derive_permutation(k1, cfg.num_patches()));
    RowMatrix<Scalar> expected = permute_rows(z0_plain, ext);
    bool sequence_exact =
        std::memcmp(expected.data(), z0_enc.data(),
                    sizeof(Scalar) * static_cast<std::size_t>(expected.size())) == 0;

    Eigen::RowVectorX<Scalar> logits_plain =
        classify_sequence(plain_w, encoder_forward(plain_w, z0_plain));
    Eigen::RowVectorX<Scalar> logits_enc =
        classify_sequence(adapted_w, encoder_forward(adapted_w, z0_enc));
    DiffStats stats = diff_stats(logits_plain, logits_enc);

    EquivalenceReport report;
    report.max_abs_diff = stats.max_abs_diff;
    report.max_rel_diff = stats.max_rel_diff;
    report.sequence_exact = sequence_exact;
    report.tolerance = verify_tolerance(precision);
    report.precision = precision;
    report.pass = sequence_exact && stats.max_rel_diff <= report.tolerance;
    return report;
}

}  // namespace

RowMatrixd embed(const ImageTensor& img, const ModelArchive& model) {
    return model.config.precision == DType::f32 ? embed_impl<float>(img, model)
                                                : embed_impl<double>(img, model);
}

RowMatrixd encoder_forward(const RowMatrixd& z, const ModelArchive& model) {
    return model.config.precision == DType::f32 ? encoder_impl<float>(z, model)
                                                : encoder_impl<double>(z, model);
}

Eigen::RowVectorXd classify(const ImageTensor& img, const ModelArchive& model) {
    if (model.config.precision == DType::f32) {
        return classify_image<float>(img, model).cast<double>();
    }
    return classify_image<double>(img, model);
}

EquivalenceReport verify_equivalence(const ImageTensor& img, const ModelArchive& model,
                                     const PermKey& k1, const PermKey& k2,
                                     const VerifyOptions& opts) {
    DType precision = opts.precision.value_or(model.config.precision);
    KeyPair adapt_keys = opts.adapt_keys.value_or(KeyPair{k1, k2});
    return precision == DType::f32
               ? verify_impl<float>(img, model, k1, k2, adapt_keys, precision)
               : verify_impl<double>(img, model, k1, k2, adapt_keys, precision);
}

}  // namespace vitenc
