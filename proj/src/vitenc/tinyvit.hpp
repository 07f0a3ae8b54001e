#pragma once

// Inference-only ViT forward pass, templated on the compute scalar. The
// engine is deterministic by construction: layer norm and softmax reduce
// sequentially in index order, and the patch-embedding dot products are
// accumulated in a value-sorted order that depends only on the multiset of
// terms. That last property makes the embedded sequence of an encrypted
// image under adapted weights a bit-exact row permutation of the plain
// sequence, which verify_equivalence checks alongside the logit comparison.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <optional>
#include <vector>

#include "vitenc/blockcodec.hpp"
#include "vitenc/embedadapt.hpp"
#include "vitenc/errors.hpp"
#include "vitenc/image.hpp"
#include "vitenc/keyperm.hpp"
#include "vitenc/modelstore.hpp"

namespace vitenc {

inline constexpr double kLayerNormEps = 1e-6;
inline constexpr double kVerifyTolF32 = 1e-4;
inline constexpr double kVerifyTolF64 = 1e-10;

inline double verify_tolerance(DType precision) {
    return precision == DType::f32 ? kVerifyTolF32 : kVerifyTolF64;
}

template <class Scalar>
struct EncoderBlockWeights {
    Eigen::RowVectorX<Scalar> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
    RowMatrix<Scalar> wq, wk, wv, wo;
    Eigen::RowVectorX<Scalar> bq, bk, bv, bo;
    RowMatrix<Scalar> w1, w2;
    Eigen::RowVectorX<Scalar> b1, b2;
};

template <class Scalar>
struct ViTWeights {
    ViTConfig config;
    Eigen::RowVectorX<Scalar> cls_token;
    RowMatrix<Scalar> pos_embed;    // (N+1) x D
    RowMatrix<Scalar> patch_embed;  // L x D
    std::vector<EncoderBlockWeights<Scalar>> blocks;
    Eigen::RowVectorX<Scalar> final_gamma, final_beta;
    RowMatrix<Scalar> head_w;  // D x classes
    Eigen::RowVectorX<Scalar> head_b;
};

// Decodes every required tensor to the compute scalar (element-wise cast
// when the stored precision differs).
template <class Scalar>
ViTWeights<Scalar> load_weights(const ModelArchive& model) {
    validate(model);
    const ViTConfig& cfg = model.config;
    const Eigen::Index d = cfg.dim;
    ViTWeights<Scalar> w;
    w.config = cfg;
    w.cls_token = tensor_as_vector<Scalar>(model.at("cls_token"), d);
    w.pos_embed = tensor_as_matrix<Scalar>(model.at("pos_embed"), cfg.seq_len(), d);
    w.patch_embed = tensor_as_matrix<Scalar>(model.at("patch_embed"), cfg.patch_len(), d);
    for (Eigen::Index i = 0; i < cfg.depth; ++i) {
        std::string p = "blk" + std::to_string(i) + ".";
        EncoderBlockWeights<Scalar> blk;
        blk.ln1_gamma = tensor_as_vector<Scalar>(model.at(p + "ln1.gamma"), d);
        blk.ln1_beta = tensor_as_vector<Scalar>(model.at(p + "ln1.beta"), d);
        blk.wq = tensor_as_matrix<Scalar>(model.at(p + "attn.wq"), d, d);
        blk.bq = tensor_as_vector<Scalar>(model.at(p + "attn.bq"), d);
        blk.wk = tensor_as_matrix<Scalar>(model.at(p + "attn.wk"), d, d);
        blk.bk = tensor_as_vector<Scalar>(model.at(p + "attn.bk"), d);
        blk.wv = tensor_as_matrix<Scalar>(model.at(p + "attn.wv"), d, d);
        blk.bv = tensor_as_vector<Scalar>(model.at(p + "attn.bv"), d);
        blk.wo = tensor_as_matrix<Scalar>(model.at(p + "attn.wo"), d, d);
        blk.bo = tensor_as_vector<Scalar>(model.at(p + "attn.bo"), d);
        blk.ln2_gamma = tensor_as_vector<Scalar>(model.at(p + "ln2.gamma"), d);
        blk.ln2_beta = tensor_as_vector<Scalar>(model.at(p + "ln2.beta"), d);
        blk.w1 = tensor_as_matrix<Scalar>(model.at(p + "mlp.w1"), d, cfg.hidden_dim());
        blk.b1 = tensor_as_vector<Scalar>(model.at(p + "mlp.b1"), cfg.hidden_dim());
        blk.w2 = tensor_as_matrix<Scalar>(model.at(p + "mlp.w2"), cfg.hidden_dim(), d);
        blk.b2 = tensor_as_vector<Scalar>(model.at(p + "mlp.b2"), d);
        w.blocks.push_back(std::move(blk));
    }
    w.final_gamma = tensor_as_vector<Scalar>(model.at("final_ln.gamma"), d);
    w.final_beta = tensor_as_vector<Scalar>(model.at("final_ln.beta"), d);
    w.head_w = tensor_as_matrix<Scalar>(model.at("head.w"), d, cfg.num_classes);
    w.head_b = tensor_as_vector<Scalar>(model.at("head.b"), cfg.num_classes);
    return w;
}

namespace detail {

template <class Scalar> struct FloatBits;
template <> struct FloatBits<float> { using U = std::uint32_t; };
template <> struct FloatBits<double> { using U = std::uint64_t; };

// Monotone integer key for the IEEE total order (negatives reversed by
// complement, positives offset past them; -0.0 sorts before +0.0).
template <class Scalar>
typename FloatBits<Scalar>::U total_order_key(Scalar v) {
    using U = typename FloatBits<Scalar>::U;
    U bits;
    std::memcpy(&bits, &v, sizeof v);
    constexpr U sign = U{1} << (8 * sizeof(U) - 1);
    return (bits & sign) ? ~bits : (bits | sign);
}

}  // namespace detail

// Sorts the terms into IEEE total order and accumulates left to right. Two
// calls whose term multisets are bit-for-bit equal return bit-identical
// sums, whatever order the terms arrived in.
template <class Scalar>
Scalar exchange_invariant_sum(std::vector<Scalar>& terms) {
    std::sort(terms.begin(), terms.end(), [](Scalar a, Scalar b) {
        return detail::total_order_key(a) < detail::total_order_key(b);
    });
    Scalar acc = 0;
    for (Scalar t : terms) {
        acc += t;
    }
    return acc;
}

// Raw 8-bit samples scaled to [0,1] by 1/255.
template <class Scalar>
RowMatrix<Scalar> normalized_samples(const BlockGrid& grid) {
    return grid.blocks.cast<Scalar>() / Scalar(255);
}

// z0: row 0 = class token, row i+1 = block i embedded through patch_embed,
// plus the position embedding. The per-token dot products use
// exchange_invariant_sum, see the file comment.
template <class Scalar>
RowMatrix<Scalar> embed_sequence(const ViTWeights<Scalar>& w, const BlockGrid& grid) {
    const Eigen::Index blocks = grid.block_count();
    const Eigen::Index block_len = grid.block_len();
    const Eigen::Index d = w.patch_embed.cols();
    if (block_len != w.patch_embed.rows()) {
        throw std::invalid_argument("embed_sequence: blocks hold " +
                                    std::to_string(block_len) +
                                    " samples, patch embedding has " +
                                    std::to_string(w.patch_embed.rows()) + " rows");
    }
    if (w.pos_embed.rows() != blocks + 1) {
        throw std::invalid_argument("embed_sequence: " + std::to_string(blocks) +
                                    " blocks, position embedding has " +
                                    std::to_string(w.pos_embed.rows()) + " rows");
    }
    RowMatrix<Scalar> xn = normalized_samples<Scalar>(grid);
    RowMatrix<Scalar> z(blocks + 1, d);
    z.row(0) = w.cls_token;
    std::vector<Scalar> terms(static_cast<std::size_t>(block_len));
    for (Eigen::Index i = 0; i < blocks; ++i) {
        for (Eigen::Index col = 0; col < d; ++col) {
            for (Eigen::Index j = 0; j < block_len; ++j) {
                terms[static_cast<std::size_t>(j)] = xn(i, j) * w.patch_embed(j, col);
            }
            z(i + 1, col) = exchange_invariant_sum(terms);
        }
    }
    z += w.pos_embed;
    return z;
}

// Per-row normalization with population variance, sequential sums, then the
// affine gamma/beta.
template <class Scalar>
RowMatrix<Scalar> layer_norm_rows(const RowMatrix<Scalar>& x,
                                  const Eigen::RowVectorX<Scalar>& gamma,
                                  const Eigen::RowVectorX<Scalar>& beta) {
    const Eigen::Index cols = x.cols();
    RowMatrix<Scalar> out(x.rows(), cols);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Scalar mean = 0;
        for (Eigen::Index c = 0; c < cols; ++c) {
            mean += x(r, c);
        }
        mean /= Scalar(cols);
        Scalar var = 0;
        for (Eigen::Index c = 0; c < cols; ++c) {
            Scalar dev = x(r, c) - mean;
            var += dev * dev;
        }
        var /= Scalar(cols);
        Scalar denom = std::sqrt(var + Scalar(kLayerNormEps));
        for (Eigen::Index c = 0; c < cols; ++c) {
            out(r, c) = (x(r, c) - mean) / denom * gamma(c) + beta(c);
        }
    }
    return out;
}

// Max-subtracted exponentials, sequential row sums.
template <class Scalar>
void softmax_rows_inplace(RowMatrix<Scalar>& x) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Scalar m = x(r, 0);
        for (Eigen::Index c = 1; c < x.cols(); ++c) {
            m = std::max(m, x(r, c));
        }
        Scalar sum = 0;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            Scalar e = std::exp(x(r, c) - m);
            x(r, c) = e;
            sum += e;
        }
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            x(r, c) /= sum;
        }
    }
}

// tanh-approximated GELU.
template <class Scalar>
Scalar gelu_tanh(Scalar x) {
    constexpr Scalar k = Scalar(0.044715);
    const Scalar c = std::sqrt(Scalar(2) / Scalar(std::numbers::pi));
    return Scalar(0.5) * x * (Scalar(1) + std::tanh(c * (x + k * x * x * x)));
}

// Pre-norm residual blocks, then a final layer norm:
//   z <- z + MHSA(LN(z)); z <- z + MLP(LN(z))
// MHSA splits columns into heads, scales scores by 1/sqrt(head_dim), and
// applies a row softmax. No dropout anywhere.
template <class Scalar>
RowMatrix<Scalar> encoder_forward(const ViTWeights<Scalar>& w, RowMatrix<Scalar> z) {
    const ViTConfig& cfg = w.config;
    if (z.cols() != cfg.dim) {
        throw std::invalid_argument("encoder_forward: sequence width " +
                                    std::to_string(z.cols()) + ", model dim " +
                                    std::to_string(cfg.dim));
    }
    const Eigen::Index head_dim = cfg.head_dim();
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(head_dim));
    for (const EncoderBlockWeights<Scalar>& blk : w.blocks) {
        RowMatrix<Scalar> h = layer_norm_rows(z, blk.ln1_gamma, blk.ln1_beta);
        RowMatrix<Scalar> q = (h * blk.wq).rowwise() + blk.bq;
        RowMatrix<Scalar> k = (h * blk.wk).rowwise() + blk.bk;
        RowMatrix<Scalar> v = (h * blk.wv).rowwise() + blk.bv;
        RowMatrix<Scalar> concat(z.rows(), cfg.dim);
        for (Eigen::Index hd = 0; hd < cfg.heads; ++hd) {
            auto qh = q.middleCols(hd * head_dim, head_dim);
            auto kh = k.middleCols(hd * head_dim, head_dim);
            auto vh = v.middleCols(hd * head_dim, head_dim);
            RowMatrix<Scalar> scores = (qh * kh.transpose()) * scale;
            softmax_rows_inplace(scores);
            concat.middleCols(hd * head_dim, head_dim) = scores * vh;
        }
        z += (concat * blk.wo).rowwise() + blk.bo;

        RowMatrix<Scalar> h2 = layer_norm_rows(z, blk.ln2_gamma, blk.ln2_beta);
        RowMatrix<Scalar> hidden = (h2 * blk.w1).rowwise() + blk.b1;
        for (Eigen::Index r = 0; r < hidden.rows(); ++r) {
            for (Eigen::Index c = 0; c < hidden.cols(); ++c) {
                hidden(r, c) = gelu_tanh(hidden(r, c));
            }
        }
        z += (hidden * blk.w2).rowwise() + blk.b2;
    }
    return layer_norm_rows(z, w.final_gamma, w.final_beta);
}

// Head applied to the class-token row of an encoder output.
template <class Scalar>
Eigen::RowVectorX<Scalar> classify_sequence(const ViTWeights<Scalar>& w,
                                            const RowMatrix<Scalar>& encoded) {
    return (encoded.row(0) * w.head_w) + w.head_b;
}

// Splits the image with the model's patch size after checking geometry.
BlockGrid image_blocks(const ImageTensor& img, const ViTConfig& cfg);

template <class Scalar>
Eigen::RowVectorX<Scalar> classify_image(const ImageTensor& img, const ModelArchive& model) {
    ViTWeights<Scalar> w = load_weights<Scalar>(model);
    BlockGrid grid = image_blocks(img, model.config);
    return classify_sequence(w, encoder_forward(w, embed_sequence(w, grid)));
}

// ----- archive-level wrappers (compute in config precision, report double) --

using RowMatrixd = RowMatrix<double>;

RowMatrixd embed(const ImageTensor& img, const ModelArchive& model);
RowMatrixd encoder_forward(const RowMatrixd& z, const ModelArchive& model);
Eigen::RowVectorXd classify(const ImageTensor& img, const ModelArchive& model);

// ----- difference reporting -------------------------------------------------

struct DiffStats {
    double max_abs_diff = 0.0;
    // max_abs_diff normalized by the larger of the two max-magnitude
    // entries; zero when both sides are identically zero.
    double max_rel_diff = 0.0;
};

template <class DerivedA, class DerivedB>
DiffStats diff_stats(const Eigen::MatrixBase<DerivedA>& a,
                     const Eigen::MatrixBase<DerivedB>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("diff_stats: shape mismatch");
    }
    double max_abs = 0.0, scale = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            double av = static_cast<double>(a(r, c));
            double bv = static_cast<double>(b(r, c));
            max_abs = std::max(max_abs, std::abs(av - bv));
            scale = std::max({scale, std::abs(av), std::abs(bv)});
        }
    }
    DiffStats stats;
    stats.max_abs_diff = max_abs;
    stats.max_rel_diff = scale > 0.0 ? max_abs / scale
                                     : (max_abs > 0.0 ? std::numeric_limits<double>::infinity()
                                                      : 0.0);
    return stats;
}

// ----- end-to-end verification ----------------------------------------------

struct VerifyOptions {
    // Compute precision; defaults to the archive's stored precision.
    std::optional<DType> precision;
    // Keys used for the model adaptation when they should differ from the
    // encryption keys (negative-control runs). Defaults to the encryption
    // keys, the matched case.
    std::optional<KeyPair> adapt_keys;
};

struct EquivalenceReport {
    double max_abs_diff = 0.0;
    double max_rel_diff = 0.0;
    bool sequence_exact = false;  // embedded sequences match as a bit-exact row permutation
    bool pass = false;            // max_rel_diff <= tolerance and sequence_exact
    double tolerance = 0.0;
    DType precision = DType::f32;
};

// Classifies the plain image with the plain model and the encrypted image
// with the adapted model, reports logit differences plus the bit-exact
// sequence-permutation check.
EquivalenceReport verify_equivalence(const ImageTensor& img, const ModelArchive& model,
                                     const PermKey& k1, const PermKey& k2,
                                     const VerifyOptions& opts = {});

}  // namespace vitenc
