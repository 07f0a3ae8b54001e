#pragma once

// Weight-space adaptation: reorder the position-embedding rows by the
// class-token-extended block permutation and the patch-embedding rows by the
// pixel permutation, so a model trained on plain images accepts images
// encrypted with the matching keys. Everything is row reindexing (gather);
// no floating-point arithmetic touches the weights, so adapted tensors are
// bit-exact rearrangements and inverse permutations restore them exactly.

#include <Eigen/Dense>

#include "vitenc/keyperm.hpp"
#include "vitenc/modelstore.hpp"

namespace vitenc {

// Position embedding (N+1) x D against a block permutation of size N: row 0
// (class token position) stays put, row i picks up input row bs.map[i-1]+1.
template <class Derived>
typename Derived::PlainObject adapt_position(const Eigen::MatrixBase<Derived>& e_pos,
                                             const PermMatrix& bs) {
    if (e_pos.rows() != bs.size() + 1) {
        throw std::invalid_argument("adapt_position: pos embedding has " +
                                    std::to_string(e_pos.rows()) +
                                    " rows, block permutation needs " +
                                    std::to_string(bs.size() + 1));
    }
    return permute_rows(e_pos, extend_for_class_token(to_permutation(bs)));
}

// Patch embedding L x D against the pixel permutation of size L: output row
// j = input row ps.map[j]. A patch shuffled by ps then embedded with the
// result sees the same multiset of products as the plain patch with the
// plain embedding.
template <class Derived>
typename Derived::PlainObject adapt_patch(const Eigen::MatrixBase<Derived>& e,
                                          const PermMatrix& ps) {
    if (e.rows() != ps.size()) {
        throw std::invalid_argument("adapt_patch: patch embedding has " +
                                    std::to_string(e.rows()) +
                                    " rows, pixel permutation needs " +
                                    std::to_string(ps.size()));
    }
    return permute_rows(e, to_permutation(ps));
}

// Archive-level adaptation: pos_embed and patch_embed payloads are replaced
// by row-gathered copies, every other tensor is byte-identical. Permutation
// sizes must match the archive geometry (N blocks, L = p*p*c samples).
ModelArchive adapt_model(const ModelArchive& model, const Permutation& block_perm,
                         const Permutation& pixel_perm);
ModelArchive adapt_model(const ModelArchive& model, const PermKey& k1, const PermKey& k2);

}  // namespace vitenc
