#pragma once

// Key-derived permutations and their 0/1 matrix form. A Permutation stores a
// destination -> source index map: applying it to a sequence B yields Bhat
// with Bhat[i] = B[map[i]]. Indices are 0-based everywhere in code and in
// file formats.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace vitenc {

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class KeyRole { block, pixel };

// Secret key for deriving one permutation. The role tag is documentation
// only; derivation depends on the bytes alone.
struct PermKey {
    std::vector<std::uint8_t> bytes;
    KeyRole role = KeyRole::block;
};

struct Permutation {
    std::vector<Eigen::Index> map;  // map[dest] = source

    Eigen::Index size() const { return static_cast<Eigen::Index>(map.size()); }
    static Permutation identity(Eigen::Index n);
};

// Dense 0/1 permutation matrix with exactly one 1 per row and column;
// rows(i, j) = 1 iff j = map[i] for the matching Permutation.
struct PermMatrix {
    RowMatrix<std::uint8_t> rows;

    Eigen::Index size() const { return rows.rows(); }
};

bool is_bijection(const Permutation& p);

// Deterministic, platform-independent derivation: stream key =
// SHA-256(key.bytes); ChaCha20 words feed rejection-sampled uniforms; the
// identity vector is shuffled by Fisher-Yates from index n-1 down to 1.
Permutation derive_permutation(const PermKey& key, Eigen::Index n);

Permutation invert(const Permutation& p);

PermMatrix to_matrix(const Permutation& p);
Permutation to_permutation(const PermMatrix& m);

// Grows an N x N matrix to (N+1) x (N+1): new row 0 and column 0 are unit
// vectors at index 0, the original matrix becomes the lower-right block. Used
// to carry a block permutation over to a token sequence led by a class token.
PermMatrix extend_for_class_token(const PermMatrix& m);
Permutation extend_for_class_token(const Permutation& p);

// out.row(i) = in.row(p.map[i])
template <class Derived>
typename Derived::PlainObject permute_rows(const Eigen::MatrixBase<Derived>& in,
                                           const Permutation& p) {
    if (in.rows() != p.size()) {
        throw std::invalid_argument("permute_rows: matrix has " +
                                    std::to_string(in.rows()) + " rows, permutation size " +
                                    std::to_string(p.size()));
    }
    return in(p.map, Eigen::all);
}

// out.col(j) = in.col(p.map[j])
template <class Derived>
typename Derived::PlainObject permute_cols(const Eigen::MatrixBase<Derived>& in,
                                           const Permutation& p) {
    if (in.cols() != p.size()) {
        throw std::invalid_argument("permute_cols: matrix has " +
                                    std::to_string(in.cols()) + " cols, permutation size " +
                                    std::to_string(p.size()));
    }
    return in(Eigen::all, p.map);
}

std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> from_hex(const std::string& hex);

// keys.json: {"block_key": "<hex>", "pixel_key": "<hex>"}
struct KeyPair {
    PermKey block_key;
    PermKey pixel_key;
};

KeyPair read_key_file(const std::string& path);
void write_key_file(const std::string& path, const KeyPair& keys);

// Expands a master seed into distinct role keys by hashing the seed bytes
// with a role suffix: SHA-256(seed + "/block") and SHA-256(seed + "/pixel").
KeyPair derive_key_pair(const std::vector<std::uint8_t>& seed_bytes);

}  // namespace vitenc
