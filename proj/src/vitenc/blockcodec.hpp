#pragma once

// Block-level image pipeline: divide an image into non-overlapping p x p
// blocks, permute whole blocks with one key and the samples inside every
// block with another, and reassemble. All steps move raw 8-bit samples, so
// encrypt/decrypt roundtrips are bit-exact.

#include <Eigen/Dense>

#include <cstdint>

#include "vitenc/image.hpp"
#include "vitenc/keyperm.hpp"

namespace vitenc {

// N x L matrix of flattened blocks: row i is block i in row-major grid
// order, flattened row-major over (row, column) with channels interleaved,
// L = p*p*c.
struct BlockGrid {
    Eigen::Index patch = 0;
    Eigen::Index grid_rows = 0;
    Eigen::Index grid_cols = 0;
    int channels = 0;
    RowMatrix<std::uint8_t> blocks;

    Eigen::Index block_count() const { return blocks.rows(); }
    Eigen::Index block_len() const { return blocks.cols(); }
};

BlockGrid split_blocks(const ImageTensor& img, Eigen::Index patch);
ImageTensor join_blocks(const BlockGrid& grid, int height, int width, int channels);

// Output block i = input block perm.map[i].
BlockGrid scramble_blocks(const BlockGrid& grid, const Permutation& perm);

// Within every block, output sample j = input sample perm.map[j]; one
// permutation shared by all blocks.
BlockGrid shuffle_pixels(const BlockGrid& grid, const Permutation& perm);

// split -> scramble_blocks(k1 at size N) -> shuffle_pixels(k2 at size L)
// -> join. A pure sample permutation: the multiset of samples is preserved.
ImageTensor encrypt_image(const ImageTensor& img, const PermKey& k1, const PermKey& k2,
                          Eigen::Index patch);
ImageTensor decrypt_image(const ImageTensor& img, const PermKey& k1, const PermKey& k2,
                          Eigen::Index patch);

// Same pipeline with the permutations supplied directly.
ImageTensor encrypt_image(const ImageTensor& img, const Permutation& block_perm,
                          const Permutation& pixel_perm, Eigen::Index patch);
ImageTensor decrypt_image(const ImageTensor& img, const Permutation& block_perm,
                          const Permutation& pixel_perm, Eigen::Index patch);

}  // namespace vitenc
