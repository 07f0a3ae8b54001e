#include "vitenc/blockcodec.hpp"

#include <stdexcept>
#include <string>

#include "vitenc/errors.hpp"

namespace vitenc {

namespace {

void require_divisible(int height, int width, Eigen::Index patch) {
    if (patch < 1) {
        throw InvalidGeometry("block size must be >= 1, got " + std::to_string(patch));
    }
    if (height % patch != 0 || width % patch != 0) {
        throw InvalidGeometry("block size " + std::to_string(patch) +
                              " does not divide image dimensions " +
                              std::to_string(height) + "x" + std::to_string(width));
    }
}

void require_perm_size(const Permutation& perm, Eigen::Index expected, const char* what) {
    if (perm.size() != expected) {
        throw std::invalid_argument(std::string(what) + ": permutation size " +
                                    std::to_string(perm.size()) + ", expected " +
                                    std::to_string(expected));
    }
    if (!is_bijection(perm)) {
        throw std::invalid_argument(std::string(what) + ": map is not a bijection");
    }
}

}  // namespace

BlockGrid split_blocks(const ImageTensor& img, Eigen::Index patch) {
    validate(img);
    require_divisible(img.height, img.width, patch);
    BlockGrid grid;
    grid.patch = patch;
    grid.grid_rows = img.height / patch;
    grid.grid_cols = img.width / patch;
    grid.channels = img.channels;
    const Eigen::Index block_len = patch * patch * img.channels;
    grid.blocks.resize(grid.grid_rows * grid.grid_cols, block_len);
    for (Eigen::Index br = 0; br < grid.grid_rows; ++br) {
        for (Eigen::Index bc = 0; bc < grid.grid_cols; ++bc) {
            std::uint8_t* dst = grid.blocks.row(br * grid.grid_cols + bc).data();
            for (Eigen::Index y = 0; y < patch; ++y) {
                const std::uint8_t* src =
                    &img.data[static_cast<std::size_t>(((br * patch + y) * img.width +
                                                        bc * patch) * img.channels)];
                std::copy(src, src + patch * img.channels, dst);
                dst += patch * img.channels;
            }
        }
    }
    return grid;
}

ImageTensor join_blocks(const BlockGrid& grid, int height, int width, int channels) {
    require_divisible(height, width, grid.patch);
    const Eigen::Index patch = grid.patch;
    if (grid.grid_rows != height / patch || grid.grid_cols != width / patch ||
        grid.channels != channels ||
        grid.block_count() != grid.grid_rows * grid.grid_cols ||
        grid.block_len() != patch * patch * channels) {
        throw InvalidGeometry("block grid does not match image geometry " +
                              std::to_string(height) + "x" + std::to_string(width) + "x" +
                              std::to_string(channels) + " with block size " +
                              std::to_string(patch));
    }
    ImageTensor img = ImageTensor::zeros(height, width, channels);
    for (Eigen::Index br = 0; br < grid.grid_rows; ++br) {
        for (Eigen::Index bc = 0; bc < grid.grid_cols; ++bc) {
            const std::uint8_t* src = grid.blocks.row(br * grid.grid_cols + bc).data();
            for (Eigen::Index y = 0; y < patch; ++y) {
                std::uint8_t* dst =
                    &img.data[static_cast<std::size_t>(((br * patch + y) * width +
                                                        bc * patch) * channels)];
                std::copy(src, src + patch * channels, dst);
                src += patch * channels;
            }
        }
    }
    return img;
}

BlockGrid scramble_blocks(const BlockGrid& grid, const Permutation& perm) {
    require_perm_size(perm, grid.block_count(), "scramble_blocks");
    BlockGrid out = grid;
    out.blocks = permute_rows(grid.blocks, perm);
    return out;
}

BlockGrid shuffle_pixels(const BlockGrid& grid, const Permutation& perm) {
    require_perm_size(perm, grid.block_len(), "shuffle_pixels");
    BlockGrid out = grid;
    out.blocks = permute_cols(grid.blocks, perm);
    return out;
}

ImageTensor encrypt_image(const ImageTensor& img, const Permutation& block_perm,
                          const Permutation& pixel_perm, Eigen::Index patch) {
    BlockGrid grid = split_blocks(img, patch);
    grid = scramble_blocks(grid, block_perm);
    grid = shuffle_pixels(grid, pixel_perm);
    return join_blocks(grid, img.height, img.width, img.channels);
}

ImageTensor decrypt_image(const ImageTensor& img, const Permutation& block_perm,
                          const Permutation& pixel_perm, Eigen::Index patch) {
    BlockGrid grid = split_blocks(img, patch);
    grid = shuffle_pixels(grid, invert(pixel_perm));
    grid = scramble_blocks(grid, invert(block_perm));
    return join_blocks(grid, img.height, img.width, img.channels);
}

ImageTensor encrypt_image(const ImageTensor& img, const PermKey& k1, const PermKey& k2,
                          Eigen::Index patch) {
    validate(img);
    require_divisible(img.height, img.width, patch);
    const Eigen::Index blocks = (img.height / patch) * (img.width / patch);
    const Eigen::Index block_len = patch * patch * img.channels;
    return encrypt_image(img, derive_permutation(k1, blocks),
                         derive_permutation(k2, block_len), patch);
}

ImageTensor decrypt_image(const ImageTensor& img, const PermKey& k1, const PermKey& k2,
                          Eigen::Index patch) {
    validate(img);
    require_divisible(img.height, img.width, patch);
    const Eigen::Index blocks = (img.height / patch) * (img.width / patch);
    const Eigen::Index block_len = patch * patch * img.channels;
    return decrypt_image(img, derive_permutation(k1, blocks),
                         derive_permutation(k2, block_len), patch);
}

}  // namespace vitenc
