#pragma once

// 8-bit raster images and bit-exact binary PPM (P6, 3 channels) / PGM
// (P5, 1 channel) file IO. Maxval is fixed at 255.

#include <cstdint>
#include <string>
#include <vector>

namespace vitenc {

// Samples in row-major (row, column, channel-interleaved) order.
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    static ImageTensor zeros(int h, int w, int c);

    std::uint8_t& at(int y, int x, int ch) {
        return data[static_cast<std::size_t>((y * width + x) * channels + ch)];
    }
    std::uint8_t at(int y, int x, int ch) const {
        return data[static_cast<std::size_t>((y * width + x) * channels + ch)];
    }

    bool operator==(const ImageTensor&) const = default;
};

// Throws std::invalid_argument on inconsistent fields.
void validate(const ImageTensor& img);

ImageTensor read_image(const std::string& path);
void write_image(const std::string& path, const ImageTensor& img);

// In-memory forms of the same formats, used by file IO and tests.
ImageTensor decode_netpbm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_netpbm(const ImageTensor& img);

}  // namespace vitenc
