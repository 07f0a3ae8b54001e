#pragma once

// Shared helpers for the test binaries: fixture loading, deterministic
// random inputs, and the small model config most tests run on.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "vitenc/image.hpp"
#include "vitenc/keyperm.hpp"
#include "vitenc/modelstore.hpp"

namespace testsupport {

inline std::string fixture_path(const std::string& name) {
    return std::string(FIXTURE_DIR) + "/" + name;
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open fixture: " + path);
    }
    nlohmann::json j;
    in >> j;
    return j;
}

// p=4, 16x16x3, D=32, depth=2, heads=2, 10 classes.
inline vitenc::ViTConfig tiny_config(vitenc::DType precision) {
    vitenc::ViTConfig cfg;
    cfg.patch_size = 4;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = 3;
    cfg.dim = 32;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.mlp_ratio = 4.0;
    cfg.num_classes = 10;
    cfg.precision = precision;
    return cfg;
}

inline vitenc::ImageTensor random_image(std::mt19937_64& rng, int h, int w, int c) {
    vitenc::ImageTensor img = vitenc::ImageTensor::zeros(h, w, c);
    std::uniform_int_distribution<int> byte(0, 255);
    for (std::uint8_t& v : img.data) {
        v = static_cast<std::uint8_t>(byte(rng));
    }
    return img;
}

// v(y, x, ch) = (31 y + 7 x + 11 ch) mod 256, the fixed test pattern the
// golden logits fixture was computed on.
inline vitenc::ImageTensor formula_image(int h, int w, int c) {
    vitenc::ImageTensor img = vitenc::ImageTensor::zeros(h, w, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                img.at(y, x, ch) = static_cast<std::uint8_t>((31 * y + 7 * x + 11 * ch) % 256);
            }
        }
    }
    return img;
}

inline vitenc::PermKey random_key(std::mt19937_64& rng,
                                  vitenc::KeyRole role = vitenc::KeyRole::block) {
    std::uniform_int_distribution<int> byte(0, 255);
    vitenc::PermKey key;
    key.role = role;
    key.bytes.resize(16);
    for (std::uint8_t& b : key.bytes) {
        b = static_cast<std::uint8_t>(byte(rng));
    }
    return key;
}

// Fresh empty directory under the system temp root.
inline std::filesystem::path make_temp_dir(const std::string& name) {
    std::filesystem::path dir = std::filesystem::temp_directory_path() / ("vitenc_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testsupport
