#include "vitenc/keyperm.hpp"

#include <fstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "vitenc/keystream.hpp"

namespace vitenc {

Permutation Permutation::identity(Eigen::Index n) {
    Permutation p;
    p.map.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        p.map[static_cast<std::size_t>(i)] = i;
    }
    return p;
}

bool is_bijection(const Permutation& p) {
    const Eigen::Index n = p.size();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (Eigen::Index v : p.map) {
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) {
            return false;
        }
        seen[static_cast<std::size_t>(v)] = true;
    }
    return true;
}

Permutation derive_permutation(const PermKey& key, Eigen::Index n) {
    if (n < 1) {
        throw std::invalid_argument("derive_permutation: n must be >= 1, got " +
                                    std::to_string(n));
    }
    if (key.bytes.empty()) {
        throw std::invalid_argument("derive_permutation: key must be non-empty");
    }
    WordStream stream(sha256(key.bytes));
    Permutation p = Permutation::identity(n);
    for (Eigen::Index i = n - 1; i >= 1; --i) {
        auto j = static_cast<Eigen::Index>(stream.uniform_int(static_cast<std::uint64_t>(i)));
        std::swap(p.map[static_cast<std::size_t>(i)], p.map[static_cast<std::size_t>(j)]);
    }
    return p;
}

Permutation invert(const Permutation& p) {
    if (!is_bijection(p)) {
        throw std::invalid_argument("invert: map is not a bijection");
    }
    Permutation q;
    q.map.resize(p.map.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        q.map[static_cast<std::size_t>(p.map[static_cast<std::size_t>(i)])] = i;
    }
    return q;
}

PermMatrix to_matrix(const Permutation& p) {
    if (!is_bijection(p)) {
        throw std::invalid_argument("to_matrix: map is not a bijection");
    }
    PermMatrix m;
    m.rows = RowMatrix<std::uint8_t>::Zero(p.size(), p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        m.rows(i, p.map[static_cast<std::size_t>(i)]) = 1;
    }
    return m;
}

Permutation to_permutation(const PermMatrix& m) {
    if (m.rows.rows() != m.rows.cols()) {
        throw std::invalid_argument("to_permutation: matrix is not square");
    }
    Permutation p;
    p.map.assign(static_cast<std::size_t>(m.rows.rows()), -1);
    for (Eigen::Index i = 0; i < m.rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.rows.cols(); ++j) {
            if (m.rows(i, j) == 1) {
                if (p.map[static_cast<std::size_t>(i)] != -1) {
                    throw std::invalid_argument("to_permutation: multiple 1s in a row");
                }
                p.map[static_cast<std::size_t>(i)] = j;
            } else if (m.rows(i, j) != 0) {
                throw std::invalid_argument("to_permutation: entries must be 0 or 1");
            }
        }
    }
    if (!is_bijection(p)) {
        throw std::invalid_argument("to_permutation: matrix is not a permutation matrix");
    }
    return p;
}

PermMatrix extend_for_class_token(const PermMatrix& m) {
    const Eigen::Index n = m.size();
    PermMatrix out;
    out.rows = RowMatrix<std::uint8_t>::Zero(n + 1, n + 1);
    out.rows(0, 0) = 1;
    out.rows.block(1, 1, n, n) = m.rows;
    return out;
}

Permutation extend_for_class_token(const Permutation& p) {
    Permutation out;
    out.map.resize(p.map.size() + 1);
    out.map[0] = 0;
    for (std::size_t i = 0; i < p.map.size(); ++i) {
        out.map[i + 1] = p.map[i] + 1;
    }
    return out;
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) {
        throw std::invalid_argument("hex string has odd length");
    }
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            throw std::invalid_argument("invalid hex digit in \"" + hex + "\"");
        }
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

KeyPair read_key_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open key file: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("key file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.contains("block_key") || !j.contains("pixel_key")) {
        throw std::invalid_argument("key file " + path +
                                    " must contain block_key and pixel_key");
    }
    KeyPair keys;
    keys.block_key = {from_hex(j.at("block_key").get<std::string>()), KeyRole::block};
    keys.pixel_key = {from_hex(j.at("pixel_key").get<std::string>()), KeyRole::pixel};
    if (keys.block_key.bytes.empty() || keys.pixel_key.bytes.empty()) {
        throw std::invalid_argument("key file " + path + " contains an empty key");
    }
    return keys;
}

void write_key_file(const std::string& path, const KeyPair& keys) {
    nlohmann::json j;
    j["block_key"] = to_hex(keys.block_key.bytes);
    j["pixel_key"] = to_hex(keys.pixel_key.bytes);
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("cannot write key file: " + path);
    }
    out << j.dump(2) << "\n";
}

KeyPair derive_key_pair(const std::vector<std::uint8_t>& seed_bytes) {
    auto tagged = [&seed_bytes](const std::string& tag) {
        std::vector<std::uint8_t> material = seed_bytes;
        material.insert(material.end(), tag.begin(), tag.end());
        Digest d = sha256(material);
        return std::vector<std::uint8_t>(d.begin(), d.end());
    };
    return {{tagged("/block"), KeyRole::block}, {tagged("/pixel"), KeyRole::pixel}};
}

}  // namespace vitenc
