#pragma once

// Deterministic byte-level primitives behind key-derived permutations and
// seeded weight initialization: SHA-256, the ChaCha20 block function, and a
// word stream with rejection-sampled uniforms and Box-Muller normals. The
// exact recipes here are frozen; golden fixtures depend on every bit.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vitenc {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(const std::uint8_t* data, std::size_t len);
Digest sha256(const std::vector<std::uint8_t>& data);
Digest sha256(const std::string& data);

// One 64-byte ChaCha20 keystream block (RFC 8439 block function: 20 rounds,
// 32-bit counter, 96-bit nonce).
std::array<std::uint8_t, 64> chacha20_block(const Digest& key,
                                            std::uint32_t counter,
                                            const std::array<std::uint8_t, 12>& nonce);

// Uniform 64-bit words drawn from ChaCha20 keyed by `key` with an all-zero
// nonce and a block counter starting at 0. Each 64-byte block yields eight
// little-endian uint64 words, consumed in order.
class WordStream {
public:
    explicit WordStream(const Digest& key);

    std::uint64_t next_word();

    // Uniform integer in [0, k]. Rejection sampling: accept the first word
    // w <= 2^64 - 1 - (2^64 mod (k+1)), return w mod (k+1).
    std::uint64_t uniform_int(std::uint64_t k);

    // Standard normal via Box-Muller. Two words w1, w2 give
    // u1 = ((w1 >> 11) + 1) * 2^-53 in (0,1] and u2 = (w2 >> 11) * 2^-53 in
    // [0,1); the sample is sqrt(-2 ln u1) * cos(2 pi u2), in double.
    double normal();

private:
    Digest key_;
    std::uint32_t counter_ = 0;
    std::array<std::uint8_t, 64> block_{};
    std::size_t word_index_ = 8;  // 8 means "block exhausted"
};

}  // namespace vitenc
