#include "vitenc/keystream.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

namespace vitenc {

namespace {

// ----- SHA-256 (FIPS 180-4) -------------------------------------------------

constexpr std::uint32_t kSha256K[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

inline std::uint32_t rotr(std::uint32_t x, int n) {
    return (x >> n) | (x << (32 - n));
}

void sha256_compress(std::uint32_t state[8], const std::uint8_t block[64]) {
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i) {
        w[i] = (std::uint32_t(block[4 * i]) << 24) |
               (std::uint32_t(block[4 * i + 1]) << 16) |
               (std::uint32_t(block[4 * i + 2]) << 8) |
               std::uint32_t(block[4 * i + 3]);
    }
    for (int i = 16; i < 64; ++i) {
        std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
        std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
        w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = state[0], b = state[1], c = state[2], d = state[3];
    std::uint32_t e = state[4], f = state[5], g = state[6], h = state[7];
    for (int i = 0; i < 64; ++i) {
        std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
        std::uint32_t ch = (e & f) ^ (~e & g);
        std::uint32_t t1 = h + s1 + ch + kSha256K[i] + w[i];
        std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
        std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
        std::uint32_t t2 = s0 + maj;
        h = g; g = f; f = e; e = d + t1;
        d = c; c = b; b = a; a = t1 + t2;
    }
    state[0] += a; state[1] += b; state[2] += c; state[3] += d;
    state[4] += e; state[5] += f; state[6] += g; state[7] += h;
}

// ----- ChaCha20 (RFC 8439) ---------------------------------------------------

inline std::uint32_t rotl(std::uint32_t x, int n) {
    return (x << n) | (x >> (32 - n));
}

inline void quarter_round(std::uint32_t s[16], int a, int b, int c, int d) {
    s[a] += s[b]; s[d] = rotl(s[d] ^ s[a], 16);
    s[c] += s[d]; s[b] = rotl(s[b] ^ s[c], 12);
    s[a] += s[b]; s[d] = rotl(s[d] ^ s[a], 8);
    s[c] += s[d]; s[b] = rotl(s[b] ^ s[c], 7);
}

inline std::uint32_t load_le32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace

Digest sha256(const std::uint8_t* data, std::size_t len) {
    std::uint32_t state[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                              0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::size_t full = len / 64;
    for (std::size_t i = 0; i < full; ++i) {
        sha256_compress(state, data + 64 * i);
    }
    // Final padded block(s): 0x80, zeros, 64-bit big-endian bit length.
    std::uint8_t tail[128] = {0};
    std::size_t rem = len - 64 * full;
    std::memcpy(tail, data + 64 * full, rem);
    tail[rem] = 0x80;
    std::size_t tail_len = (rem + 9 <= 64) ? 64 : 128;
    std::uint64_t bits = std::uint64_t(len) * 8;
    for (int i = 0; i < 8; ++i) {
        tail[tail_len - 1 - i] = std::uint8_t(bits >> (8 * i));
    }
    sha256_compress(state, tail);
    if (tail_len == 128) {
        sha256_compress(state, tail + 64);
    }
    Digest out;
    for (int i = 0; i < 8; ++i) {
        out[4 * i] = std::uint8_t(state[i] >> 24);
        out[4 * i + 1] = std::uint8_t(state[i] >> 16);
        out[4 * i + 2] = std::uint8_t(state[i] >> 8);
        out[4 * i + 3] = std::uint8_t(state[i]);
    }
    return out;
}

Digest sha256(const std::vector<std::uint8_t>& data) {
    return sha256(data.data(), data.size());
}

Digest sha256(const std::string& data) {
    return sha256(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
}

std::array<std::uint8_t, 64> chacha20_block(const Digest& key,
                                            std::uint32_t counter,
                                            const std::array<std::uint8_t, 12>& nonce) {
    std::uint32_t state[16];
    state[0] = 0x61707865; state[1] = 0x3320646e;
    state[2] = 0x79622d32; state[3] = 0x6b206574;
    for (int i = 0; i < 8; ++i) {
        state[4 + i] = load_le32(key.data() + 4 * i);
    }
    state[12] = counter;
    for (int i = 0; i < 3; ++i) {
        state[13 + i] = load_le32(nonce.data() + 4 * i);
    }
    std::uint32_t w[16];
    std::memcpy(w, state, sizeof(w));
    for (int round = 0; round < 10; ++round) {
        quarter_round(w, 0, 4, 8, 12);
        quarter_round(w, 1, 5, 9, 13);
        quarter_round(w, 2, 6, 10, 14);
        quarter_round(w, 3, 7, 11, 15);
        quarter_round(w, 0, 5, 10, 15);
        quarter_round(w, 1, 6, 11, 12);
        quarter_round(w, 2, 7, 8, 13);
        quarter_round(w, 3, 4, 9, 14);
    }
    std::array<std::uint8_t, 64> out;
    for (int i = 0; i < 16; ++i) {
        std::uint32_t v = w[i] + state[i];
        out[4 * i] = std::uint8_t(v);
        out[4 * i + 1] = std::uint8_t(v >> 8);
        out[4 * i + 2] = std::uint8_t(v >> 16);
        out[4 * i + 3] = std::uint8_t(v >> 24);
    }
    return out;
}

WordStream::WordStream(const Digest& key) : key_(key) {}

std::uint64_t WordStream::next_word() {
    if (word_index_ == 8) {
        block_ = chacha20_block(key_, counter_++, {});
        word_index_ = 0;
    }
    const std::uint8_t* p = block_.data() + 8 * word_index_++;
    std::uint64_t w = 0;
    for (int i = 7; i >= 0; --i) {
        w = (w << 8) | p[i];
    }
    return w;
}

std::uint64_t WordStream::uniform_int(std::uint64_t k) {
    std::uint64_t m = k + 1;  // k = UINT64_MAX would wrap, callers stay far below
    std::uint64_t r = ((~std::uint64_t{0} % m) + 1) % m;  // 2^64 mod m
    std::uint64_t limit = ~std::uint64_t{0} - r;
    for (;;) {
        std::uint64_t w = next_word();
        if (w <= limit) {
            return w % m;
        }
    }
}

double WordStream::normal() {
    std::uint64_t w1 = next_word();
    std::uint64_t w2 = next_word();
    double u1 = double((w1 >> 11) + 1) * 0x1.0p-53;
    double u2 = double(w2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace vitenc
