#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace elbnn {

// (batch, channel, height, width). Singleton dims model lower ranks.
struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    int64_t numel() const { return int64_t(n) * c * h * w; }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

// Contiguous float32 tensor, n-major then c, h, w.
struct DenseTensor {
    Shape4 shape;
    std::vector<float> data;

    DenseTensor() = default;
    DenseTensor(int n, int c, int h, int w)
        : shape{n, c, h, w}, data(size_t(shape.numel()), 0.0f) {}
    explicit DenseTensor(Shape4 s) : DenseTensor(s.n, s.c, s.h, s.w) {}

    int64_t numel() const { return shape.numel(); }

    int64_t index(int n, int c, int y, int x) const {
        return ((int64_t(n) * shape.c + c) * shape.h + y) * shape.w + x;
    }
    float& at(int n, int c, int y, int x) { return data[size_t(index(n, c, y, x))]; }
    float at(int n, int c, int y, int x) const { return data[size_t(index(n, c, y, x))]; }

    bool all_finite() const;
};

// Channel-packed binary tensor: bit 1 encodes +1, bit 0 encodes -1.
// Word layout is (n, h, w, block) so one spatial site's channel words are
// contiguous; channel c lives in block c/64 at bit c%64. Bits above the
// channel count are always 0.
struct BitTensor {
    Shape4 shape;
    int words_per_site = 0;
    std::vector<uint64_t> words;
    std::vector<uint64_t> valid_mask;  // one word per block, c low bits set in total

    BitTensor() = default;
    BitTensor(int n, int c, int h, int w);

    int64_t site_index(int n, int y, int x) const {
        return (int64_t(n) * shape.h + y) * int64_t(shape.w) + x;
    }
    std::span<const uint64_t> site(int n, int y, int x) const {
        return {words.data() + site_index(n, y, x) * words_per_site, size_t(words_per_site)};
    }
    std::span<uint64_t> site(int n, int y, int x) {
        return {words.data() + site_index(n, y, x) * words_per_site, size_t(words_per_site)};
    }
    bool get(int n, int c, int y, int x) const {
        const uint64_t word = words[size_t(site_index(n, y, x) * words_per_site + c / 64)];
        return (word >> (c % 64)) & 1u;
    }
};

// Sign(x) packing: bit set iff x >= 0 (Sign(0) = +1).
BitTensor pack_bits(const DenseTensor& t);

// Inverse map onto {-1.0f, +1.0f}; unpack(pack(t)) equals elementwise Sign(t).
DenseTensor unpack_bits(const BitTensor& b);

// Word-pointer form used by the conv kernels' inner loops.
inline int popcount_dot_words(const uint64_t* a, const uint64_t* b, int words, int n_valid) {
    int mismatches = 0;
    for (int i = 0; i < words; ++i) mismatches += std::popcount(a[i] ^ b[i]);
    return n_valid - 2 * mismatches;
}

// Dot product of two +/-1 vectors stored as packed words:
//   sum a_i * b_i = n_valid - 2 * popcount(a XOR b).
// Bits beyond n_valid must be 0 in both spans.
inline int popcount_dot(std::span<const uint64_t> a, std::span<const uint64_t> b, int n_valid) {
    if (a.size() != b.size()) throw std::invalid_argument("popcount_dot: span length mismatch");
    return popcount_dot_words(a.data(), b.data(), int(a.size()), n_valid);
}

}  // namespace elbnn
