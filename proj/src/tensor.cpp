#include "elbnn/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace elbnn {

std::string Shape4::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
}

bool DenseTensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

BitTensor::BitTensor(int n, int c, int h, int w) : shape{n, c, h, w} {
    words_per_site = (c + 63) / 64;
    words.assign(size_t(int64_t(n) * h * w * words_per_site), 0);
    valid_mask.assign(size_t(words_per_site), 0);
    for (int blk = 0; blk < words_per_site; ++blk) {
        const int bits = std::min(64, c - blk * 64);
        valid_mask[size_t(blk)] = bits == 64 ? ~uint64_t{0} : (uint64_t{1} << bits) - 1;
    }
}

BitTensor pack_bits(const DenseTensor& t) {
    BitTensor out(t.shape.n, t.shape.c, t.shape.h, t.shape.w);
    const Shape4 s = t.shape;
    const int64_t plane = int64_t(s.h) * s.w;
    const int wps = out.words_per_site;
    // Tile the site axis so the read-modify-write word window stays in cache
    // while channels stream through.
    const int64_t tile = std::max<int64_t>(1, 4096 / wps);
    for (int n = 0; n < s.n; ++n) {
        for (int64_t base = 0; base < plane; base += tile) {
            const int64_t count = std::min(tile, plane - base);
            uint64_t* wbase = out.words.data() + (int64_t(n) * plane + base) * wps;
            for (int c = 0; c < s.c; ++c) {
                const int blk = c / 64;
                const uint64_t bit = uint64_t{1} << (c % 64);
                const float* src = t.data.data() + (int64_t(n) * s.c + c) * plane + base;
                for (int64_t i = 0; i < count; ++i)
                    if (src[i] >= 0.0f) wbase[i * wps + blk] |= bit;
            }
        }
    }
    return out;
}

DenseTensor unpack_bits(const BitTensor& b) {
    const Shape4 s = b.shape;
    DenseTensor out(s.n, s.c, s.h, s.w);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const int blk = c / 64;
            const int sh = c % 64;
            float* dst = out.data.data() + out.index(n, c, 0, 0);
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    const uint64_t word =
                        b.words[size_t(b.site_index(n, y, x) * b.words_per_site + blk)];
                    dst[int64_t(y) * s.w + x] = ((word >> sh) & 1u) ? 1.0f : -1.0f;
                }
            }
        }
    }
    return out;
}

}  // namespace elbnn
