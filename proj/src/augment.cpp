#include "elbnn/augment.hpp"

namespace elbnn {

namespace {

constexpr int kPad = 4;

// reflect-101 index: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
int reflect(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

}  // namespace

DenseTensor augment(const DenseTensor& batch, bool training, std::mt19937& rng) {
    if (!training) return batch;
    const Shape4 s = batch.shape;
    DenseTensor out(s);
    std::uniform_int_distribution<int> shift(0, 2 * kPad);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int n = 0; n < s.n; ++n) {
        const int dy = shift(rng) - kPad;
        const int dx = shift(rng) - kPad;
        const bool flip = coin(rng) == 1;
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    const int sy = reflect(y + dy, s.h);
                    const int sx = reflect(flip ? (s.w - 1 - x) + dx : x + dx, s.w);
                    out.at(n, c, y, x) = batch.at(n, c, sy, sx);
                }
    }
    return out;
}

}  // namespace elbnn
