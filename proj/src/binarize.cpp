#include "elbnn/binarize.hpp"

#include <cmath>
#include <stdexcept>

namespace elbnn {

BitTensor sign_forward(const DenseTensor& x) { return pack_bits(x); }

DenseTensor ste_backward(const DenseTensor& grad_out, const DenseTensor& x_saved) {
    if (!(grad_out.shape == x_saved.shape))
        throw std::invalid_argument("ste_backward: shape mismatch");
    DenseTensor out(grad_out.shape);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const float x = x_saved.data[i];
        out.data[i] = (x >= -1.0f && x <= 1.0f) ? grad_out.data[i] : 0.0f;
    }
    return out;
}

ScaleAlpha weight_alpha(const DenseTensor& w) {
    const Shape4 s = w.shape;
    const int64_t per_filter = int64_t(s.c) * s.h * s.w;
    ScaleAlpha alpha;
    alpha.values.resize(size_t(s.n));
    for (int f = 0; f < s.n; ++f) {
        const float* p = w.data.data() + int64_t(f) * per_filter;
        double acc = 0.0;
        for (int64_t i = 0; i < per_filter; ++i) acc += std::fabs(p[i]);
        alpha.values[size_t(f)] = float(acc / double(per_filter));
    }
    return alpha;
}

ScaleK activation_scale_k(const DenseTensor& a, const ConvSpec& spec) {
    const Shape4 s = a.shape;
    const int oh = spec.out_h(s.h);
    const int ow = spec.out_w(s.w);
    const int64_t plane = int64_t(s.h) * s.w;

    // Channel-mean of |a| per spatial site, then an average-filter pass over
    // the conv's window; out-of-bounds sites count as 0 in the numerator but
    // stay in the denominator.
    std::vector<float> chan_mean(size_t(int64_t(s.n) * plane), 0.0f);
    for (int n = 0; n < s.n; ++n) {
        float* m = chan_mean.data() + int64_t(n) * plane;
        for (int c = 0; c < s.c; ++c) {
            const float* p = a.data.data() + (int64_t(n) * s.c + c) * plane;
            for (int64_t i = 0; i < plane; ++i) m[i] += std::fabs(p[i]);
        }
        const float inv_c = 1.0f / float(s.c);
        for (int64_t i = 0; i < plane; ++i) m[i] *= inv_c;
    }

    ScaleK k;
    k.n = s.n;
    k.h = oh;
    k.w = ow;
    k.values.resize(size_t(int64_t(s.n) * oh * ow));
    const float inv_window = 1.0f / float(spec.k_h * spec.k_w);
    for (int n = 0; n < s.n; ++n) {
        const float* m = chan_mean.data() + int64_t(n) * plane;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                float acc = 0.0f;
                for (int ky = 0; ky < spec.k_h; ++ky) {
                    const int iy = y * spec.stride - spec.pad + ky;
                    if (iy < 0 || iy >= s.h) continue;
                    const float* row = m + int64_t(iy) * s.w;
                    for (int kx = 0; kx < spec.k_w; ++kx) {
                        const int ix = x * spec.stride - spec.pad + kx;
                        if (ix >= 0 && ix < s.w) acc += row[ix];
                    }
                }
                k.at(n, y, x) = acc * inv_window;
            }
        }
    }
    return k;
}

}  // namespace elbnn
