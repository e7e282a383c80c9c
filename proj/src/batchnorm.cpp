#include "elbnn/batchnorm.hpp"

#include <cmath>
#include <stdexcept>

namespace elbnn {

DenseTensor batchnorm_forward(const DenseTensor& x, BNState& state, bool training,
                              BNCache* cache) {
    const Shape4 s = x.shape;
    if (s.c != state.channels()) throw std::invalid_argument("batchnorm: channel mismatch");
    const int64_t plane = int64_t(s.h) * s.w;
    const int64_t per_chan = int64_t(s.n) * plane;
    DenseTensor out(s);
    if (cache) {
        cache->x_hat = DenseTensor(s);
        cache->inv_std.assign(size_t(s.c), 0.0f);
        cache->training = training;
    }

#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
        float mean, var;
        if (training) {
            double acc = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const float* p = x.data.data() + (int64_t(n) * s.c + c) * plane;
                for (int64_t i = 0; i < plane; ++i) acc += p[i];
            }
            mean = float(acc / double(per_chan));
            double vacc = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const float* p = x.data.data() + (int64_t(n) * s.c + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mean;
                    vacc += d * d;
                }
            }
            var = float(vacc / double(per_chan));
            state.running_mean[size_t(c)] =
                (1.0f - state.momentum) * state.running_mean[size_t(c)] + state.momentum * mean;
            state.running_var[size_t(c)] =
                (1.0f - state.momentum) * state.running_var[size_t(c)] + state.momentum * var;
        } else {
            mean = state.running_mean[size_t(c)];
            var = state.running_var[size_t(c)];
        }
        const float inv_std = 1.0f / std::sqrt(var + state.eps);
        if (cache) cache->inv_std[size_t(c)] = inv_std;
        const float sc = state.scale[size_t(c)];
        const float sh = state.shift[size_t(c)];
        for (int n = 0; n < s.n; ++n) {
            const float* p = x.data.data() + (int64_t(n) * s.c + c) * plane;
            float* o = out.data.data() + (int64_t(n) * s.c + c) * plane;
            float* xh = cache ? cache->x_hat.data.data() + (int64_t(n) * s.c + c) * plane
                              : nullptr;
            for (int64_t i = 0; i < plane; ++i) {
                const float v = (p[i] - mean) * inv_std;
                if (xh) xh[i] = v;
                o[i] = sc * v + sh;
            }
        }
    }
    return out;
}

BNGrads batchnorm_backward(const DenseTensor& grad_out, const BNState& state,
                           const BNCache& cache) {
    const Shape4 s = grad_out.shape;
    if (!(s == cache.x_hat.shape)) throw std::invalid_argument("batchnorm_backward: shape");
    const int64_t plane = int64_t(s.h) * s.w;
    const int64_t per_chan = int64_t(s.n) * plane;
    BNGrads g;
    g.x = DenseTensor(s);
    g.scale.assign(size_t(s.c), 0.0f);
    g.shift.assign(size_t(s.c), 0.0f);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < s.n; ++n) {
            const float* gp = grad_out.data.data() + (int64_t(n) * s.c + c) * plane;
            const float* xh = cache.x_hat.data.data() + (int64_t(n) * s.c + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
                sum_g += gp[i];
                sum_gx += double(gp[i]) * xh[i];
            }
        }
        g.scale[size_t(c)] = float(sum_gx);
        g.shift[size_t(c)] = float(sum_g);
        const float sc = state.scale[size_t(c)];
        const float inv_std = cache.inv_std[size_t(c)];
        const float k = sc * inv_std;
        if (cache.training) {
            const float mean_g = float(sum_g / double(per_chan));
            const float mean_gx = float(sum_gx / double(per_chan));
            for (int n = 0; n < s.n; ++n) {
                const float* gp = grad_out.data.data() + (int64_t(n) * s.c + c) * plane;
                const float* xh = cache.x_hat.data.data() + (int64_t(n) * s.c + c) * plane;
                float* gx = g.x.data.data() + (int64_t(n) * s.c + c) * plane;
                for (int64_t i = 0; i < plane; ++i)
                    gx[i] = k * (gp[i] - mean_g - xh[i] * mean_gx);
            }
        } else {
            for (int n = 0; n < s.n; ++n) {
                const float* gp = grad_out.data.data() + (int64_t(n) * s.c + c) * plane;
                float* gx = g.x.data.data() + (int64_t(n) * s.c + c) * plane;
                for (int64_t i = 0; i < plane; ++i) gx[i] = gp[i] * k;
            }
        }
    }
    return g;
}

}  // namespace elbnn
