#include "elbnn/elastic_link.hpp"

#include <cmath>
#include <stdexcept>

namespace elbnn {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// SEI transform without the gamma division (the "s" the backward needs).
DenseTensor sei_raw(const DenseTensor& pooled, const ELConfig& cfg) {
    switch (cfg.mode()) {
        case SeiMode::identity:
            return pooled;
        case SeiMode::squeeze:
            return squeeze(pooled, cfg.c_out, 1.0f, cfg.grouping);
        case SeiMode::expand:
            return expand(pooled, cfg.c_out, 1.0f);
    }
    throw std::logic_error("unreachable");
}

}  // namespace

float gamma_init(int c_in, int c_out) {
    if (c_in <= 0 || c_out <= 0) throw std::invalid_argument("gamma_init: non-positive channels");
    return c_in >= c_out ? float(ceil_div(c_in, c_out)) : float(ceil_div(c_out, c_in));
}

DenseTensor squeeze(const DenseTensor& x, int c_out, float gamma, SqueezeGrouping grouping) {
    const Shape4 s = x.shape;
    if (s.c <= c_out) throw std::invalid_argument("squeeze: requires c_in > c_out");
    const int g = ceil_div(s.c, c_out);
    const float inv_gamma = 1.0f / gamma;
    const int64_t plane = int64_t(s.h) * s.w;
    DenseTensor out(s.n, c_out, s.h, s.w);
    for (int n = 0; n < s.n; ++n) {
        for (int j = 0; j < c_out; ++j) {
            float* o = out.data.data() + (int64_t(n) * c_out + j) * plane;
            for (int k = 0; k < g; ++k) {
                // gamma_consistent: g groups of c_out consecutive channels summed
                // elementwise; literal_sentence: c_out groups of g channels, each
                // collapsed. Channels at and past c_in are the zero padding.
                const int c = grouping == SqueezeGrouping::gamma_consistent ? k * c_out + j
                                                                            : j * g + k;
                if (c >= s.c) continue;
                const float* p = x.data.data() + (int64_t(n) * s.c + c) * plane;
                for (int64_t i = 0; i < plane; ++i) o[i] += p[i];
            }
            for (int64_t i = 0; i < plane; ++i) o[i] *= inv_gamma;
        }
    }
    return out;
}

DenseTensor expand(const DenseTensor& x, int c_out, float gamma) {
    const Shape4 s = x.shape;
    if (s.c >= c_out) throw std::invalid_argument("expand: requires c_in < c_out");
    const float inv_gamma = 1.0f / gamma;
    const int64_t plane = int64_t(s.h) * s.w;
    DenseTensor out(s.n, c_out, s.h, s.w);
    for (int n = 0; n < s.n; ++n)
        for (int j = 0; j < c_out; ++j) {
            const float* p = x.data.data() + (int64_t(n) * s.c + j % s.c) * plane;
            float* o = out.data.data() + (int64_t(n) * c_out + j) * plane;
            for (int64_t i = 0; i < plane; ++i) o[i] = p[i] * inv_gamma;
        }
    return out;
}

DenseTensor max_pool2x2(const DenseTensor& x) {
    const Shape4 s = x.shape;
    const int oh = s.h / 2;
    const int ow = s.w / 2;
    if (oh == 0 || ow == 0) throw std::invalid_argument("max_pool2x2: input too small");
    const int64_t in_plane = int64_t(s.h) * s.w;
    const int64_t out_plane = int64_t(oh) * ow;
    DenseTensor out(s.n, s.c, oh, ow);
    for (int64_t nc = 0; nc < int64_t(s.n) * s.c; ++nc) {
        const float* p = x.data.data() + nc * in_plane;
        float* o = out.data.data() + nc * out_plane;
        for (int y = 0; y < oh; ++y) {
            const float* r0 = p + int64_t(2 * y) * s.w;
            const float* r1 = r0 + s.w;
            for (int xx = 0; xx < ow; ++xx)
                o[int64_t(y) * ow + xx] =
                    std::max(std::max(r0[2 * xx], r0[2 * xx + 1]),
                             std::max(r1[2 * xx], r1[2 * xx + 1]));
        }
    }
    return out;
}

DenseTensor sei_forward(const DenseTensor& x, const ELConfig& cfg) {
    if (x.shape.c != cfg.c_in) throw std::invalid_argument("sei_forward: channel mismatch");
    const DenseTensor pooled = cfg.downsample ? max_pool2x2(x) : x;
    switch (cfg.mode()) {
        case SeiMode::identity: {
            DenseTensor out(pooled.shape);
            const float inv_gamma = 1.0f / cfg.gamma;
            for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = pooled.data[i] * inv_gamma;
            return out;
        }
        case SeiMode::squeeze:
            return squeeze(pooled, cfg.c_out, cfg.gamma, cfg.grouping);
        case SeiMode::expand:
            return expand(pooled, cfg.c_out, cfg.gamma);
    }
    throw std::logic_error("unreachable");
}

SeiGrads sei_backward(const DenseTensor& grad_out, const ELConfig& cfg,
                      const DenseTensor& saved_input) {
    if (saved_input.shape.c != cfg.c_in)
        throw std::invalid_argument("sei_backward: channel mismatch");
    const DenseTensor pooled = cfg.downsample ? max_pool2x2(saved_input) : DenseTensor();
    const DenseTensor& p = cfg.downsample ? pooled : saved_input;
    const Shape4 ps = p.shape;
    const Shape4 gs = grad_out.shape;
    if (gs.c != cfg.c_out || gs.n != ps.n || gs.h != ps.h || gs.w != ps.w)
        throw std::invalid_argument("sei_backward: grad shape mismatch");

    SeiGrads out;
    out.gamma = 0.0f;
    if (cfg.gamma_learnable) {
        const DenseTensor s = sei_raw(p, cfg);
        double acc = 0.0;
        for (size_t i = 0; i < s.data.size(); ++i)
            acc += double(grad_out.data[i]) * double(s.data[i]);
        out.gamma = float(-acc / (double(cfg.gamma) * double(cfg.gamma)));
    }

    // Adjoint of the mode map onto the pooled tensor.
    DenseTensor gp(ps);
    const float inv_gamma = 1.0f / cfg.gamma;
    const int g = cfg.c_in > cfg.c_out ? (cfg.c_in + cfg.c_out - 1) / cfg.c_out : 1;
    const int64_t plane = int64_t(ps.h) * ps.w;
    for (int n = 0; n < ps.n; ++n) {
        const float* go = grad_out.data.data() + int64_t(n) * cfg.c_out * plane;
        for (int c = 0; c < ps.c; ++c) {
            float* gpd = gp.data.data() + (int64_t(n) * ps.c + c) * plane;
            if (cfg.mode() == SeiMode::expand) {
                for (int j = c; j < cfg.c_out; j += cfg.c_in) {
                    const float* src = go + int64_t(j) * plane;
                    for (int64_t i = 0; i < plane; ++i) gpd[i] += src[i];
                }
                for (int64_t i = 0; i < plane; ++i) gpd[i] *= inv_gamma;
            } else {
                const int src_c =
                    cfg.mode() == SeiMode::identity
                        ? c
                        : (cfg.grouping == SqueezeGrouping::gamma_consistent ? c % cfg.c_out
                                                                             : c / g);
                const float* src = go + int64_t(src_c) * plane;
                for (int64_t i = 0; i < plane; ++i) gpd[i] = src[i] * inv_gamma;
            }
        }
    }

    if (!cfg.downsample) {
        out.x = std::move(gp);
        return out;
    }

    // Max-pool adjoint: first maximal site in row-major order wins.
    out.x = DenseTensor(saved_input.shape);
    const Shape4 is = saved_input.shape;
    const int64_t in_plane = int64_t(is.h) * is.w;
    for (int64_t nc = 0; nc < int64_t(ps.n) * ps.c; ++nc) {
        const float* pp = p.data.data() + nc * plane;
        const float* xin = saved_input.data.data() + nc * in_plane;
        const float* gsrc = gp.data.data() + nc * plane;
        float* gdst = out.x.data.data() + nc * in_plane;
        for (int y = 0; y < ps.h; ++y)
            for (int xx = 0; xx < ps.w; ++xx) {
                const float m = pp[int64_t(y) * ps.w + xx];
                for (int t = 0; t < 4; ++t) {
                    const int64_t idx = int64_t(2 * y + t / 2) * is.w + 2 * xx + t % 2;
                    if (xin[idx] == m) {
                        gdst[idx] = gsrc[int64_t(y) * ps.w + xx];
                        break;
                    }
                }
            }
    }
    return out;
}

DenseTensor el_forward(const DenseTensor& x, const DenseTensor& weights, BNState& bn,
                       const ELConfig& cfg, const ConvSpec& spec, bool training) {
    if (x.shape.c != spec.c_in || cfg.c_in != spec.c_in || cfg.c_out != spec.c_out)
        throw std::invalid_argument("el_forward: channel configuration mismatch");

    DenseTensor y = binconv2d(pack_bits(x), pack_bits(weights), spec);
    if (spec.scale_mode != ScaleMode::none) {
        const ScaleAlpha alpha = weight_alpha(weights);
        if (spec.scale_mode == ScaleMode::alpha_and_k) {
            const ScaleK k = activation_scale_k(x, spec);
            y = apply_scale(y, &k, alpha, spec);
        } else {
            y = apply_scale(y, nullptr, alpha, spec);
        }
    }
    y = batchnorm_forward(y, bn, training);

    const DenseTensor link = sei_forward(x, cfg);
    if (!(link.shape == y.shape))
        throw std::invalid_argument("el_forward: addend shape mismatch, conv=" + y.shape.str() +
                                    " sei=" + link.shape.str());
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += link.data[i];
    return y;
}

}  // namespace elbnn
