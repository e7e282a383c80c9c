#include "elbnn/binconv.hpp"

#include <bit>
#include <stdexcept>

#include "elbnn/float_kernels.hpp"

namespace elbnn {

namespace {

int dot_against_ones(std::span<const uint64_t> w, std::span<const uint64_t> mask, int n_valid) {
    // all-ones (+1 everywhere) vs w: xor = mask & ~w
    int mismatches = 0;
    for (size_t i = 0; i < w.size(); ++i) mismatches += std::popcount(mask[i] & ~w[i]);
    return n_valid - 2 * mismatches;
}

DenseTensor binconv2d_dense_groups1(const BitTensor& a, const BitTensor& w, const ConvSpec& spec) {
    const Shape4 s = a.shape;
    const int oh = spec.out_h(s.h);
    const int ow = spec.out_w(s.w);
    const int taps = spec.k_h * spec.k_w;
    DenseTensor out(s.n, spec.c_out, oh, ow);

    // Padding sites are +1 across all channels; their dot with each filter tap
    // is a constant, so build it once.
    std::vector<int> pad_dot;
    if (spec.pad > 0) {
        pad_dot.resize(size_t(spec.c_out) * taps);
        for (int oc = 0; oc < spec.c_out; ++oc)
            for (int ky = 0; ky < spec.k_h; ++ky)
                for (int kx = 0; kx < spec.k_w; ++kx)
                    pad_dot[size_t(oc) * taps + ky * spec.k_w + kx] =
                        dot_against_ones(w.site(oc, ky, kx), w.valid_mask, spec.c_in);
    }

    const int wps = a.words_per_site;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < s.n; ++n) {
        for (int oc = 0; oc < spec.c_out; ++oc) {
            const uint64_t* wsite0 = w.words.data() + w.site_index(oc, 0, 0) * wps;
            float* o = out.data.data() + (int64_t(n) * spec.c_out + oc) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    int32_t acc = 0;
                    for (int ky = 0; ky < spec.k_h; ++ky) {
                        const int iy = oy * spec.stride - spec.pad + ky;
                        const uint64_t* arow =
                            a.words.data() + a.site_index(n, iy < 0 ? 0 : iy, 0) * wps;
                        for (int kx = 0; kx < spec.k_w; ++kx) {
                            const int ix = ox * spec.stride - spec.pad + kx;
                            if (iy >= 0 && iy < s.h && ix >= 0 && ix < s.w)
                                acc += popcount_dot_words(
                                    arow + int64_t(ix) * wps,
                                    wsite0 + int64_t(ky * spec.k_w + kx) * wps, wps, spec.c_in);
                            else
                                acc += pad_dot[size_t(oc) * taps + ky * spec.k_w + kx];
                        }
                    }
                    o[int64_t(oy) * ow + ox] = float(acc);
                }
            }
        }
    }
    return out;
}

DenseTensor binconv2d_depthwise(const BitTensor& a, const BitTensor& w, const ConvSpec& spec) {
    const Shape4 s = a.shape;
    const int oh = spec.out_h(s.h);
    const int ow = spec.out_w(s.w);
    DenseTensor out(s.n, spec.c_out, oh, ow);

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < s.n; ++n) {
        for (int oc = 0; oc < spec.c_out; ++oc) {
            const int blk = oc / 64;
            const int sh = oc % 64;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    int32_t acc = 0;
                    for (int ky = 0; ky < spec.k_h; ++ky) {
                        const int iy = oy * spec.stride - spec.pad + ky;
                        for (int kx = 0; kx < spec.k_w; ++kx) {
                            const int ix = ox * spec.stride - spec.pad + kx;
                            const bool in = iy >= 0 && iy < s.h && ix >= 0 && ix < s.w;
                            const int xb =
                                in ? int((a.words[size_t(a.site_index(n, iy, ix) *
                                                         a.words_per_site + blk)] >> sh) & 1u)
                                   : 1;  // pad binarizes to +1
                            const int wb = int(w.words[size_t(
                                               w.site_index(oc, ky, kx) * w.words_per_site)] & 1u);
                            acc += (xb == wb) ? 1 : -1;
                        }
                    }
                    out.at(n, oc, oy, ox) = float(acc);
                }
            }
        }
    }
    return out;
}

}  // namespace

DenseTensor binconv2d(const BitTensor& a, const BitTensor& w, const ConvSpec& spec) {
    spec.validate();
    if (a.shape.c != spec.c_in || w.shape.n != spec.c_out ||
        w.shape.c != spec.c_in_per_group() || w.shape.h != spec.k_h || w.shape.w != spec.k_w)
        throw std::invalid_argument("binconv2d: shapes inconsistent with spec, a=" +
                                    a.shape.str() + " w=" + w.shape.str());
    if (spec.out_h(a.shape.h) <= 0 || spec.out_w(a.shape.w) <= 0)
        throw std::invalid_argument("binconv2d: non-positive output size");
    return spec.depthwise() ? binconv2d_depthwise(a, w, spec)
                            : binconv2d_dense_groups1(a, w, spec);
}

DenseTensor apply_scale(const DenseTensor& y, const ScaleK* k, const ScaleAlpha& alpha,
                        const ConvSpec& spec) {
    if (spec.scale_mode == ScaleMode::none) return y;
    const Shape4 s = y.shape;
    if (int(alpha.values.size()) != s.c)
        throw std::invalid_argument("apply_scale: alpha size mismatch");
    const bool use_k = spec.scale_mode == ScaleMode::alpha_and_k;
    if (use_k && (k == nullptr || k->n != s.n || k->h != s.h || k->w != s.w))
        throw std::invalid_argument("apply_scale: K missing or mis-shaped");
    const int64_t plane = int64_t(s.h) * s.w;
    DenseTensor out(s);
    for (int n = 0; n < s.n; ++n) {
        const float* kp = use_k ? k->values.data() + int64_t(n) * plane : nullptr;
        for (int f = 0; f < s.c; ++f) {
            const float a = alpha.values[size_t(f)];
            const float* p = y.data.data() + (int64_t(n) * s.c + f) * plane;
            float* o = out.data.data() + (int64_t(n) * s.c + f) * plane;
            if (use_k)
                for (int64_t i = 0; i < plane; ++i) o[i] = p[i] * a * kp[i];
            else
                for (int64_t i = 0; i < plane; ++i) o[i] = p[i] * a;
        }
    }
    return out;
}

ConvGrads binconv_backward(const DenseTensor& grad_out, const DenseTensor& saved_input,
                           const DenseTensor& saved_weights, const ConvSpec& spec,
                           const ScaleK* k, const ScaleAlpha* alpha, Binarizer binarizer) {
    // Scaling factors are constants in the backward pass.
    DenseTensor grad_scaled = grad_out;
    if (spec.scale_mode != ScaleMode::none) {
        if (alpha == nullptr) throw std::invalid_argument("binconv_backward: alpha required");
        grad_scaled = apply_scale(grad_out, k, *alpha, spec);
    }

    const bool clip = binarizer == Binarizer::clip;
    const DenseTensor x_t = clip ? clip_pm1(saved_input) : sign_dense(saved_input);
    const DenseTensor w_t = clip ? clip_pm1(saved_weights) : sign_dense(saved_weights);
    const float pad_value = clip ? 0.0f : 1.0f;

    // STE gates applied in place on the adjoint outputs.
    ConvGrads g;
    g.input = conv2d_grad_input(grad_scaled, w_t, spec, saved_input.shape);
    for (size_t i = 0; i < g.input.data.size(); ++i) {
        const float x = saved_input.data[i];
        if (x < -1.0f || x > 1.0f) g.input.data[i] = 0.0f;
    }
    g.weights = conv2d_grad_weights(x_t, grad_scaled, spec, pad_value);
    for (size_t i = 0; i < g.weights.data.size(); ++i) {
        const float w = saved_weights.data[i];
        if (w < -1.0f || w > 1.0f) g.weights.data[i] = 0.0f;
    }
    return g;
}

DenseTensor binconv2d_surrogate(const DenseTensor& x, const DenseTensor& w,
                                const ConvSpec& spec) {
    return conv2d_forward(clip_pm1(x), clip_pm1(w), spec, 0.0f);
}

}  // namespace elbnn
