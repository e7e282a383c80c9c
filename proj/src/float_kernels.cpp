#include "elbnn/float_kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace elbnn {

namespace {

void check_conv_shapes(const Shape4& x, const Shape4& w, const ConvSpec& spec) {
    spec.validate();
    if (x.c != spec.c_in || w.n != spec.c_out || w.c != spec.c_in_per_group() ||
        w.h != spec.k_h || w.w != spec.k_w)
        throw std::invalid_argument("conv2d: tensor shapes inconsistent with spec, x=" + x.str() +
                                    " w=" + w.str());
}

// 1x1 stride-1: per (n, oc) an axpy accumulation over input channel planes.
void conv1x1_forward(const DenseTensor& x, const DenseTensor& w, DenseTensor& out,
                     const ConvSpec& spec) {
    const Shape4 s = x.shape;
    const int64_t plane = int64_t(s.h) * s.w;
    const int cpg = spec.c_in_per_group();
    const int oc_per_group = spec.c_out / spec.groups;

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < s.n; ++n) {
        for (int oc = 0; oc < spec.c_out; ++oc) {
            const int g = oc / oc_per_group;
            float* o = out.data.data() + (int64_t(n) * spec.c_out + oc) * plane;
            const float* wf = w.data.data() + int64_t(oc) * cpg;
            for (int icl = 0; icl < cpg; ++icl) {
                const float wv = wf[icl];
                const float* xc =
                    x.data.data() + (int64_t(n) * s.c + g * cpg + icl) * plane;
                for (int64_t i = 0; i < plane; ++i) o[i] += wv * xc[i];
            }
        }
    }
}

}  // namespace

DenseTensor conv2d_forward(const DenseTensor& x, const DenseTensor& w, const ConvSpec& spec,
                           float pad_value) {
    check_conv_shapes(x.shape, w.shape, spec);
    const Shape4 s = x.shape;
    const int oh = spec.out_h(s.h);
    const int ow = spec.out_w(s.w);
    DenseTensor out(s.n, spec.c_out, oh, ow);
    if (spec.k_h == 1 && spec.k_w == 1 && spec.stride == 1 && spec.pad == 0) {
        conv1x1_forward(x, w, out, spec);
        return out;
    }

    const int cpg = spec.c_in_per_group();
    const int oc_per_group = spec.c_out / spec.groups;
    const int64_t in_plane = int64_t(s.h) * s.w;
    const int64_t out_plane = int64_t(oh) * ow;
    const int taps = spec.k_h * spec.k_w;

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < s.n; ++n) {
        for (int oc = 0; oc < spec.c_out; ++oc) {
            const int g = oc / oc_per_group;
            float* o = out.data.data() + (int64_t(n) * spec.c_out + oc) * out_plane;
            const float* wf = w.data.data() + int64_t(oc) * cpg * taps;
            for (int oy = 0; oy < oh; ++oy) {
                const int iy0 = oy * spec.stride - spec.pad;
                for (int ox = 0; ox < ow; ++ox) {
                    const int ix0 = ox * spec.stride - spec.pad;
                    float acc = 0.0f;
                    for (int icl = 0; icl < cpg; ++icl) {
                        const float* xc =
                            x.data.data() + (int64_t(n) * s.c + g * cpg + icl) * in_plane;
                        const float* wk = wf + int64_t(icl) * taps;
                        for (int ky = 0; ky < spec.k_h; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= s.h) {
                                if (pad_value != 0.0f)
                                    for (int kx = 0; kx < spec.k_w; ++kx)
                                        acc += pad_value * wk[ky * spec.k_w + kx];
                                continue;
                            }
                            const float* xrow = xc + int64_t(iy) * s.w;
                            const float* wrow = wk + ky * spec.k_w;
                            for (int kx = 0; kx < spec.k_w; ++kx) {
                                const int ix = ix0 + kx;
                                const bool in = ix >= 0 && ix < s.w;
                                acc += wrow[kx] * (in ? xrow[ix] : pad_value);
                            }
                        }
                    }
                    o[int64_t(oy) * ow + ox] = acc;
                }
            }
        }
    }
    return out;
}

DenseTensor conv2d_grad_input(const DenseTensor& grad_out, const DenseTensor& w,
                              const ConvSpec& spec, Shape4 input_shape) {
    check_conv_shapes(input_shape, w.shape, spec);
    const int oh = spec.out_h(input_shape.h);
    const int ow = spec.out_w(input_shape.w);
    if (grad_out.shape.n != input_shape.n || grad_out.shape.c != spec.c_out ||
        grad_out.shape.h != oh || grad_out.shape.w != ow)
        throw std::invalid_argument("conv2d_grad_input: grad shape mismatch");
    const int cpg = spec.c_in_per_group();
    const int oc_per_group = spec.c_out / spec.groups;
    const int64_t in_plane = int64_t(input_shape.h) * input_shape.w;
    const int64_t out_plane = int64_t(oh) * ow;
    const int taps = spec.k_h * spec.k_w;
    DenseTensor gx(input_shape);

    // Scatter form: each thread owns one (n, ic) input plane.
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < input_shape.n; ++n) {
        for (int ic = 0; ic < input_shape.c; ++ic) {
            const int g = ic / cpg;
            const int icl = ic % cpg;
            float* gxc = gx.data.data() + (int64_t(n) * input_shape.c + ic) * in_plane;
            for (int ocl = 0; ocl < oc_per_group; ++ocl) {
                const int oc = g * oc_per_group + ocl;
                const float* go =
                    grad_out.data.data() + (int64_t(n) * spec.c_out + oc) * out_plane;
                const float* wk = w.data.data() + (int64_t(oc) * cpg + icl) * taps;
                if (taps == 1 && spec.stride == 1 && spec.pad == 0) {
                    const float wv = wk[0];
                    for (int64_t i = 0; i < out_plane; ++i) gxc[i] += wv * go[i];
                    continue;
                }
                if (taps == 1) {
                    const float wv = wk[0];
                    const int lo = (spec.pad + spec.stride - 1) / spec.stride;
                    const int hi =
                        std::min(ow, (input_shape.w - 1 + spec.pad) / spec.stride + 1);
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * spec.stride - spec.pad;
                        if (iy < 0 || iy >= input_shape.h) continue;
                        float* gxrow = gxc + int64_t(iy) * input_shape.w;
                        const float* grow = go + int64_t(oy) * ow;
                        for (int ox = lo; ox < hi; ++ox)
                            gxrow[ox * spec.stride - spec.pad] += wv * grow[ox];
                    }
                    continue;
                }
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy0 = oy * spec.stride - spec.pad;
                    const float* grow = go + int64_t(oy) * ow;
                    for (int ky = 0; ky < spec.k_h; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= input_shape.h) continue;
                        float* gxrow = gxc + int64_t(iy) * input_shape.w;
                        const float* wrow = wk + ky * spec.k_w;
                        if (spec.stride == 1) {
                            for (int kx = 0; kx < spec.k_w; ++kx) {
                                const int off = kx - spec.pad;
                                const int lo = std::max(0, -off);
                                const int hi = std::min(ow, input_shape.w - off);
                                const float wv = wrow[kx];
                                for (int ox = lo; ox < hi; ++ox)
                                    gxrow[ox + off] += wv * grow[ox];
                            }
                        } else {
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix0 = ox * spec.stride - spec.pad;
                                const float gv = grow[ox];
                                for (int kx = 0; kx < spec.k_w; ++kx) {
                                    const int ix = ix0 + kx;
                                    if (ix >= 0 && ix < input_shape.w)
                                        gxrow[ix] += wrow[kx] * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return gx;
}

DenseTensor conv2d_grad_weights(const DenseTensor& x, const DenseTensor& grad_out,
                                const ConvSpec& spec, float pad_value) {
    check_conv_shapes(x.shape, {spec.c_out, spec.c_in_per_group(), spec.k_h, spec.k_w}, spec);
    const Shape4 s = x.shape;
    const int oh = spec.out_h(s.h);
    const int ow = spec.out_w(s.w);
    const int cpg = spec.c_in_per_group();
    const int oc_per_group = spec.c_out / spec.groups;
    const int64_t in_plane = int64_t(s.h) * s.w;
    const int64_t out_plane = int64_t(oh) * ow;
    DenseTensor gw(spec.c_out, cpg, spec.k_h, spec.k_w);

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < spec.c_out; ++oc) {
        const int g = oc / oc_per_group;
        for (int icl = 0; icl < cpg; ++icl) {
            const int ic = g * cpg + icl;
            for (int ky = 0; ky < spec.k_h; ++ky) {
                for (int kx = 0; kx < spec.k_w; ++kx) {
                    float acc = 0.0f;
                    for (int n = 0; n < s.n; ++n) {
                        const float* go =
                            grad_out.data.data() + (int64_t(n) * spec.c_out + oc) * out_plane;
                        const float* xc = x.data.data() + (int64_t(n) * s.c + ic) * in_plane;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * spec.stride - spec.pad + ky;
                            const float* grow = go + int64_t(oy) * ow;
                            if (iy < 0 || iy >= s.h) {
                                if (pad_value != 0.0f)
                                    for (int ox = 0; ox < ow; ++ox)
                                        acc += pad_value * grow[ox];
                                continue;
                            }
                            const float* xrow = xc + int64_t(iy) * s.w;
                            if (spec.stride == 1) {
                                const int ix0 = kx - spec.pad;
                                const int lo = std::max(0, -ix0);
                                const int hi = std::min(ow, s.w - ix0);
                                if (pad_value != 0.0f) {
                                    for (int ox = 0; ox < lo; ++ox) acc += pad_value * grow[ox];
                                    for (int ox = hi; ox < ow; ++ox) acc += pad_value * grow[ox];
                                }
                                for (int ox = lo; ox < hi; ++ox)
                                    acc += grow[ox] * xrow[ix0 + ox];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix = ox * spec.stride - spec.pad + kx;
                                    const bool in = ix >= 0 && ix < s.w;
                                    acc += grow[ox] * (in ? xrow[ix] : pad_value);
                                }
                            }
                        }
                    }
                    gw.at(oc, icl, ky, kx) = acc;
                }
            }
        }
    }
    return gw;
}

DenseTensor clip_pm1(const DenseTensor& x) {
    DenseTensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = std::clamp(x.data[i], -1.0f, 1.0f);
    return out;
}

DenseTensor sign_dense(const DenseTensor& x) {
    DenseTensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] >= 0.0f ? 1.0f : -1.0f;
    return out;
}

}  // namespace elbnn
