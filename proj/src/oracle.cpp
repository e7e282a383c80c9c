#include "elbnn/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace elbnn::oracle {

DenseTensor ref_conv2d(const DenseTensor& a, const DenseTensor& w, const ConvSpec& spec) {
    spec.validate();
    const Shape4 s = a.shape;
    if (s.c != spec.c_in || w.shape.n != spec.c_out || w.shape.c != spec.c_in_per_group() ||
        w.shape.h != spec.k_h || w.shape.w != spec.k_w)
        throw std::invalid_argument("ref_conv2d: shape mismatch");
    const int oh = spec.out_h(s.h);
    const int ow = spec.out_w(s.w);
    const int cpg = spec.c_in_per_group();
    const int oc_per_group = spec.c_out / spec.groups;
    DenseTensor out(s.n, spec.c_out, oh, ow);
    for (int n = 0; n < s.n; ++n)
        for (int oc = 0; oc < spec.c_out; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    float acc = 0.0f;
                    for (int icl = 0; icl < cpg; ++icl)
                        for (int ky = 0; ky < spec.k_h; ++ky)
                            for (int kx = 0; kx < spec.k_w; ++kx) {
                                const int iy = oy * spec.stride - spec.pad + ky;
                                const int ix = ox * spec.stride - spec.pad + kx;
                                if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
                                const int ic = (oc / oc_per_group) * cpg + icl;
                                acc += a.at(n, ic, iy, ix) * w.at(oc, icl, ky, kx);
                            }
                    out.at(n, oc, oy, ox) = acc;
                }
    return out;
}

std::vector<double> finite_diff(const std::function<double()>& loss_fn,
                                const std::vector<float*>& params, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite_diff: step must be positive");
    std::vector<double> grad(params.size(), 0.0);
    for (size_t i = 0; i < params.size(); ++i) {
        float* p = params[i];
        const float saved = *p;
        *p = float(saved + step);
        const double up = loss_fn();
        *p = float(saved - step);
        const double down = loss_fn();
        *p = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw std::runtime_error("finite_diff: non-finite loss");
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

std::vector<std::vector<float>> sei_matrix(const ELConfig& cfg) {
    const int ci = cfg.c_in;
    const int co = cfg.c_out;
    const float inv_gamma = 1.0f / cfg.gamma;
    std::vector<std::vector<float>> m;
    if (ci == co) {
        m.assign(size_t(co), std::vector<float>(size_t(ci), 0.0f));
        for (int j = 0; j < co; ++j) m[size_t(j)][size_t(j)] = inv_gamma;
    } else if (ci > co) {
        const int g = (ci + co - 1) / co;
        const int padded = g * co;
        m.assign(size_t(co), std::vector<float>(size_t(padded), 0.0f));
        for (int j = 0; j < co; ++j) {
            if (cfg.grouping == SqueezeGrouping::gamma_consistent) {
                for (int k = 0; k < g; ++k) m[size_t(j)][size_t(k * co + j)] = inv_gamma;
            } else {
                for (int t = 0; t < g; ++t) m[size_t(j)][size_t(j * g + t)] = inv_gamma;
            }
        }
    } else {
        m.assign(size_t(co), std::vector<float>(size_t(ci), 0.0f));
        for (int j = 0; j < co; ++j) m[size_t(j)][size_t(j % ci)] = inv_gamma;
    }
    return m;
}

DenseTensor ref_sei(const DenseTensor& x, const ELConfig& cfg) {
    if (x.shape.c != cfg.c_in) throw std::invalid_argument("ref_sei: channel mismatch");

    // Independent 2x2 stride-2 max pool, floor mode.
    DenseTensor p = x;
    if (cfg.downsample) {
        const Shape4 s = x.shape;
        DenseTensor pooled(s.n, s.c, s.h / 2, s.w / 2);
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y + 1 < s.h; y += 2)
                    for (int xx = 0; xx + 1 < s.w; xx += 2) {
                        float best = x.at(n, c, y, xx);
                        for (int t = 1; t < 4; ++t)
                            best = std::max(best, x.at(n, c, y + t / 2, xx + t % 2));
                        if (y / 2 < pooled.shape.h && xx / 2 < pooled.shape.w)
                            pooled.at(n, c, y / 2, xx / 2) = best;
                    }
        p = pooled;
    }

    const auto m = sei_matrix(cfg);
    const int padded = int(m.empty() ? 0 : m.front().size());
    const Shape4 ps = p.shape;
    DenseTensor out(ps.n, cfg.c_out, ps.h, ps.w);
    for (int n = 0; n < ps.n; ++n)
        for (int y = 0; y < ps.h; ++y)
            for (int xx = 0; xx < ps.w; ++xx)
                for (int j = 0; j < cfg.c_out; ++j) {
                    double acc = 0.0;
                    for (int c = 0; c < padded; ++c) {
                        const float xv = c < ps.c ? p.at(n, c, y, xx) : 0.0f;
                        acc += double(m[size_t(j)][size_t(c)]) * double(xv);
                    }
                    out.at(n, j, y, xx) = float(acc);
                }
    return out;
}

}  // namespace elbnn::oracle
