#include "elbnn/verify.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "elbnn/float_kernels.hpp"
#include "elbnn/oracle.hpp"

namespace elbnn {

namespace {

struct Section {
    std::string name;
    int cases = 0;
    double max_abs = 0.0;
    bool pass = true;

    void record(double err, double tol) {
        ++cases;
        max_abs = std::max(max_abs, err);
        if (!(err <= tol)) pass = false;
    }
    void emit(std::ostream& out) const {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-28s cases=%-5d max_abs=%-12.3e %s\n", name.c_str(),
                      cases, max_abs, pass ? "PASS" : "FAIL");
        out << buf;
    }
};

DenseTensor random_pm1(Shape4 s, std::mt19937& rng) {
    DenseTensor t(s);
    std::uniform_int_distribution<int> bit(0, 1);
    for (auto& v : t.data) v = bit(rng) ? 1.0f : -1.0f;
    return t;
}

DenseTensor random_real(Shape4 s, std::mt19937& rng, float lo = -1.0f, float hi = 1.0f) {
    DenseTensor t(s);
    std::uniform_real_distribution<float> dist(lo, hi);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

DenseTensor pad_plus_one(const DenseTensor& x, int p) {
    const Shape4 s = x.shape;
    DenseTensor out(s.n, s.c, s.h + 2 * p, s.w + 2 * p);
    for (auto& v : out.data) v = 1.0f;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int xx = 0; xx < s.w; ++xx) out.at(n, c, y + p, xx + p) = x.at(n, c, y, xx);
    return out;
}

Section verify_binconv(const VerifyKernels& k) {
    Section sec{"binconv_vs_ref_conv2d"};
    std::mt19937 rng(1234);
    const int kernel_sizes[] = {1, 3};
    const int strides[] = {1, 2};
    const int pads[] = {0, 1};
    const int c_ins[] = {3, 8, 64, 100};
    const int c_outs[] = {4, 9};

    auto run_case = [&](const ConvSpec& spec, int hw) {
        const DenseTensor x = random_pm1({2, spec.c_in, hw, hw}, rng);
        const DenseTensor w = random_pm1({spec.c_out, spec.c_in_per_group(), spec.k_h, spec.k_w},
                                         rng);
        const DenseTensor got = k.binconv(pack_bits(x), pack_bits(w), spec);
        ConvSpec unpadded = spec;
        unpadded.pad = 0;
        const DenseTensor ref = oracle::ref_conv2d(pad_plus_one(x, spec.pad), w, unpadded);
        double err = 0.0;
        for (size_t i = 0; i < got.data.size(); ++i)
            err = std::max(err, double(std::fabs(got.data[i] - ref.data[i])));
        sec.record(err, 0.0);  // integer exactness
    };

    for (int ks : kernel_sizes)
        for (int stride : strides)
            for (int pad : pads)
                for (int c_in : c_ins) {
                    for (int c_out : c_outs)
                        for (int rep = 0; rep < 3; ++rep)
                            run_case({.c_in = c_in, .c_out = c_out, .k_h = ks, .k_w = ks,
                                      .stride = stride, .pad = pad,
                                      .scale_mode = ScaleMode::none},
                                     5 + rep * 2 + ks);
                    // depthwise variant
                    if (ks == 3)
                        for (int rep = 0; rep < 3; ++rep)
                            run_case({.c_in = c_in, .c_out = c_in, .k_h = 3, .k_w = 3,
                                      .stride = stride, .pad = pad, .groups = c_in,
                                      .scale_mode = ScaleMode::none},
                                     6 + rep * 2);
                }
    return sec;
}

Section verify_sei(const VerifyKernels& k) {
    Section sec{"sei_vs_ref_sei"};
    std::mt19937 rng(55);
    for (float gamma : {0.5f, 1.0f, 3.0f})
        for (int ci = 1; ci <= 16; ++ci)
            for (int co = 1; co <= 16; ++co) {
                ELConfig cfg{.c_in = ci, .c_out = co, .gamma = gamma};
                const DenseTensor x = random_real({1, ci, 3, 2}, rng);
                const DenseTensor got = k.sei(x, cfg);
                const DenseTensor ref = oracle::ref_sei(x, cfg);
                double err = 0.0;
                for (size_t i = 0; i < got.data.size(); ++i)
                    err = std::max(err, double(std::fabs(got.data[i] - ref.data[i])));
                sec.record(err, 1e-6);
            }
    return sec;
}

Section verify_gamma(const VerifyKernels& k) {
    Section sec{"gamma_init_grid"};
    for (int ci = 1; ci <= 10; ++ci)
        for (int co = 1; co <= 10; ++co) {
            const int hi = std::max(ci, co), lo = std::min(ci, co);
            const float expect = float((hi + lo - 1) / lo);
            sec.record(std::fabs(double(k.gamma(ci, co)) - double(expect)), 0.0);
        }
    return sec;
}

Section verify_ste(const VerifyKernels& k) {
    Section sec{"ste_piecewise"};
    const float xs[] = {-1.5f, -1.0f, 0.0f, 1.0f, 1.5f};
    const float expect[] = {0.0f, 2.0f, 2.0f, 2.0f, 0.0f};
    for (int i = 0; i < 5; ++i) {
        DenseTensor x(1, 1, 1, 1), g(1, 1, 1, 1);
        x.at(0, 0, 0, 0) = xs[i];
        g.at(0, 0, 0, 0) = 2.0f;
        const DenseTensor out = k.ste(g, x);
        sec.record(std::fabs(double(out.at(0, 0, 0, 0)) - double(expect[i])), 0.0);
    }
    // finite differences of clip away from the boundaries
    std::mt19937 rng(99);
    std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
    const double h = 1e-3;
    auto clip = [](double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); };
    for (int i = 0; i < 200; ++i) {
        const float xv = dist(rng);
        if (std::fabs(std::fabs(xv) - 1.0f) < 3 * h) continue;
        DenseTensor x(1, 1, 1, 1), g(1, 1, 1, 1);
        x.at(0, 0, 0, 0) = xv;
        g.at(0, 0, 0, 0) = 1.0f;
        const double numeric = (clip(xv + h) - clip(xv - h)) / (2 * h);
        sec.record(std::fabs(double(k.ste(g, x).at(0, 0, 0, 0)) - numeric), 1e-4);
    }
    return sec;
}

Section verify_pack_roundtrip() {
    Section sec{"pack_unpack_roundtrip"};
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
    for (int trial = 0; trial < 10; ++trial) {
        DenseTensor t(1, 60 + trial * 9, 3, 3);
        for (auto& v : t.data) v = dist(rng);
        for (size_t i = 0; i < t.data.size(); i += 11) t.data[i] = 0.0f;
        const DenseTensor rt = unpack_bits(pack_bits(t));
        double err = 0.0;
        for (size_t i = 0; i < t.data.size(); ++i) {
            const float expect = t.data[i] >= 0.0f ? 1.0f : -1.0f;
            err = std::max(err, double(std::fabs(rt.data[i] - expect)));
        }
        sec.record(err, 0.0);
    }
    return sec;
}

}  // namespace

VerifyKernels VerifyKernels::production() {
    VerifyKernels k;
    k.binconv = [](const BitTensor& a, const BitTensor& w, const ConvSpec& s) {
        return binconv2d(a, w, s);
    };
    k.sei = [](const DenseTensor& x, const ELConfig& cfg) { return sei_forward(x, cfg); };
    k.gamma = [](int ci, int co) { return gamma_init(ci, co); };
    k.ste = [](const DenseTensor& g, const DenseTensor& x) { return ste_backward(g, x); };
    return k;
}

VerifyKernels VerifyKernels::with_fault(const std::string& name) {
    VerifyKernels k = production();
    if (name == "binconv_off_by_one") {
        k.binconv = [](const BitTensor& a, const BitTensor& w, const ConvSpec& s) {
            DenseTensor out = binconv2d(a, w, s);
            out.data[0] += 1.0f;
            return out;
        };
    } else if (name == "gamma_floor") {
        k.gamma = [](int ci, int co) {
            return ci >= co ? float(ci / co) : float(co / ci);
        };
    } else if (name == "ste_open_boundary") {
        k.ste = [](const DenseTensor& g, const DenseTensor& x) {
            DenseTensor out(g.shape);
            for (size_t i = 0; i < out.data.size(); ++i)
                out.data[i] = (x.data[i] > -1.0f && x.data[i] < 1.0f) ? g.data[i] : 0.0f;
            return out;
        };
    } else {
        throw std::invalid_argument("unknown fault fixture: " + name);
    }
    return k;
}

bool run_verification(std::ostream& out, const VerifyKernels& kernels) {
    bool all = true;
    for (const Section& sec :
         {verify_binconv(kernels), verify_sei(kernels), verify_gamma(kernels),
          verify_ste(kernels), verify_pack_roundtrip()}) {
        sec.emit(out);
        all = all && sec.pass;
    }
    out << (all ? "verification OK: zero mismatches\n" : "verification FAILED\n");
    return all;
}

}  // namespace elbnn
