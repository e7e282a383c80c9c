#pragma once

#include "elbnn/batchnorm.hpp"
#include "elbnn/binconv.hpp"
#include "elbnn/tensor.hpp"

namespace elbnn {

enum class SeiMode { identity, squeeze, expand };

// How Squeeze partitions channels. gamma_consistent forms ceil(c_in/c_out)
// groups of c_out channels each and sums them elementwise, which makes the
// group count equal the gamma initialization. literal_sentence forms c_out
// groups of ceil(c_in/c_out) channels and collapses each group to one output
// channel. See README for why both exist.
enum class SqueezeGrouping { gamma_consistent, literal_sentence };

struct ELConfig {
    int c_in = 0;
    int c_out = 0;
    bool downsample = false;  // 2x2 max-pool stride 2 before the link
    float gamma = 1.0f;
    bool gamma_learnable = true;
    SqueezeGrouping grouping = SqueezeGrouping::gamma_consistent;

    SeiMode mode() const {
        if (c_in == c_out) return SeiMode::identity;
        return c_in > c_out ? SeiMode::squeeze : SeiMode::expand;
    }
};

// ceil(c_in/c_out) when c_in >= c_out, else ceil(c_out/c_in).
float gamma_init(int c_in, int c_out);

// Channel group-sum c_in -> c_out (c_in > c_out), zero-padded at the tail,
// divided by gamma.
DenseTensor squeeze(const DenseTensor& x, int c_out, float gamma,
                    SqueezeGrouping grouping = SqueezeGrouping::gamma_consistent);

// Channel tile-and-truncate c_in -> c_out (c_in < c_out), divided by gamma.
DenseTensor expand(const DenseTensor& x, int c_out, float gamma);

// 2x2 stride-2 max pool, floor mode (odd trailing row/column dropped).
DenseTensor max_pool2x2(const DenseTensor& x);

// Optional pool, then Squeeze/Expand/Identity by channel ratio. Identity also
// divides by gamma (initialized to 1 there).
DenseTensor sei_forward(const DenseTensor& x, const ELConfig& cfg);

struct SeiGrads {
    DenseTensor x;
    float gamma = 0.0f;
};

// Exact adjoints of the SEI maps. grad_gamma = -sum(grad_out * s) / gamma^2
// where s is the pre-division SEI output; zero when gamma is frozen. Max-pool
// routes gradient to the first maximal site in row-major order.
SeiGrads sei_backward(const DenseTensor& grad_out, const ELConfig& cfg,
                      const DenseTensor& saved_input);

// EL(x, w, gamma) = BN(apply_scale(binconv2d(Sign(x), Sign(w)))) + SEI(x, gamma).
// Addend shapes must match exactly; no broadcasting.
DenseTensor el_forward(const DenseTensor& x, const DenseTensor& weights, BNState& bn,
                       const ELConfig& cfg, const ConvSpec& spec, bool training);

}  // namespace elbnn
