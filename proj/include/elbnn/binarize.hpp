#pragma once

#include "elbnn/conv_spec.hpp"
#include "elbnn/tensor.hpp"

namespace elbnn {

// Per-filter scaling factor: alpha[f] = mean |w_f| over the filter's weights.
// Equals 1.0 when every weight is +/-1, 0.0 for an all-zero filter.
struct ScaleAlpha {
    std::vector<float> values;
};

// Spatial scaling matrix for the input activation, one (h_out, w_out) map per
// batch item.
struct ScaleK {
    int n = 0, h = 0, w = 0;
    std::vector<float> values;

    float at(int n_, int y, int x) const {
        return values[size_t((int64_t(n_) * h + y) * w + x)];
    }
    float& at(int n_, int y, int x) { return values[size_t((int64_t(n_) * h + y) * w + x)]; }
};

// Sign activation: +1 for x >= 0, -1 otherwise, stored packed.
// The caller keeps x for the backward pass.
BitTensor sign_forward(const DenseTensor& x);

// Straight-through estimator: passes grad_out where -1 <= x_saved <= 1
// (boundaries inclusive), zero elsewhere.
DenseTensor ste_backward(const DenseTensor& grad_out, const DenseTensor& x_saved);

// w has shape (c_out, c_in_per_group, k_h, k_w); n = c_in_per_group*k_h*k_w.
ScaleAlpha weight_alpha(const DenseTensor& w);

// K[n,y,x] = mean of |a| over output site (y,x)'s receptive field (all input
// channels and the spatial window). Padded sites contribute |0|.
ScaleK activation_scale_k(const DenseTensor& a, const ConvSpec& spec);

}  // namespace elbnn
