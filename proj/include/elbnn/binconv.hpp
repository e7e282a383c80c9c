#pragma once

#include "elbnn/binarize.hpp"
#include "elbnn/conv_spec.hpp"
#include "elbnn/tensor.hpp"

namespace elbnn {

// Which transform stands in for binarization. `clip` turns the layer into a
// differentiable surrogate sharing the STE backward, used by gradient checks.
enum class Binarizer { sign, clip };

// XNOR-popcount correlation of packed +/-1 tensors. Output values are exact
// integers stored as floats. Spatial padding binarizes to +1 (Sign(0) = +1).
// a is (n, c_in, h, w); w is (c_out, c_in_per_group, k_h, k_w), both packed
// along their channel axis.
DenseTensor binconv2d(const BitTensor& a, const BitTensor& w, const ConvSpec& spec);

// out[n,f,y,x] = y * K[n,y,x] * alpha[f], with K treated as all-ones under
// alpha_only and both as ones under none. k may be null unless alpha_and_k.
DenseTensor apply_scale(const DenseTensor& y, const ScaleK* k, const ScaleAlpha& alpha,
                        const ConvSpec& spec);

struct ConvGrads {
    DenseTensor input;
    DenseTensor weights;
};

// Backward of apply_scale(binconv2d(...)): K and alpha are constants, so
// grad_scaled = grad_out * K * alpha is pushed through the conv adjoints on
// the binarized (or clipped) tensors and gated by STE on the saved latents.
// k/alpha must be the factors used in the forward (null when unused).
ConvGrads binconv_backward(const DenseTensor& grad_out, const DenseTensor& saved_input,
                           const DenseTensor& saved_weights, const ConvSpec& spec,
                           const ScaleK* k, const ScaleAlpha* alpha,
                           Binarizer binarizer = Binarizer::sign);

// Forward of the clip surrogate (real conv of clamped tensors, zero pad).
DenseTensor binconv2d_surrogate(const DenseTensor& x, const DenseTensor& w, const ConvSpec& spec);

}  // namespace elbnn
