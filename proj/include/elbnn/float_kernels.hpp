#pragma once

#include "elbnn/conv_spec.hpp"
#include "elbnn/tensor.hpp"

namespace elbnn {

// Direct correlation; out-of-bounds input sites read pad_value. Used by the
// full-precision layers and by the conv adjoints in the binary backward.
DenseTensor conv2d_forward(const DenseTensor& x, const DenseTensor& w, const ConvSpec& spec,
                           float pad_value = 0.0f);

// Adjoint w.r.t. the (unpadded) input; gradients landing on pad sites drop.
DenseTensor conv2d_grad_input(const DenseTensor& grad_out, const DenseTensor& w,
                              const ConvSpec& spec, Shape4 input_shape);

// Adjoint w.r.t. the weights. x is the tensor the forward actually convolved
// (already transformed, if any); pad sites contribute pad_value.
DenseTensor conv2d_grad_weights(const DenseTensor& x, const DenseTensor& grad_out,
                                const ConvSpec& spec, float pad_value = 0.0f);

// clamp(x, -1, 1), the differentiable stand-in for Sign in surrogate mode.
DenseTensor clip_pm1(const DenseTensor& x);

// Elementwise Sign as floats (+1 for x >= 0).
DenseTensor sign_dense(const DenseTensor& x);

}  // namespace elbnn
