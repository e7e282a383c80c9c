#pragma once

#include <vector>

#include "elbnn/graph.hpp"

namespace elbnn {

struct AdamState {
    int64_t step = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Standard bias-corrected Adam over every trainable slot (bn_stat skipped).
// Afterwards binary-layer latents are clamped to [-1, 1] and EL gamma
// magnitudes to >= 1e-3.
void adam_step(const std::vector<Param*>& params, AdamState& state, float lr);

}  // namespace elbnn
