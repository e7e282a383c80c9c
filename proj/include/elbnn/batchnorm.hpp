#pragma once

#include "elbnn/tensor.hpp"

namespace elbnn {

struct BNState {
    std::vector<float> scale, shift, running_mean, running_var;
    float eps = 1e-5f;
    float momentum = 0.1f;

    BNState() = default;
    explicit BNState(int channels)
        : scale(size_t(channels), 1.0f),
          shift(size_t(channels), 0.0f),
          running_mean(size_t(channels), 0.0f),
          running_var(size_t(channels), 1.0f) {}

    int channels() const { return int(scale.size()); }
};

struct BNCache {
    DenseTensor x_hat;
    std::vector<float> inv_std;  // of the statistics actually used
    bool training = false;
};

// Training mode normalizes with biased batch statistics and folds them into
// the running stats; eval mode uses the running stats. Population (biased)
// variance is used throughout so frozen running stats reproduce train-mode
// output exactly.
DenseTensor batchnorm_forward(const DenseTensor& x, BNState& state, bool training,
                              BNCache* cache = nullptr);

struct BNGrads {
    DenseTensor x;
    std::vector<float> scale, shift;
};

BNGrads batchnorm_backward(const DenseTensor& grad_out, const BNState& state,
                           const BNCache& cache);

}  // namespace elbnn
