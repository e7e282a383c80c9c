#pragma once

#include <stdexcept>
#include <string>

namespace elbnn {

enum class ScaleMode { none, alpha_only, alpha_and_k };

// Hyperparameters of one conv layer. groups is 1 or c_in (depthwise).
struct ConvSpec {
    int c_in = 0;
    int c_out = 0;
    int k_h = 1;
    int k_w = 1;
    int stride = 1;
    int pad = 0;
    int groups = 1;
    ScaleMode scale_mode = ScaleMode::alpha_only;

    int out_h(int in_h) const { return (in_h + 2 * pad - k_h) / stride + 1; }
    int out_w(int in_w) const { return (in_w + 2 * pad - k_w) / stride + 1; }
    int c_in_per_group() const { return c_in / groups; }
    bool depthwise() const { return groups > 1; }

    void validate() const {
        if (c_in <= 0 || c_out <= 0 || k_h <= 0 || k_w <= 0 || stride <= 0 || pad < 0 ||
            groups <= 0)
            throw std::invalid_argument("ConvSpec: non-positive dimension");
        if (c_in % groups != 0 || c_out % groups != 0)
            throw std::invalid_argument("ConvSpec: channels not divisible by groups");
        if (groups != 1 && !(groups == c_in && groups == c_out))
            throw std::invalid_argument("ConvSpec: only groups=1 or depthwise supported");
    }
};

}  // namespace elbnn
