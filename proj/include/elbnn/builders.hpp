#pragma once

#include <string>

#include "elbnn/graph.hpp"

namespace elbnn {

// Ablation toggles. el_s/el_i/el_e enable the EL link on the first
// (channel-reduction), middle (spatial) and last (channel-expansion) conv of
// each bottleneck block; for other families they attach by the link's role
// (see the block builders). residual keeps the block-level shortcut, k_s
// applies activation scaling to the first conv of each bottleneck block,
// alpha applies the per-filter weight scaling everywhere.
struct Toggles {
    bool el_s = true;
    bool el_i = true;
    bool el_e = true;
    bool residual = true;
    bool gamma_learnable = true;
    bool k_s = true;
    bool alpha = true;
    bool mobilenet_k_s = false;
    SqueezeGrouping grouping = SqueezeGrouping::gamma_consistent;
};

struct ArchSpec {
    // el_bottleneck_tiny | basic_block_tiny | el_mobilenet_tiny |
    // el_resnet50 | bi_resnet50
    std::string family = "el_bottleneck_tiny";
    int input_hw = 32;
    int in_channels = 3;
    int num_classes = 10;
    Toggles toggles;
};

LayerGraph build_network(const ArchSpec& arch);

// Block builders append onto an existing graph. binary_downsample_proj selects
// a binarized projection shortcut (the Bi-Real-style baseline) instead of the
// full-precision avg-pool + 1x1.
void append_el_bottleneck(LayerGraph& g, const std::string& prefix, int c_in, int c_mid,
                          int c_out, bool downsample, const Toggles& t,
                          bool binary_downsample_proj = false);
void append_basic_block(LayerGraph& g, const std::string& prefix, int channels, bool downsample,
                        const Toggles& t);
void append_el_mobilenet_block(LayerGraph& g, const std::string& prefix, int c_in, int c_out,
                               int stride, const Toggles& t);

}  // namespace elbnn
