#include "elbnn/builders.hpp"

#include <memory>
#include <stdexcept>

namespace elbnn {

namespace {

ScaleMode pick_scale(const Toggles& t, bool k_scaled) {
    if (!t.alpha) return ScaleMode::none;
    return k_scaled ? ScaleMode::alpha_and_k : ScaleMode::alpha_only;
}

std::unique_ptr<BinConvELLayer> make_bin_conv(const std::string& name, ConvSpec spec,
                                              bool link_on, bool pool, const Toggles& t) {
    ELConfig el;
    el.c_in = spec.c_in;
    el.c_out = spec.c_out;
    el.downsample = pool;
    el.gamma = gamma_init(spec.c_in, spec.c_out);
    el.gamma_learnable = t.gamma_learnable;
    el.grouping = t.grouping;
    return std::make_unique<BinConvELLayer>(name, spec, el, link_on);
}

void append_projection_shortcut(ResidualJoinLayer& join, const std::string& prefix, int c_in,
                                int c_out, bool downsample, const Toggles& t, bool binary_proj) {
    if (downsample)
        join.shortcut.push_back(std::make_unique<AvgPoolLayer>(prefix + ".ds.pool", 2, 2));
    ConvSpec proj{.c_in = c_in, .c_out = c_out, .k_h = 1, .k_w = 1,
                  .scale_mode = pick_scale(t, false)};
    if (binary_proj) {
        join.shortcut.push_back(
            make_bin_conv(prefix + ".ds.conv", proj, /*link*/ false, false, t));
    } else {
        proj.scale_mode = ScaleMode::alpha_only;  // unused by FP conv
        join.shortcut.push_back(std::make_unique<FPConvLayer>(prefix + ".ds.conv", proj));
        join.shortcut.push_back(std::make_unique<BatchNormLayer>(prefix + ".ds.bn", c_out));
    }
}

void append_stem(LayerGraph& g, int c_in, int c_out, bool big_input) {
    ConvSpec stem = big_input
                        ? ConvSpec{.c_in = c_in, .c_out = c_out, .k_h = 7, .k_w = 7,
                                   .stride = 2, .pad = 3}
                        : ConvSpec{.c_in = c_in, .c_out = c_out, .k_h = 3, .k_w = 3,
                                   .stride = 1, .pad = 1};
    g.layers.push_back(std::make_unique<FPConvLayer>("stem.conv", stem));
    g.layers.push_back(std::make_unique<BatchNormLayer>("stem.bn", c_out));
    if (big_input) g.layers.push_back(std::make_unique<MaxPoolLayer>("stem.pool", 3, 2, 1));
}

void append_classifier(LayerGraph& g, int c, int classes) {
    g.layers.push_back(std::make_unique<GlobalAvgPoolLayer>("gap"));
    g.layers.push_back(std::make_unique<LinearLayer>("fc", c, classes));
}

}  // namespace

void append_el_bottleneck(LayerGraph& g, const std::string& prefix, int c_in, int c_mid,
                          int c_out, bool downsample, const Toggles& t,
                          bool binary_downsample_proj) {
    if (t.residual) g.layers.push_back(std::make_unique<ResidualBeginLayer>(prefix + ".res"));

    ConvSpec reduce{.c_in = c_in, .c_out = c_mid, .k_h = 1, .k_w = 1,
                    .stride = downsample ? 2 : 1, .pad = 0,
                    .scale_mode = pick_scale(t, t.k_s)};
    g.layers.push_back(make_bin_conv(prefix + ".conv1", reduce, t.el_s, downsample, t));

    ConvSpec spatial{.c_in = c_mid, .c_out = c_mid, .k_h = 3, .k_w = 3, .stride = 1, .pad = 1,
                     .scale_mode = pick_scale(t, false)};
    g.layers.push_back(make_bin_conv(prefix + ".conv2", spatial, t.el_i, false, t));

    ConvSpec expand_{.c_in = c_mid, .c_out = c_out, .k_h = 1, .k_w = 1,
                     .scale_mode = pick_scale(t, false)};
    g.layers.push_back(make_bin_conv(prefix + ".conv3", expand_, t.el_e, false, t));

    if (t.residual) {
        auto join = std::make_unique<ResidualJoinLayer>(prefix + ".join");
        if (downsample || c_in != c_out)
            append_projection_shortcut(*join, prefix, c_in, c_out, downsample, t,
                                       binary_downsample_proj);
        g.layers.push_back(std::move(join));
    }
}

void append_basic_block(LayerGraph& g, const std::string& prefix, int channels,
                        bool downsample, const Toggles& t) {
    if (t.residual) g.layers.push_back(std::make_unique<ResidualBeginLayer>(prefix + ".res"));

    ConvSpec conv1{.c_in = channels, .c_out = channels, .k_h = 3, .k_w = 3,
                   .stride = downsample ? 2 : 1, .pad = 1, .scale_mode = pick_scale(t, false)};
    g.layers.push_back(make_bin_conv(prefix + ".conv1", conv1, t.el_i, downsample, t));

    ConvSpec conv2{.c_in = channels, .c_out = channels, .k_h = 3, .k_w = 3, .stride = 1,
                   .pad = 1, .scale_mode = pick_scale(t, false)};
    g.layers.push_back(make_bin_conv(prefix + ".conv2", conv2, t.el_i, false, t));

    if (t.residual) {
        auto join = std::make_unique<ResidualJoinLayer>(prefix + ".join");
        if (downsample)
            append_projection_shortcut(*join, prefix, channels, channels, true, t, false);
        g.layers.push_back(std::move(join));
    }
}

void append_el_mobilenet_block(LayerGraph& g, const std::string& prefix, int c_in, int c_out,
                               int stride, const Toggles& t) {
    if (stride != 1 && stride != 2)
        throw std::invalid_argument(prefix + ": mobilenet stride must be 1 or 2");

    ConvSpec dw{.c_in = c_in, .c_out = c_in, .k_h = 3, .k_w = 3, .stride = stride, .pad = 1,
                .groups = c_in, .scale_mode = pick_scale(t, false)};
    g.layers.push_back(make_bin_conv(prefix + ".dw", dw, t.el_i, stride == 2, t));
    g.layers.push_back(std::make_unique<ReLULayer>(prefix + ".relu1"));

    const bool k_scaled = t.mobilenet_k_s && c_out < c_in;
    ConvSpec pw{.c_in = c_in, .c_out = c_out, .k_h = 1, .k_w = 1,
                .scale_mode = pick_scale(t, k_scaled)};
    const bool link_on = c_in == c_out ? t.el_i : (c_in > c_out ? t.el_s : t.el_e);
    g.layers.push_back(make_bin_conv(prefix + ".pw", pw, link_on, false, t));
    g.layers.push_back(std::make_unique<ReLULayer>(prefix + ".relu2"));
}

LayerGraph build_network(const ArchSpec& arch) {
    LayerGraph g;
    g.arch_name = arch.family;
    g.input_channels = arch.in_channels;
    g.input_hw = arch.input_hw;
    g.num_classes = arch.num_classes;
    const Toggles& t = arch.toggles;

    if (arch.family == "el_bottleneck_tiny") {
        append_stem(g, arch.in_channels, 16, false);
        append_el_bottleneck(g, "b1", 16, 8, 32, false, t);
        append_el_bottleneck(g, "b2", 32, 8, 32, false, t);
        append_el_bottleneck(g, "b3", 32, 16, 64, true, t);
        append_el_bottleneck(g, "b4", 64, 16, 64, false, t);
        append_classifier(g, 64, arch.num_classes);
    } else if (arch.family == "basic_block_tiny") {
        append_stem(g, arch.in_channels, 32, false);
        append_basic_block(g, "b1", 32, false, t);
        append_basic_block(g, "b2", 32, false, t);
        append_basic_block(g, "b3", 32, true, t);
        append_basic_block(g, "b4", 32, false, t);
        append_classifier(g, 32, arch.num_classes);
    } else if (arch.family == "el_mobilenet_tiny") {
        append_stem(g, arch.in_channels, 16, false);
        append_el_mobilenet_block(g, "m1", 16, 32, 1, t);
        append_el_mobilenet_block(g, "m2", 32, 64, 2, t);
        append_el_mobilenet_block(g, "m3", 64, 64, 1, t);
        append_el_mobilenet_block(g, "m4", 64, 128, 2, t);
        append_classifier(g, 128, arch.num_classes);
    } else if (arch.family == "el_resnet50" || arch.family == "bi_resnet50") {
        const bool binary_proj = arch.family == "bi_resnet50";
        Toggles bt = t;
        if (binary_proj) bt.el_s = bt.el_i = bt.el_e = false;
        append_stem(g, arch.in_channels, 64, true);
        const int depths[4] = {3, 4, 6, 3};
        const int mids[4] = {64, 128, 256, 512};
        int c_in = 64;
        for (int s = 0; s < 4; ++s) {
            const int c_out = mids[s] * 4;
            for (int b = 0; b < depths[s]; ++b) {
                const std::string prefix = "s" + std::to_string(s + 1) + "b" + std::to_string(b + 1);
                const bool ds = s > 0 && b == 0;
                append_el_bottleneck(g, prefix, c_in, mids[s], c_out, ds, bt, binary_proj);
                c_in = c_out;
            }
        }
        append_classifier(g, 2048, arch.num_classes);
    } else {
        throw std::invalid_argument("unknown arch family: " + arch.family);
    }

    g.trace_shapes(1);  // fail fast on an inconsistent build
    return g;
}

}  // namespace elbnn
