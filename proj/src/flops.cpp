#include "elbnn/flops.hpp"

#include <cstdio>

namespace elbnn {

std::string FlopReport::conventions() {
    return
        "# conventions: full-precision MAC = 2 ops (mul+add); binary-conv MAC = 2 ops / 64;\n"
        "# EL link = 1 fused scale-add op per linked output element (Squeeze/Expand/Identity\n"
        "# are address mapping, no arithmetic); BN, pooling and activations uncounted.\n";
}

FlopReport flops_count(const LayerGraph& g) {
    FlopReport report;
    Shape4 cur{1, g.input_channels, g.input_hw, g.input_hw};
    std::vector<Shape4> stack;
    for (const auto& layer : g.layers) {
        FlopRow row;
        row.layer = layer->name();
        if (layer->kind() == LayerKind::residual_begin) {
            stack.push_back(cur);
            continue;
        }
        if (layer->kind() == LayerKind::residual_join) {
            const auto* join = static_cast<const ResidualJoinLayer*>(layer.get());
            join->add_cost_side(stack.back(), row);
            stack.pop_back();
        } else {
            layer->add_cost(cur, row);
            cur = layer->out_shape(cur);
        }
        if (row.real_ops != 0.0 || row.binary_ops != 0.0 || row.el_scale_add != 0.0)
            report.rows.push_back(row);
        report.real_total += row.real_ops;
        report.binary_total += row.binary_ops;
        report.el_total += row.el_scale_add;
    }
    return report;
}

std::string format_flop_report(const FlopReport& r) {
    std::string out = FlopReport::conventions();
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-24s %14s %14s %12s\n", "layer", "real_ops", "binary_ops",
                  "el_ops");
    out += buf;
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof(buf), "%-24s %14.0f %14.1f %12.0f\n", row.layer.c_str(),
                      row.real_ops, row.binary_ops, row.el_scale_add);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "total: real %.0f + binary %.1f + el %.0f = %.1f ops (%.2f M)\n", r.real_total,
                  r.binary_total, r.el_total, r.total(), r.total() / 1e6);
    out += buf;
    return out;
}

OverheadReport el_overhead_vs_baseline(const ArchSpec& arch) {
    ArchSpec baseline = arch;
    if (arch.family == "el_resnet50") {
        baseline.family = "bi_resnet50";
    } else {
        baseline.toggles.el_s = false;
        baseline.toggles.el_i = false;
        baseline.toggles.el_e = false;
    }
    LayerGraph el_graph = build_network(arch);
    LayerGraph base_graph = build_network(baseline);
    OverheadReport rep;
    rep.el_ops = flops_count(el_graph).el_total;
    rep.baseline_total = flops_count(base_graph).total();
    rep.ratio = rep.el_ops / rep.baseline_total;
    return rep;
}

}  // namespace elbnn
