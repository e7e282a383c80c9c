#pragma once

#include <string>
#include <vector>

#include "elbnn/builders.hpp"
#include "elbnn/graph.hpp"

namespace elbnn {

struct FlopReport {
    std::vector<FlopRow> rows;
    double real_total = 0.0;
    double binary_total = 0.0;
    double el_total = 0.0;

    double total() const { return real_total + binary_total + el_total; }

    // The counting conventions, printed verbatim at the top of every report.
    static std::string conventions();
};

// Per-layer cost at batch 1 and the graph's declared input resolution.
FlopReport flops_count(const LayerGraph& g);

std::string format_flop_report(const FlopReport& r);

struct OverheadReport {
    double el_ops = 0.0;
    double baseline_total = 0.0;
    double ratio = 0.0;  // el_ops / baseline_total
};

// EL overhead of `arch` relative to the Bi-Real-style no-EL binarized
// baseline at the same resolution (bi_resnet50 for the resnet50 pair,
// otherwise the same family with all EL links off).
OverheadReport el_overhead_vs_baseline(const ArchSpec& arch);

}  // namespace elbnn
