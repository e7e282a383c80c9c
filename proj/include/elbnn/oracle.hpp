#pragma once

#include <functional>
#include <string>
#include <vector>

#include "elbnn/conv_spec.hpp"
#include "elbnn/elastic_link.hpp"
#include "elbnn/tensor.hpp"

namespace elbnn::oracle {

// Brute-force references for the production kernels. Deliberately naive and
// sharing no code with the paths they check.

struct OracleReport {
    std::string case_desc;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    bool pass = false;
};

// Direct 7-nested-loop correlation with zero padding.
DenseTensor ref_conv2d(const DenseTensor& a, const DenseTensor& w, const ConvSpec& spec);

// Central differences (f(p+h) - f(p-h)) / 2h per coordinate. Each entry of
// params is perturbed in place and restored.
std::vector<double> finite_diff(const std::function<double()>& loss_fn,
                                const std::vector<float*>& params, double step);

// Explicit-matrix SEI: build the (c_out x c_in_padded) group-sum or
// tile-truncate matrix, apply per spatial site, divide by gamma.
DenseTensor ref_sei(const DenseTensor& x, const ELConfig& cfg);

// The matrix itself (rows = c_out, cols = padded channel count), gamma folded in.
std::vector<std::vector<float>> sei_matrix(const ELConfig& cfg);

}  // namespace elbnn::oracle
