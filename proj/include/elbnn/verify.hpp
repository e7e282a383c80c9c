#pragma once

#include <functional>
#include <ostream>
#include <string>

#include "elbnn/binconv.hpp"
#include "elbnn/elastic_link.hpp"

namespace elbnn {

// The kernels the verification suite exercises. Tests inject broken variants
// here to prove the suite catches single-kernel mutations.
struct VerifyKernels {
    std::function<DenseTensor(const BitTensor&, const BitTensor&, const ConvSpec&)> binconv;
    std::function<DenseTensor(const DenseTensor&, const ELConfig&)> sei;
    std::function<float(int, int)> gamma;
    std::function<DenseTensor(const DenseTensor&, const DenseTensor&)> ste;

    static VerifyKernels production();
    // Known fault fixtures: binconv_off_by_one | gamma_floor | ste_open_boundary
    static VerifyKernels with_fault(const std::string& name);
};

// Runs the full oracle suite, one report line per section:
//   name  cases  max_abs_err  PASS|FAIL
// Returns true iff every section passes.
bool run_verification(std::ostream& out, const VerifyKernels& kernels = VerifyKernels::production());

}  // namespace elbnn
