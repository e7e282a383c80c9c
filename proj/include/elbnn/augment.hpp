#pragma once

#include <random>

#include "elbnn/tensor.hpp"

namespace elbnn {

// Training augmentation: reflect-pad by 4, random crop back to the original
// size, horizontal flip with p = 0.5. Deterministic given the rng state;
// identity when training is false.
DenseTensor augment(const DenseTensor& batch, bool training, std::mt19937& rng);

}  // namespace elbnn
