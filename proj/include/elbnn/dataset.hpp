#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "elbnn/tensor.hpp"

namespace elbnn {

struct DataSplit {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> images;  // normalized, NCHW
    std::vector<int> labels;

    DenseTensor batch(const std::vector<int>& indices) const;
};

struct Dataset {
    DataSplit train, test;
    std::vector<float> channel_mean;  // of the raw [0,1] train pixels
    int classes = 10;
};

struct IngestionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// id is "cifar10_bin" (data_batch_*.bin / test_batch.bin, records of 1 label
// byte + 3072 pixel bytes) or "mnist_idx" (big-endian IDX files). Pixels are
// scaled to [0,1] and per-channel mean-subtracted with the train-split means.
Dataset load_dataset(const std::string& id, const std::string& dir);

// Seeded 10-class image generator in the CIFAR-10 binary layout, for desk
// runs where no real dataset is present.
void write_synthetic_cifar(const std::string& dir, int n_train, int n_test, uint64_t seed);

}  // namespace elbnn
