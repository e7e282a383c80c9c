#include "elbnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace elbnn {

namespace {

constexpr int kCifarDim = 32;
constexpr int kCifarChannels = 3;
constexpr int kCifarRecord = 1 + kCifarChannels * kCifarDim * kCifarDim;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestionError("cannot open " + path);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Raw [0,1] pixels appended to split.images; caller normalizes afterwards.
void parse_cifar_file(const std::string& path, DataSplit& split) {
    const auto bytes = read_file(path);
    if (bytes.size() % kCifarRecord != 0)
        throw IngestionError(path + ": truncated at byte offset " +
                             std::to_string((bytes.size() / kCifarRecord) * kCifarRecord));
    const int records = int(bytes.size() / kCifarRecord);
    for (int r = 0; r < records; ++r) {
        const size_t off = size_t(r) * kCifarRecord;
        const int label = bytes[off];
        if (label > 9)
            throw IngestionError(path + ": label " + std::to_string(label) +
                                 " out of range at byte offset " + std::to_string(off));
        split.labels.push_back(label);
        for (size_t i = 1; i < kCifarRecord; ++i)
            split.images.push_back(float(bytes[off + i]) / 255.0f);
    }
    split.n += records;
    split.c = kCifarChannels;
    split.h = split.w = kCifarDim;
}

uint32_t be32(const unsigned char* p) {
    return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | uint32_t(p[3]);
}

void parse_idx_pair(const std::string& images_path, const std::string& labels_path,
                    DataSplit& split) {
    const auto img = read_file(images_path);
    if (img.size() < 16 || be32(img.data()) != 0x00000803u)
        throw IngestionError(images_path + ": bad IDX image magic at byte offset 0");
    const int n = int(be32(img.data() + 4));
    const int rows = int(be32(img.data() + 8));
    const int cols = int(be32(img.data() + 12));
    if (img.size() != 16 + size_t(n) * rows * cols)
        throw IngestionError(images_path + ": truncated at byte offset " +
                             std::to_string(img.size()));

    const auto lab = read_file(labels_path);
    if (lab.size() < 8 || be32(lab.data()) != 0x00000801u)
        throw IngestionError(labels_path + ": bad IDX label magic at byte offset 0");
    if (int(be32(lab.data() + 4)) != n || lab.size() != 8 + size_t(n))
        throw IngestionError(labels_path + ": label count mismatch");

    split.n = n;
    split.c = 1;
    split.h = rows;
    split.w = cols;
    split.images.reserve(size_t(n) * rows * cols);
    for (size_t i = 16; i < img.size(); ++i) split.images.push_back(float(img[i]) / 255.0f);
    for (size_t i = 8; i < lab.size(); ++i) {
        if (lab[i] > 9)
            throw IngestionError(labels_path + ": label " + std::to_string(int(lab[i])) +
                                 " out of range at byte offset " + std::to_string(i));
        split.labels.push_back(int(lab[i]));
    }
}

std::vector<float> train_channel_means(const DataSplit& train) {
    std::vector<double> acc(size_t(train.c), 0.0);
    const int64_t per_chan = int64_t(train.h) * train.w;
    for (int i = 0; i < train.n; ++i)
        for (int c = 0; c < train.c; ++c) {
            const float* p = train.images.data() + (int64_t(i) * train.c + c) * per_chan;
            for (int64_t j = 0; j < per_chan; ++j) acc[size_t(c)] += p[j];
        }
    std::vector<float> means(size_t(train.c));
    for (int c = 0; c < train.c; ++c)
        means[size_t(c)] = float(acc[size_t(c)] / (double(train.n) * double(per_chan)));
    return means;
}

void subtract_means(DataSplit& split, const std::vector<float>& means) {
    const int64_t per_chan = int64_t(split.h) * split.w;
    for (int i = 0; i < split.n; ++i)
        for (int c = 0; c < split.c; ++c) {
            float* p = split.images.data() + (int64_t(i) * split.c + c) * per_chan;
            for (int64_t j = 0; j < per_chan; ++j) p[j] -= means[size_t(c)];
        }
}

}  // namespace

DenseTensor DataSplit::batch(const std::vector<int>& indices) const {
    DenseTensor out(int(indices.size()), c, h, w);
    const int64_t per_image = int64_t(c) * h * w;
    for (size_t b = 0; b < indices.size(); ++b)
        std::copy_n(images.data() + int64_t(indices[b]) * per_image, per_image,
                    out.data.data() + int64_t(b) * per_image);
    return out;
}

Dataset load_dataset(const std::string& id, const std::string& dir) {
    Dataset ds;
    if (id == "cifar10_bin") {
        int found = 0;
        for (int b = 1; b <= 5; ++b) {
            const std::string path = dir + "/data_batch_" + std::to_string(b) + ".bin";
            if (std::filesystem::exists(path)) {
                parse_cifar_file(path, ds.train);
                ++found;
            }
        }
        if (found == 0) throw IngestionError("no data_batch_*.bin found under " + dir);
        parse_cifar_file(dir + "/test_batch.bin", ds.test);
    } else if (id == "mnist_idx") {
        parse_idx_pair(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte",
                       ds.train);
        parse_idx_pair(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte",
                       ds.test);
    } else {
        throw IngestionError("unknown dataset id: " + id);
    }
    ds.channel_mean = train_channel_means(ds.train);
    subtract_means(ds.train, ds.channel_mean);
    subtract_means(ds.test, ds.channel_mean);
    return ds;
}

namespace {

// Class-structured textures. The label encodes orientation x contrast
// (5 orientations, 2 grating contrasts), so half the discrimination needs the
// signal's amplitude, not just its sign. Background gradients, phase and
// brightness jitter, and pixel noise are nuisances.
void write_cifar_records(const std::string& path, int count, std::mt19937_64& rng) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IngestionError("cannot write " + path);
    std::uniform_int_distribution<int> label_dist(0, 9);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    std::normal_distribution<float> noise(0.0f, 0.10f);

    for (int r = 0; r < count; ++r) {
        const int label = label_dist(rng);
        const float theta = float(label % 5) * 0.62831853f;  // 36 degree steps
        const float amp = (label < 5 ? 0.14f : 0.38f) * (0.9f + 0.2f * unit(rng));
        const float freq = 3.5f;
        const float phase = unit(rng) * 6.2831853f;
        const float gx = 0.4f * (unit(rng) - 0.5f), gy = 0.4f * (unit(rng) - 0.5f);
        const float brightness = 0.08f * (unit(rng) - 0.5f);

        unsigned char rec[kCifarRecord];
        rec[0] = (unsigned char)label;
        int idx = 1;
        for (int c = 0; c < 3; ++c) {
            const float mix = 0.8f + 0.2f * std::sin(2.0944f * float(c) + phase);
            for (int y = 0; y < kCifarDim; ++y)
                for (int x = 0; x < kCifarDim; ++x) {
                    const float u = (float(x) - 15.5f) / 16.0f;
                    const float v = (float(y) - 15.5f) / 16.0f;
                    const float wave =
                        std::sin(freq * (u * std::cos(theta) + v * std::sin(theta)) * 3.14159f +
                                 phase);
                    const float bg = gx * u + gy * v;
                    float val = 0.5f + brightness + amp * mix * wave + bg + noise(rng);
                    val = std::clamp(val, 0.0f, 1.0f);
                    rec[idx++] = (unsigned char)std::lround(val * 255.0f);
                }
        }
        os.write(reinterpret_cast<const char*>(rec), kCifarRecord);
    }
}

}  // namespace

void write_synthetic_cifar(const std::string& dir, int n_train, int n_test, uint64_t seed) {
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(seed);
    write_cifar_records(dir + "/data_batch_1.bin", n_train, rng);
    write_cifar_records(dir + "/test_batch.bin", n_test, rng);
}

}  // namespace elbnn
