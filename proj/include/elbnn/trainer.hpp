#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "elbnn/adam.hpp"
#include "elbnn/dataset.hpp"
#include "elbnn/graph.hpp"

namespace elbnn {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 50;
    float base_lr = 1e-3f;
    std::vector<int> decay_epochs = {20, 32};  // desk-scale analog of 50/80 over 100
    float decay_factor = 10.0f;
    uint64_t seed = 42;
    std::string dataset = "cifar10_bin";
    std::string data_dir;
    int train_limit = 0;  // 0 = whole split
    int test_limit = 0;
    int checkpoint_every = 0;  // epochs; 0 = final only
    int metrics_every = 50;    // steps between metric rows
    int eval_every = 1;        // epochs between test evaluations
    bool use_augment = true;
    bool bn_batch_stats = true;  // false = eval-stat training
};

// base_lr * decay_factor^-k where k counts decay epochs <= epoch.
float lr_schedule(int epoch, const TrainConfig& cfg);

struct LossAndGrad {
    double loss = 0.0;
    DenseTensor grad;   // d(mean cross-entropy)/d(logits)
    int correct = 0;
};

// Softmax cross-entropy over (n, classes, 1, 1) logits.
LossAndGrad softmax_ce(const DenseTensor& logits, const std::vector<int>& labels);

struct EpochMetrics {
    double mean_loss = 0.0;
    double train_top1 = 0.0;
    double test_top1 = -1.0;  // -1 when not evaluated this epoch
};

class Trainer {
public:
    Trainer(LayerGraph& graph, TrainConfig cfg);

    // Seeded weight init: fan-in uniform for full-precision slots, U[-0.1,0.1]
    // for binary latents.
    void init_params();

    // One pass: shuffle, augment, forward (binarize on the fly), backward
    // (STE), Adam. Writes `epoch,step,loss,lr,top1` rows when metrics given.
    // Non-finite loss aborts, naming the first layer producing non-finite
    // values.
    EpochMetrics train_epoch(const DataSplit& data, int epoch, std::ostream* metrics);

    double evaluate(const DataSplit& data);

    // Full run over cfg.epochs with per-epoch test eval and checkpointing.
    double fit(const Dataset& ds, const std::string& out_dir, std::ostream* metrics);

    LayerGraph& graph() { return graph_; }
    AdamState& adam() { return adam_; }

private:
    std::vector<int> epoch_order(int n, int epoch);

    LayerGraph& graph_;
    TrainConfig cfg_;
    AdamState adam_;
};

// Applies train_limit/test_limit: a prefix view of the split.
DataSplit limit_split(const DataSplit& split, int limit);

}  // namespace elbnn
