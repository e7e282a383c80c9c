#include "elbnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "elbnn/augment.hpp"
#include "elbnn/checkpoint.hpp"

namespace elbnn {

float lr_schedule(int epoch, const TrainConfig& cfg) {
    int k = 0;
    for (int d : cfg.decay_epochs)
        if (d <= epoch) ++k;
    return cfg.base_lr / float(std::pow(double(cfg.decay_factor), double(k)));
}

LossAndGrad softmax_ce(const DenseTensor& logits, const std::vector<int>& labels) {
    const Shape4 s = logits.shape;
    if (int(labels.size()) != s.n) throw std::invalid_argument("softmax_ce: label count");
    LossAndGrad out;
    out.grad = DenseTensor(s);
    double loss_acc = 0.0;
    for (int n = 0; n < s.n; ++n) {
        float max_logit = logits.at(n, 0, 0, 0);
        int argmax = 0;
        for (int c = 1; c < s.c; ++c)
            if (logits.at(n, c, 0, 0) > max_logit) {
                max_logit = logits.at(n, c, 0, 0);
                argmax = c;
            }
        double denom = 0.0;
        for (int c = 0; c < s.c; ++c) denom += std::exp(double(logits.at(n, c, 0, 0)) - max_logit);
        const double log_denom = std::log(denom);
        const int y = labels[size_t(n)];
        loss_acc += log_denom - (double(logits.at(n, y, 0, 0)) - max_logit);
        if (argmax == y) out.correct += 1;
        for (int c = 0; c < s.c; ++c) {
            const double p = std::exp(double(logits.at(n, c, 0, 0)) - max_logit) / denom;
            out.grad.at(n, c, 0, 0) = float((p - (c == y ? 1.0 : 0.0)) / double(s.n));
        }
    }
    out.loss = loss_acc / double(s.n);
    return out;
}

DataSplit limit_split(const DataSplit& split, int limit) {
    if (limit <= 0 || limit >= split.n) return split;
    DataSplit out;
    out.n = limit;
    out.c = split.c;
    out.h = split.h;
    out.w = split.w;
    const int64_t per_image = int64_t(split.c) * split.h * split.w;
    out.images.assign(split.images.begin(), split.images.begin() + int64_t(limit) * per_image);
    out.labels.assign(split.labels.begin(), split.labels.begin() + limit);
    return out;
}

Trainer::Trainer(LayerGraph& graph, TrainConfig cfg) : graph_(graph), cfg_(std::move(cfg)) {}

void Trainer::init_params() {
    std::mt19937 rng(uint32_t(cfg_.seed));
    std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
    for (Param* p : graph_.params()) {
        // Only conv/linear weights are randomized; BN scale/shift, biases,
        // gammas and running stats keep their construction defaults.
        if (!p->name.ends_with(".w")) continue;
        if (p->kind == ParamKind::binary_latent) {
            for (auto& v : p->value) v = 0.1f * unit(rng);
        } else if (p->kind == ParamKind::full_precision) {
            const int64_t fan_in = int64_t(p->shape.c) * p->shape.h * p->shape.w;
            const float bound = 1.0f / std::sqrt(float(std::max<int64_t>(fan_in, 1)));
            for (auto& v : p->value) v = bound * unit(rng);
        }
    }
}

std::vector<int> Trainer::epoch_order(int n, int epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng{uint32_t(cfg_.seed * 1000003ULL + uint64_t(epoch) * 9176ULL + 1ULL)};
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

EpochMetrics Trainer::train_epoch(const DataSplit& data, int epoch, std::ostream* metrics) {
    const float lr = lr_schedule(epoch, cfg_);
    const auto order = epoch_order(data.n, epoch);
    std::mt19937 aug_rng(uint32_t(cfg_.seed * 7349ULL + uint64_t(epoch) * 131ULL + 17ULL));

    ForwardMode mode{.training = true, .bn_batch_stats = cfg_.bn_batch_stats};
    double loss_acc = 0.0;
    int correct = 0, seen = 0, step = 0;
    char line[160];

    for (int start = 0; start < data.n; start += cfg_.batch_size) {
        const int count = std::min(cfg_.batch_size, data.n - start);
        std::vector<int> idx(order.begin() + start, order.begin() + start + count);
        DenseTensor batch = data.batch(idx);
        if (cfg_.use_augment) batch = augment(batch, true, aug_rng);
        std::vector<int> labels(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) labels[size_t(i)] = data.labels[size_t(idx[size_t(i)])];

        graph_.zero_grads();
        DenseTensor logits = graph_.forward(batch, mode);
        LossAndGrad lg = softmax_ce(logits, labels);
        if (!std::isfinite(lg.loss)) {
            const std::string layer = graph_.first_nonfinite_layer(batch, mode);
            throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                     " step " + std::to_string(step) +
                                     "; first non-finite layer: " +
                                     (layer.empty() ? "(loss only)" : layer));
        }
        graph_.backward(lg.grad);
        adam_step(graph_.params(), adam_, lr);

        loss_acc += lg.loss * count;
        correct += lg.correct;
        seen += count;
        if (metrics && cfg_.metrics_every > 0 && step % cfg_.metrics_every == 0) {
            std::snprintf(line, sizeof(line), "%d,%d,%.6g,%.6g,%.6g\n", epoch, step, lg.loss,
                          double(lr), double(lg.correct) / count);
            *metrics << line;
        }
        ++step;
    }

    EpochMetrics em;
    em.mean_loss = loss_acc / std::max(seen, 1);
    em.train_top1 = double(correct) / std::max(seen, 1);
    return em;
}

double Trainer::evaluate(const DataSplit& data) {
    ForwardMode mode{.training = false, .bn_batch_stats = false};
    int correct = 0;
    for (int start = 0; start < data.n; start += cfg_.batch_size) {
        const int count = std::min(cfg_.batch_size, data.n - start);
        std::vector<int> idx(static_cast<size_t>(count));
        std::iota(idx.begin(), idx.end(), start);
        DenseTensor logits = graph_.forward(data.batch(idx), mode);
        for (int n = 0; n < count; ++n) {
            int argmax = 0;
            for (int c = 1; c < logits.shape.c; ++c)
                if (logits.at(n, c, 0, 0) > logits.at(n, argmax, 0, 0)) argmax = c;
            if (argmax == data.labels[size_t(start + n)]) ++correct;
        }
    }
    return double(correct) / std::max(data.n, 1);
}

double Trainer::fit(const Dataset& ds, const std::string& out_dir, std::ostream* metrics) {
    const DataSplit train = limit_split(ds.train, cfg_.train_limit);
    const DataSplit test = limit_split(ds.test, cfg_.test_limit);
    if (metrics) *metrics << "epoch,step,loss,lr,top1\n";

    double last_test = 0.0;
    char line[160];
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        EpochMetrics em = train_epoch(train, epoch, metrics);
        const bool eval_now =
            cfg_.eval_every > 0 && (epoch % cfg_.eval_every == cfg_.eval_every - 1 ||
                                    epoch == cfg_.epochs - 1);
        if (eval_now) {
            em.test_top1 = evaluate(test);
            last_test = em.test_top1;
        }
        if (metrics) {
            std::snprintf(line, sizeof(line), "%d,%d,%.6g,%.6g,%.6g\n", epoch, -1, em.mean_loss,
                          double(lr_schedule(epoch, cfg_)),
                          em.test_top1 >= 0.0 ? em.test_top1 : em.train_top1);
            *metrics << line;
        }
        if (!out_dir.empty() && cfg_.checkpoint_every > 0 &&
            (epoch + 1) % cfg_.checkpoint_every == 0)
            save_checkpoint(graph_, out_dir + "/checkpoint_epoch" + std::to_string(epoch + 1) +
                                        ".elbn");
    }
    if (cfg_.epochs == 0) last_test = evaluate(test);
    if (!out_dir.empty()) save_checkpoint(graph_, out_dir + "/checkpoint_final.elbn");
    return last_test;
}

}  // namespace elbnn
