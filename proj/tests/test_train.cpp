#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "elbnn/augment.hpp"
#include "elbnn/builders.hpp"
#include "elbnn/config.hpp"
#include "elbnn/dataset.hpp"
#include "elbnn/trainer.hpp"

using namespace elbnn;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(p);
    return p;
}

Dataset tiny_synth_dataset(int n_train, int n_test, uint64_t seed) {
    const auto dir = temp_dir("elbnn_synth_" + std::to_string(seed));
    write_synthetic_cifar(dir.string(), n_train, n_test, seed);
    return load_dataset("cifar10_bin", dir.string());
}

}  // namespace

TEST_CASE("lr_schedule") {
    TrainConfig cfg;
    cfg.base_lr = 1e-3f;
    cfg.decay_epochs = {50, 80};
    CHECK(lr_schedule(0, cfg) == doctest::Approx(1e-3));
    CHECK(lr_schedule(49, cfg) == doctest::Approx(1e-3));
    CHECK(lr_schedule(50, cfg) == doctest::Approx(1e-4));
    CHECK(lr_schedule(80, cfg) == doctest::Approx(1e-5));
    CHECK(lr_schedule(99, cfg) == doctest::Approx(1e-5));

    cfg.decay_epochs = {20, 32};  // desk-scale analog
    CHECK(lr_schedule(19, cfg) == doctest::Approx(1e-3));
    CHECK(lr_schedule(20, cfg) == doctest::Approx(1e-4));
    CHECK(lr_schedule(39, cfg) == doctest::Approx(1e-5));
}

TEST_CASE("adam_step") {
    SUBCASE("first step moves against the gradient at ~lr magnitude") {
        Param p("p", ParamKind::full_precision, {1, 4, 1, 1});
        p.value = {0.5f, -0.5f, 0.2f, 0.0f};
        p.grad = {1.0f, -2.0f, 0.5f, 3.0f};
        AdamState st;
        adam_step({&p}, st, 1e-3f);
        CHECK(p.value[0] == doctest::Approx(0.5f - 1e-3f).epsilon(1e-4));
        CHECK(p.value[1] == doctest::Approx(-0.5f + 1e-3f).epsilon(1e-4));
        CHECK(p.value[3] == doctest::Approx(0.0f - 1e-3f).epsilon(1e-4));
    }
    SUBCASE("zero gradient leaves parameters unchanged while moments decay") {
        Param p("p", ParamKind::full_precision, {1, 1, 1, 1});
        p.value = {1.0f};
        p.grad = {2.0f};
        AdamState st;
        adam_step({&p}, st, 1e-3f);
        const float after_first = p.value[0];
        const float m_first = p.m[0];
        p.grad = {0.0f};
        adam_step({&p}, st, 0.0f);  // lr 0 isolates the moment update
        CHECK(p.value[0] == after_first);
        CHECK(std::fabs(p.m[0]) < std::fabs(m_first));
    }
    SUBCASE("latent weights clamp to [-1, 1]") {
        Param p("w", ParamKind::binary_latent, {1, 1, 1, 1});
        p.value = {1.0f};
        p.grad = {-5.0f};  // pushes upward
        AdamState st;
        adam_step({&p}, st, 1e-2f);
        CHECK(p.value[0] == 1.0f);
    }
    SUBCASE("gamma magnitude clamps at 1e-3") {
        Param p("g", ParamKind::gamma, {1, 1, 1, 1});
        p.value = {1e-4f};
        p.grad = {0.0f};
        AdamState st;
        adam_step({&p}, st, 1e-3f);
        CHECK(std::fabs(p.value[0]) >= 1e-3f);
    }
    SUBCASE("bn running stats are not touched") {
        Param p("s", ParamKind::bn_stat, {1, 2, 1, 1});
        p.value = {3.0f, 4.0f};
        p.grad = {1.0f, 1.0f};
        AdamState st;
        adam_step({&p}, st, 1e-2f);
        CHECK(p.value[0] == 3.0f);
        CHECK(p.value[1] == 4.0f);
    }
}

TEST_CASE("softmax cross-entropy") {
    DenseTensor logits(2, 4, 1, 1);
    std::vector<int> labels = {1, 3};
    SUBCASE("uniform logits give ln(C) and zero-sum gradients") {
        auto lg = softmax_ce(logits, labels);
        CHECK(lg.loss == doctest::Approx(std::log(4.0)));
        for (int n = 0; n < 2; ++n) {
            float row = 0.0f;
            for (int c = 0; c < 4; ++c) row += lg.grad.at(n, c, 0, 0);
            CHECK(row == doctest::Approx(0.0f).epsilon(1e-6));
        }
    }
    SUBCASE("confident correct logits give near-zero loss") {
        logits.at(0, 1, 0, 0) = 20.0f;
        logits.at(1, 3, 0, 0) = 20.0f;
        auto lg = softmax_ce(logits, labels);
        CHECK(lg.loss < 1e-6);
        CHECK(lg.correct == 2);
    }
}

TEST_CASE("dataset loading") {
    SUBCASE("synthetic CIFAR files have the exact record arithmetic") {
        const auto dir = temp_dir("elbnn_cifar_fmt");
        write_synthetic_cifar(dir.string(), 10000, 50, 7);
        CHECK(std::filesystem::file_size(dir / "data_batch_1.bin") == 30730000u);

        Dataset ds = load_dataset("cifar10_bin", dir.string());
        CHECK(ds.train.n == 10000);
        CHECK(ds.test.n == 50);
        CHECK(ds.train.c == 3);
        CHECK(ds.train.h == 32);
        // normalized: train channel means subtract to ~0
        double acc = 0.0;
        for (float v : ds.train.images) acc += v;
        CHECK(std::fabs(acc / double(ds.train.images.size())) < 1e-4);
    }
    SUBCASE("corrupt CIFAR label is an ingestion error with offset") {
        const auto dir = temp_dir("elbnn_cifar_bad");
        std::ofstream os(dir / "data_batch_1.bin", std::ios::binary);
        std::vector<char> rec(3073, 0);
        rec[0] = 10;  // label out of range
        os.write(rec.data(), std::streamsize(rec.size()));
        os.close();
        std::ofstream(dir / "test_batch.bin", std::ios::binary).write(rec.data(), 0);
        CHECK_THROWS_WITH_AS(load_dataset("cifar10_bin", dir.string()),
                             doctest::Contains("byte offset"), IngestionError);
    }
    SUBCASE("truncated CIFAR file is an ingestion error") {
        const auto dir = temp_dir("elbnn_cifar_trunc");
        std::ofstream os(dir / "data_batch_1.bin", std::ios::binary);
        std::vector<char> rec(3072, 1);  // one byte short
        os.write(rec.data(), std::streamsize(rec.size()));
        os.close();
        CHECK_THROWS_AS(load_dataset("cifar10_bin", dir.string()), IngestionError);
    }
    SUBCASE("MNIST IDX round-trip and magic validation") {
        const auto dir = temp_dir("elbnn_idx");
        auto write_be32 = [](std::ostream& o, uint32_t v) {
            const unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                                        (unsigned char)(v >> 8), (unsigned char)v};
            o.write(reinterpret_cast<const char*>(b), 4);
        };
        for (const char* split : {"train", "t10k"}) {
            std::ofstream img(dir / (std::string(split) + "-images-idx3-ubyte"),
                              std::ios::binary);
            write_be32(img, 0x00000803u);
            write_be32(img, 10);
            write_be32(img, 28);
            write_be32(img, 28);
            std::vector<char> pixels(10 * 28 * 28, 100);
            img.write(pixels.data(), std::streamsize(pixels.size()));
            std::ofstream lab(dir / (std::string(split) + "-labels-idx1-ubyte"),
                              std::ios::binary);
            write_be32(lab, 0x00000801u);
            write_be32(lab, 10);
            std::vector<char> labels(10, 3);
            lab.write(labels.data(), std::streamsize(labels.size()));
        }
        Dataset ds = load_dataset("mnist_idx", dir.string());
        CHECK(ds.train.n == 10);
        CHECK(ds.train.c == 1);
        CHECK(ds.train.h == 28);
        CHECK(ds.train.labels[0] == 3);

        // break the magic
        std::ofstream img(dir / "train-images-idx3-ubyte", std::ios::binary);
        write_be32(img, 0x00000805u);
        img.close();
        CHECK_THROWS_AS(load_dataset("mnist_idx", dir.string()), IngestionError);
    }
}

TEST_CASE("augmentation") {
    DenseTensor batch = [] {
        DenseTensor t(2, 3, 32, 32);
        std::mt19937 rng(3);
        std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
        for (auto& v : t.data) v = dist(rng);
        return t;
    }();
    SUBCASE("eval mode is the identity") {
        std::mt19937 rng(1);
        auto out = augment(batch, false, rng);
        for (size_t i = 0; i < batch.data.size(); ++i) CHECK(out.data[i] == batch.data[i]);
    }
    SUBCASE("fixed seed reproduces the augmented batch exactly") {
        std::mt19937 a(42), b(42);
        auto x = augment(batch, true, a);
        auto y = augment(batch, true, b);
        for (size_t i = 0; i < x.data.size(); ++i) REQUIRE(x.data[i] == y.data[i]);
    }
    SUBCASE("horizontal flip is an involution") {
        auto flip = [](const DenseTensor& t) {
            DenseTensor out(t.shape);
            for (int n = 0; n < t.shape.n; ++n)
                for (int c = 0; c < t.shape.c; ++c)
                    for (int y = 0; y < t.shape.h; ++y)
                        for (int x = 0; x < t.shape.w; ++x)
                            out.at(n, c, y, x) = t.at(n, c, y, t.shape.w - 1 - x);
            return out;
        };
        auto twice = flip(flip(batch));
        for (size_t i = 0; i < batch.data.size(); ++i) CHECK(twice.data[i] == batch.data[i]);
    }
}

TEST_CASE("training loop properties") {
    Dataset ds = tiny_synth_dataset(120, 60, 11);

    SUBCASE("lr 0 in eval-stat mode keeps the loss exactly constant") {
        ArchSpec arch;
        LayerGraph g = build_network(arch);
        TrainConfig cfg;
        cfg.base_lr = 0.0f;
        cfg.decay_epochs = {};
        cfg.batch_size = 30;
        cfg.use_augment = false;
        cfg.bn_batch_stats = false;
        cfg.seed = 5;
        Trainer tr(g, cfg);
        tr.init_params();
        const DataSplit train = limit_split(ds.train, 60);
        std::vector<double> losses;
        for (int e = 0; e < 3; ++e) losses.push_back(tr.train_epoch(train, 0, nullptr).mean_loss);
        CHECK(losses[1] == losses[0]);
        CHECK(losses[2] == losses[0]);
    }

    SUBCASE("identical seeds give identical metrics") {
        auto run = [&](uint64_t seed) {
            ArchSpec arch;
            LayerGraph g = build_network(arch);
            TrainConfig cfg;
            cfg.epochs = 2;
            cfg.batch_size = 30;
            cfg.train_limit = 90;
            cfg.test_limit = 60;
            cfg.metrics_every = 1;
            cfg.seed = seed;
            Trainer tr(g, cfg);
            tr.init_params();
            std::ostringstream metrics;
            tr.fit(ds, "", &metrics);
            return metrics.str();
        };
        const std::string a = run(42), b = run(42), c = run(43);
        CHECK(a == b);
        CHECK(a != c);
    }

    SUBCASE("single-sample overfit: 50 steps drive the loss below 0.1") {
        // Feasibility first on the differentiable surrogate, then the binary net.
        for (Binarizer bin : {Binarizer::clip, Binarizer::sign}) {
            ArchSpec arch;
            LayerGraph g = build_network(arch);
            g.set_binarizer(bin);
            TrainConfig cfg;
            cfg.use_augment = false;
            cfg.seed = 9;
            Trainer tr(g, cfg);
            tr.init_params();
            const DataSplit one = limit_split(ds.train, 1);
            double last = 1e9;
            for (int step = 0; step < 50; ++step)
                last = tr.train_epoch(one, 0, nullptr).mean_loss;
            CHECK(last < 0.1);
        }
    }

    SUBCASE("untrained network scores chance accuracy on random labels") {
        Dataset big = tiny_synth_dataset(10, 2000, 13);
        std::mt19937 rng(17);
        std::uniform_int_distribution<int> lab(0, 9);
        for (auto& l : big.test.labels) l = lab(rng);  // detach labels from images
        ArchSpec arch;
        LayerGraph g = build_network(arch);
        TrainConfig cfg;
        Trainer tr(g, cfg);
        tr.init_params();
        const double acc = tr.evaluate(big.test);
        CHECK(acc > 0.07);
        CHECK(acc < 0.13);
    }

    SUBCASE("constant logits score the label-mode frequency") {
        ArchSpec arch;
        LayerGraph g = build_network(arch);
        TrainConfig cfg;
        Trainer tr(g, cfg);
        tr.init_params();
        for (Param* p : g.params()) {
            if (p->name == "fc.w") std::fill(p->value.begin(), p->value.end(), 0.0f);
            if (p->name == "fc.b") {
                std::fill(p->value.begin(), p->value.end(), 0.0f);
                p->value[4] = 5.0f;  // class 4 always wins
            }
        }
        int count4 = 0;
        for (int l : ds.test.labels) count4 += l == 4;
        const double acc = tr.evaluate(ds.test);
        CHECK(acc == doctest::Approx(double(count4) / ds.test.n));
    }
}

TEST_CASE("config parsing and manifest round-trip") {
    SUBCASE("unknown keys are rejected, not ignored") {
        std::map<std::string, std::string> out;
        CHECK_THROWS_WITH_AS(parse_config_text("model.colour = red", "<test>", out),
                             doctest::Contains("unknown key"), std::invalid_argument);
    }
    SUBCASE("sections and overrides resolve") {
        RunConfig cfg = make_run_config("train", "", {"model.el_s=off", "train.epochs=7"}, "");
        CHECK(cfg.get_bool("model.el_s") == false);
        CHECK(cfg.get_int("train.epochs") == 7);
        CHECK(cfg.get_bool("model.el_i") == true);
    }
    SUBCASE("manifest re-parses to the same values") {
        RunConfig cfg = make_run_config(
            "train", "", {"model.arch=el_mobilenet_tiny", "train.seed=7"}, "runs/x");
        const std::string manifest = emit_manifest(cfg);
        std::map<std::string, std::string> reparsed;
        parse_config_text(manifest, "<manifest>", reparsed);
        CHECK(reparsed == cfg.values);
    }
    SUBCASE("decay epochs must increase strictly") {
        RunConfig cfg = make_run_config("train", "", {"train.decay_epochs=30,20"}, "");
        CHECK_THROWS_AS(train_from_config(cfg), std::invalid_argument);
    }
    SUBCASE("resnet50 families default to 224/1000") {
        RunConfig cfg = make_run_config("flops", "", {"model.arch=el_resnet50"}, "");
        const ArchSpec arch = arch_from_config(cfg);
        CHECK(arch.input_hw == 224);
        CHECK(arch.num_classes == 1000);
    }
}
