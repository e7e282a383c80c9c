#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "elbnn/checkpoint.hpp"
#include "elbnn/config.hpp"
#include "elbnn/flops.hpp"
#include "elbnn/oracle.hpp"
#include "elbnn/trainer.hpp"
#include "elbnn/verify.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace elbnn;

namespace {

void apply_thread_cap() {
#ifdef _OPENMP
    if (const char* env = std::getenv("ELBNN_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
#endif
}

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (key = value with [sections])");
    cmd->add_option("--set,-D", args.overrides, "override, e.g. -D model.el_s=off");
    cmd->add_option("--out", args.out_dir, "output directory");
}

RunConfig resolve(const std::string& subcommand, const CommonArgs& args) {
    return make_run_config(subcommand, args.config_path, args.overrides, args.out_dir);
}

void write_manifest(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream os(cfg.out_dir + "/run_manifest.cfg");
    os << emit_manifest(cfg);
}

int cmd_train(const RunConfig& cfg) {
    write_manifest(cfg);
    const ArchSpec arch = arch_from_config(cfg);
    const TrainConfig tc = train_from_config(cfg);
    const Dataset ds = load_dataset(tc.dataset, tc.data_dir);

    LayerGraph graph = build_network(arch);
    Trainer trainer(graph, tc);
    trainer.init_params();

    std::ofstream metrics(cfg.out_dir + "/metrics.csv");
    const double top1 = trainer.fit(ds, cfg.out_dir, &metrics);
    std::cout << "final top-1: " << top1 << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint) {
    const ArchSpec arch = arch_from_config(cfg);
    const TrainConfig tc = train_from_config(cfg);
    const Dataset ds = load_dataset(tc.dataset, tc.data_dir);

    LayerGraph graph = build_network(arch);
    load_checkpoint(graph, checkpoint);
    Trainer trainer(graph, tc);
    const double top1 = trainer.evaluate(limit_split(ds.test, tc.test_limit));
    std::cout << "top-1: " << top1 << "\n";
    return 0;
}

int cmd_flops(const RunConfig& cfg) {
    const ArchSpec arch = arch_from_config(cfg);
    LayerGraph graph = build_network(arch);
    const FlopReport report = flops_count(graph);
    std::cout << "arch: " << arch.family << " @ " << arch.input_hw << "x" << arch.input_hw
              << "\n" << format_flop_report(report);

    const OverheadReport ovh = el_overhead_vs_baseline(arch);
    if (ovh.el_ops > 0.0) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "EL overhead: %.2fM ops over the no-EL binarized baseline's %.1fM "
                      "(~%.1f%% increase)\n",
                      ovh.el_ops / 1e6, ovh.baseline_total / 1e6, ovh.ratio * 100.0);
        std::cout << buf;
    }
    return 0;
}

int cmd_verify(const std::string& fault) {
    const VerifyKernels kernels =
        fault.empty() ? VerifyKernels::production() : VerifyKernels::with_fault(fault);
    return run_verification(std::cout, kernels) ? 0 : 1;
}

int cmd_gamma_dump(const RunConfig& cfg, const std::string& checkpoint) {
    const ArchSpec arch = arch_from_config(cfg);
    LayerGraph graph = build_network(arch);
    if (!checkpoint.empty()) load_checkpoint(graph, checkpoint);
    const auto records = dump_gamma(graph);
    std::cout << "layer                     mode      gamma_init  gamma_now  change\n";
    for (const auto& r : records) {
        const char* mode = r.mode == SeiMode::identity ? "identity"
                           : r.mode == SeiMode::squeeze ? "squeeze"
                                                        : "expand";
        const char mark = r.current > r.init ? '+' : (r.current < r.init ? '-' : '=');
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-25s %-9s %10.4f %10.4f  %c\n", r.layer.c_str(), mode,
                      double(r.init), double(r.current), mark);
        std::cout << buf;
    }
    return 0;
}

int cmd_bench(const RunConfig& cfg, int runs, int batch) {
    const ArchSpec arch = arch_from_config(cfg);
    LayerGraph graph = build_network(arch);
    Trainer trainer(graph, train_from_config(cfg));
    trainer.init_params();

    std::mt19937 rng(123);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    DenseTensor input(batch, arch.in_channels, arch.input_hw, arch.input_hw);
    for (auto& v : input.data) v = dist(rng);
    ForwardMode mode{.training = false, .bn_batch_stats = false};

    graph.forward(input, mode);  // warm-up
    std::vector<double> times;
    for (int r = 0; r < runs; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        graph.forward(input, mode);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        std::printf("run %d: %.2f ms\n", r + 1, times.back());
    }
    if (runs > 1) {
        double sum = 0.0, mn = times[0];
        for (double t : times) {
            sum += t;
            mn = std::min(mn, t);
        }
        std::printf("packed forward: mean %.2f ms, min %.2f ms over %d runs\n", sum / runs, mn,
                    runs);
    }

    // Microbench: packed 1x1 kernel against the float oracle path.
    const int c = 128, hw = 16;
    DenseTensor x(batch, c, hw, hw), w(c, c, 1, 1);
    for (auto& v : x.data) v = dist(rng);
    for (auto& v : w.data) v = dist(rng);
    ConvSpec spec{.c_in = c, .c_out = c, .k_h = 1, .k_w = 1, .scale_mode = ScaleMode::none};
    const BitTensor xb = pack_bits(x), wb = pack_bits(w);
    auto time_it = [&](auto&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < runs; ++r) f();
        const auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(t1 - t0).count() / runs;
    };
    const double packed_ms = time_it([&] { binconv2d(xb, wb, spec); });
    const double oracle_ms = time_it([&] { oracle::ref_conv2d(x, w, spec); });
    std::printf("1x1 c=%d microbench: packed %.3f ms, float oracle %.3f ms, speedup %.1fx\n", c,
                packed_ms, oracle_ms, oracle_ms / packed_ms);
    return 0;
}

int cmd_synth_data(const std::string& dir, int n_train, int n_test, uint64_t seed) {
    write_synthetic_cifar(dir, n_train, n_test, seed);
    std::cout << "wrote " << n_train << " train + " << n_test << " test records to " << dir
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();
    CLI::App app{"elbnn: binarized neural network engine with Elastic-Link modules"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, flops_args, gamma_args, bench_args;
    std::string eval_checkpoint, gamma_checkpoint, fault;
    int bench_runs = 10, bench_batch = 1;
    std::string synth_dir = "data/synth";
    int synth_train = 10000, synth_test = 2000;
    uint64_t synth_seed = 42;

    auto* train = app.add_subcommand("train", "train a model, write metrics + checkpoints");
    add_common(train, train_args);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_checkpoint, "ELBN checkpoint path")->required();

    auto* flops = app.add_subcommand("flops", "itemized FLOP report with EL overhead");
    add_common(flops, flops_args);

    auto* verify = app.add_subcommand("verify", "run the oracle suite; nonzero on mismatch");
    verify->add_option("--inject-fault", fault,
                       "run with a known-broken kernel (self-test fixture)");

    auto* gamma = app.add_subcommand("gamma-dump", "per-link gamma table");
    add_common(gamma, gamma_args);
    gamma->add_option("--checkpoint", gamma_checkpoint, "optional checkpoint to inspect");

    auto* bench = app.add_subcommand("bench", "forward latency, packed vs float oracle");
    add_common(bench, bench_args);
    bench->add_option("--runs", bench_runs, "timed runs (default 10)");
    bench->add_option("--batch", bench_batch, "batch size");

    auto* synth = app.add_subcommand("synth-data", "generate a CIFAR-format synthetic dataset");
    synth->add_option("--dir", synth_dir, "target directory");
    synth->add_option("--train", synth_train, "train records");
    synth->add_option("--test", synth_test, "test records");
    synth->add_option("--seed", synth_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(resolve("train", train_args));
        if (eval->parsed()) return cmd_eval(resolve("eval", eval_args), eval_checkpoint);
        if (flops->parsed()) return cmd_flops(resolve("flops", flops_args));
        if (verify->parsed()) return cmd_verify(fault);
        if (gamma->parsed()) return cmd_gamma_dump(resolve("gamma-dump", gamma_args),
                                                   gamma_checkpoint);
        if (bench->parsed()) return cmd_bench(resolve("bench", bench_args), bench_runs,
                                              bench_batch);
        if (synth->parsed()) return cmd_synth_data(synth_dir, synth_train, synth_test,
                                                   synth_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
