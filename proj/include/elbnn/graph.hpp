#pragma once

#include <memory>
#include <string>
#include <vector>

#include "elbnn/batchnorm.hpp"
#include "elbnn/binconv.hpp"
#include "elbnn/elastic_link.hpp"
#include "elbnn/tensor.hpp"

namespace elbnn {

enum class ParamKind { full_precision, binary_latent, gamma, bn_stat };

// One named parameter slot: value, gradient, Adam moments. bn_stat slots hold
// running statistics; they persist in checkpoints but the optimizer skips them.
struct Param {
    std::string name;
    ParamKind kind = ParamKind::full_precision;
    Shape4 shape;
    std::vector<float> value, grad, m, v;

    Param() = default;
    Param(std::string n, ParamKind k, Shape4 s)
        : name(std::move(n)), kind(k), shape(s), value(size_t(s.numel()), 0.0f),
          grad(size_t(s.numel()), 0.0f) {}

    DenseTensor tensor() const {
        DenseTensor t(shape);
        t.data = value;
        return t;
    }
};

struct ForwardMode {
    bool training = false;
    // Training forward normally uses batch statistics; clearing this keeps the
    // running statistics in use (and frozen), for fixed-stat evaluation runs.
    bool bn_batch_stats = true;
};

enum class LayerKind {
    fp_conv,
    bin_conv_el,
    batch_norm,
    relu,
    avg_pool,
    max_pool,
    global_avg_pool,
    linear,
    residual_begin,
    residual_join,
};

struct FlopRow {
    std::string layer;
    double real_ops = 0.0;    // full-precision ops, one MAC = 2 ops
    double binary_ops = 0.0;  // binary-conv ops, one MAC = 2 ops, divided by 64
    double el_scale_add = 0.0;  // EL link: one fused scale-add per output element
};

class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    virtual LayerKind kind() const = 0;
    virtual DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) = 0;
    virtual DenseTensor backward(const DenseTensor& grad_out) = 0;
    virtual Shape4 out_shape(Shape4 in) const = 0;
    virtual void collect_params(std::vector<Param*>& out) { (void)out; }
    virtual void set_binarizer(Binarizer b) { (void)b; }
    virtual void add_cost(Shape4 in, FlopRow& row) const { (void)in, (void)row; }

private:
    std::string name_;
};

class FPConvLayer : public Layer {
public:
    FPConvLayer(std::string name, ConvSpec spec);
    LayerKind kind() const override { return LayerKind::fp_conv; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    Shape4 out_shape(Shape4 in) const override;
    void collect_params(std::vector<Param*>& out) override { out.push_back(&weight_); }
    void add_cost(Shape4 in, FlopRow& row) const override;

    ConvSpec spec;
    Param weight_;

private:
    DenseTensor saved_x_;
};

class BatchNormLayer : public Layer {
public:
    BatchNormLayer(std::string name, int channels);
    LayerKind kind() const override { return LayerKind::batch_norm; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    Shape4 out_shape(Shape4 in) const override { return in; }
    void collect_params(std::vector<Param*>& out) override;

    Param scale_, shift_, run_mean_, run_var_;

private:
    BNCache cache_;
};

class ReLULayer : public Layer {
public:
    explicit ReLULayer(std::string name) : Layer(std::move(name)) {}
    LayerKind kind() const override { return LayerKind::relu; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    Shape4 out_shape(Shape4 in) const override { return in; }

private:
    DenseTensor saved_x_;
};

class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(std::string name, int k, int stride, int pad = 0);
    LayerKind kind() const override { return LayerKind::max_pool; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    Shape4 out_shape(Shape4 in) const override;

private:
    int k_, stride_, pad_;
    DenseTensor saved_x_;
    std::vector<int64_t> argmax_;
};

class AvgPoolLayer : public Layer {
public:
    AvgPoolLayer(std::string name, int k, int stride);
    LayerKind kind() const override { return LayerKind::avg_pool; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    Shape4 out_shape(Shape4 in) const override;

private:
    int k_, stride_;
    Shape4 in_shape_;
};

class GlobalAvgPoolLayer : public Layer {
public:
    explicit GlobalAvgPoolLayer(std::string name) : Layer(std::move(name)) {}
    LayerKind kind() const override { return LayerKind::global_avg_pool; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    Shape4 out_shape(Shape4 in) const override { return {in.n, in.c, 1, 1}; }

private:
    Shape4 in_shape_;
};

class LinearLayer : public Layer {
public:
    LinearLayer(std::string name, int c_in, int c_out);
    LayerKind kind() const override { return LayerKind::linear; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    Shape4 out_shape(Shape4 in) const override { return {in.n, c_out_, 1, 1}; }
    void collect_params(std::vector<Param*>& out) override;
    void add_cost(Shape4 in, FlopRow& row) const override;

    Param weight_, bias_;

private:
    int c_in_, c_out_;
    DenseTensor saved_x_;
};

// Eq 4 composite: BN(apply_scale(binconv(Sign(x), Sign(w)))) [+ ReLU inside if
// relu_before_link] + SEI(x)/gamma when the link is enabled.
class BinConvELLayer : public Layer {
public:
    BinConvELLayer(std::string name, ConvSpec spec, ELConfig el, bool el_enabled);
    LayerKind kind() const override { return LayerKind::bin_conv_el; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    Shape4 out_shape(Shape4 in) const override;
    void collect_params(std::vector<Param*>& out) override;
    void set_binarizer(Binarizer b) override { binarizer_ = b; }
    void add_cost(Shape4 in, FlopRow& row) const override;

    ELConfig el_config() const;  // with the live gamma value
    bool el_enabled() const { return el_enabled_; }
    float gamma_init_value() const { return gamma_init_; }

    ConvSpec spec;
    Param weight_;
    Param bn_scale_, bn_shift_, bn_mean_, bn_var_;
    Param gamma_;

private:
    ELConfig el_;
    bool el_enabled_;
    float gamma_init_ = 1.0f;
    Binarizer binarizer_ = Binarizer::sign;

    DenseTensor saved_x_;
    ScaleAlpha alpha_;
    ScaleK k_;
    BNCache bn_cache_;
    DenseTensor relu_in_;  // pre-ReLU conv branch when relu_before_link

public:
    bool relu_before_link = false;
};

class ResidualBeginLayer : public Layer {
public:
    explicit ResidualBeginLayer(std::string name) : Layer(std::move(name)) {}
    LayerKind kind() const override { return LayerKind::residual_begin; }
    DenseTensor forward(const DenseTensor& x, const ForwardMode&) override { return x; }
    DenseTensor backward(const DenseTensor& g) override { return g; }
    Shape4 out_shape(Shape4 in) const override { return in; }
};

// Adds the tensor captured by the matching ResidualBegin, optionally run
// through a shortcut pipeline (avg-pool + 1x1 projection + BN).
class ResidualJoinLayer : public Layer {
public:
    explicit ResidualJoinLayer(std::string name) : Layer(std::move(name)) {}
    LayerKind kind() const override { return LayerKind::residual_join; }

    // Single-input entry points are invalid; the graph calls the pair forms.
    DenseTensor forward(const DenseTensor&, const ForwardMode&) override;
    DenseTensor backward(const DenseTensor&) override;

    DenseTensor forward_join(const DenseTensor& main, const DenseTensor& side,
                             const ForwardMode& mode);
    // Returns grad for the main path; grad for the side path via out param.
    DenseTensor backward_join(const DenseTensor& grad_out, DenseTensor& grad_side);

    Shape4 out_shape(Shape4 in) const override { return in; }
    Shape4 side_out_shape(Shape4 side) const;
    void collect_params(std::vector<Param*>& out) override;
    void set_binarizer(Binarizer b) override;
    void add_cost_side(Shape4 side_in, FlopRow& row) const;

    std::vector<std::unique_ptr<Layer>> shortcut;  // applied to the side input
};

class LayerGraph {
public:
    std::vector<std::unique_ptr<Layer>> layers;
    int input_channels = 0, input_hw = 0, num_classes = 0;
    std::string arch_name;

    DenseTensor forward(const DenseTensor& x, const ForwardMode& mode);
    DenseTensor backward(const DenseTensor& grad_out);
    std::vector<Param*> params();
    void zero_grads();
    void set_binarizer(Binarizer b);

    // Shape-trace at the declared resolution; throws on any inconsistency.
    Shape4 trace_shapes(int batch) const;

    // Name of the first layer whose forward output contains NaN/Inf, or empty.
    std::string first_nonfinite_layer(const DenseTensor& x, const ForwardMode& mode);

private:
    std::vector<DenseTensor> residual_stack_;
    std::vector<DenseTensor> grad_side_stack_;
};

struct GammaRecord {
    std::string layer;
    SeiMode mode;
    float init = 1.0f;
    float current = 1.0f;
};

// Deterministic layer order; one record per enabled EL link.
std::vector<GammaRecord> dump_gamma(LayerGraph& graph);

}  // namespace elbnn
