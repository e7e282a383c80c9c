#include "elbnn/graph.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "elbnn/float_kernels.hpp"

namespace elbnn {

namespace {

void accumulate(std::vector<float>& dst, const std::vector<float>& src) {
    if (dst.size() != src.size()) throw std::logic_error("grad accumulate: size mismatch");
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

DenseTensor add_tensors(const DenseTensor& a, const DenseTensor& b, const std::string& where) {
    if (!(a.shape == b.shape))
        throw std::invalid_argument(where + ": addend shape mismatch " + a.shape.str() + " vs " +
                                    b.shape.str());
    DenseTensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

double conv_macs(const ConvSpec& spec, Shape4 in) {
    const double sites = double(spec.out_h(in.h)) * spec.out_w(in.w);
    return sites * spec.c_out * spec.c_in_per_group() * spec.k_h * spec.k_w;
}

}  // namespace

// ---------------------------------------------------------------------------
// FPConvLayer

FPConvLayer::FPConvLayer(std::string name, ConvSpec s)
    : Layer(std::move(name)), spec(s),
      weight_(this->name() + ".w", ParamKind::full_precision,
              {s.c_out, s.c_in_per_group(), s.k_h, s.k_w}) {
    spec.validate();
}

DenseTensor FPConvLayer::forward(const DenseTensor& x, const ForwardMode&) {
    saved_x_ = x;
    return conv2d_forward(x, weight_.tensor(), spec, 0.0f);
}

DenseTensor FPConvLayer::backward(const DenseTensor& grad_out) {
    accumulate(weight_.grad, conv2d_grad_weights(saved_x_, grad_out, spec, 0.0f).data);
    return conv2d_grad_input(grad_out, weight_.tensor(), spec, saved_x_.shape);
}

Shape4 FPConvLayer::out_shape(Shape4 in) const {
    if (in.c != spec.c_in)
        throw std::invalid_argument(name() + ": expects " + std::to_string(spec.c_in) +
                                    " channels, got " + std::to_string(in.c));
    return {in.n, spec.c_out, spec.out_h(in.h), spec.out_w(in.w)};
}

void FPConvLayer::add_cost(Shape4 in, FlopRow& row) const {
    row.real_ops += 2.0 * conv_macs(spec, in);
}

// ---------------------------------------------------------------------------
// BatchNormLayer

BatchNormLayer::BatchNormLayer(std::string name, int c)
    : Layer(std::move(name)),
      scale_(this->name() + ".scale", ParamKind::full_precision, {1, c, 1, 1}),
      shift_(this->name() + ".shift", ParamKind::full_precision, {1, c, 1, 1}),
      run_mean_(this->name() + ".running_mean", ParamKind::bn_stat, {1, c, 1, 1}),
      run_var_(this->name() + ".running_var", ParamKind::bn_stat, {1, c, 1, 1}) {
    std::fill(scale_.value.begin(), scale_.value.end(), 1.0f);
    std::fill(run_var_.value.begin(), run_var_.value.end(), 1.0f);
}

void BatchNormLayer::collect_params(std::vector<Param*>& out) {
    out.push_back(&scale_);
    out.push_back(&shift_);
    out.push_back(&run_mean_);
    out.push_back(&run_var_);
}

DenseTensor BatchNormLayer::forward(const DenseTensor& x, const ForwardMode& mode) {
    BNState state;
    state.scale = scale_.value;
    state.shift = shift_.value;
    state.running_mean = run_mean_.value;
    state.running_var = run_var_.value;
    const bool batch_stats = mode.training && mode.bn_batch_stats;
    DenseTensor y = batchnorm_forward(x, state, batch_stats, &cache_);
    if (batch_stats) {
        run_mean_.value = state.running_mean;
        run_var_.value = state.running_var;
    }
    return y;
}

DenseTensor BatchNormLayer::backward(const DenseTensor& grad_out) {
    BNState state;
    state.scale = scale_.value;
    state.shift = shift_.value;
    BNGrads g = batchnorm_backward(grad_out, state, cache_);
    accumulate(scale_.grad, g.scale);
    accumulate(shift_.grad, g.shift);
    return std::move(g.x);
}

// ---------------------------------------------------------------------------
// ReLULayer

DenseTensor ReLULayer::forward(const DenseTensor& x, const ForwardMode&) {
    saved_x_ = x;
    DenseTensor y(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
    return y;
}

DenseTensor ReLULayer::backward(const DenseTensor& grad_out) {
    DenseTensor g(grad_out.shape);
    for (size_t i = 0; i < g.data.size(); ++i)
        g.data[i] = saved_x_.data[i] > 0.0f ? grad_out.data[i] : 0.0f;
    return g;
}

// ---------------------------------------------------------------------------
// MaxPoolLayer

MaxPoolLayer::MaxPoolLayer(std::string name, int k, int stride, int pad)
    : Layer(std::move(name)), k_(k), stride_(stride), pad_(pad) {}

Shape4 MaxPoolLayer::out_shape(Shape4 in) const {
    return {in.n, in.c, (in.h + 2 * pad_ - k_) / stride_ + 1,
            (in.w + 2 * pad_ - k_) / stride_ + 1};
}

DenseTensor MaxPoolLayer::forward(const DenseTensor& x, const ForwardMode&) {
    saved_x_ = x;
    const Shape4 s = x.shape;
    const Shape4 os = out_shape(s);
    DenseTensor out(os);
    argmax_.assign(size_t(os.numel()), -1);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy < os.h; ++oy)
                for (int ox = 0; ox < os.w; ++ox) {
                    float best = -std::numeric_limits<float>::infinity();
                    int64_t best_idx = -1;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= s.h) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= s.w) continue;
                            const float v = x.at(n, c, iy, ix);
                            if (v > best) {
                                best = v;
                                best_idx = x.index(n, c, iy, ix);
                            }
                        }
                    }
                    out.at(n, c, oy, ox) = best;
                    argmax_[size_t(out.index(n, c, oy, ox))] = best_idx;
                }
    return out;
}

DenseTensor MaxPoolLayer::backward(const DenseTensor& grad_out) {
    DenseTensor g(saved_x_.shape);
    for (size_t i = 0; i < grad_out.data.size(); ++i)
        if (argmax_[i] >= 0) g.data[size_t(argmax_[i])] += grad_out.data[i];
    return g;
}

// ---------------------------------------------------------------------------
// AvgPoolLayer

AvgPoolLayer::AvgPoolLayer(std::string name, int k, int stride)
    : Layer(std::move(name)), k_(k), stride_(stride) {}

Shape4 AvgPoolLayer::out_shape(Shape4 in) const {
    return {in.n, in.c, (in.h - k_) / stride_ + 1, (in.w - k_) / stride_ + 1};
}

DenseTensor AvgPoolLayer::forward(const DenseTensor& x, const ForwardMode&) {
    in_shape_ = x.shape;
    const Shape4 os = out_shape(x.shape);
    DenseTensor out(os);
    const float inv = 1.0f / float(k_ * k_);
    for (int n = 0; n < os.n; ++n)
        for (int c = 0; c < os.c; ++c)
            for (int oy = 0; oy < os.h; ++oy)
                for (int ox = 0; ox < os.w; ++ox) {
                    float acc = 0.0f;
                    for (int ky = 0; ky < k_; ++ky)
                        for (int kx = 0; kx < k_; ++kx)
                            acc += x.at(n, c, oy * stride_ + ky, ox * stride_ + kx);
                    out.at(n, c, oy, ox) = acc * inv;
                }
    return out;
}

DenseTensor AvgPoolLayer::backward(const DenseTensor& grad_out) {
    DenseTensor g(in_shape_);
    const Shape4 os = grad_out.shape;
    const float inv = 1.0f / float(k_ * k_);
    for (int n = 0; n < os.n; ++n)
        for (int c = 0; c < os.c; ++c)
            for (int oy = 0; oy < os.h; ++oy)
                for (int ox = 0; ox < os.w; ++ox) {
                    const float v = grad_out.at(n, c, oy, ox) * inv;
                    for (int ky = 0; ky < k_; ++ky)
                        for (int kx = 0; kx < k_; ++kx)
                            g.at(n, c, oy * stride_ + ky, ox * stride_ + kx) += v;
                }
    return g;
}

// ---------------------------------------------------------------------------
// GlobalAvgPoolLayer

DenseTensor GlobalAvgPoolLayer::forward(const DenseTensor& x, const ForwardMode&) {
    in_shape_ = x.shape;
    const Shape4 s = x.shape;
    DenseTensor out(s.n, s.c, 1, 1);
    const float inv = 1.0f / float(s.h * s.w);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            float acc = 0.0f;
            for (int y = 0; y < s.h; ++y)
                for (int xx = 0; xx < s.w; ++xx) acc += x.at(n, c, y, xx);
            out.at(n, c, 0, 0) = acc * inv;
        }
    return out;
}

DenseTensor GlobalAvgPoolLayer::backward(const DenseTensor& grad_out) {
    DenseTensor g(in_shape_);
    const float inv = 1.0f / float(in_shape_.h * in_shape_.w);
    for (int n = 0; n < in_shape_.n; ++n)
        for (int c = 0; c < in_shape_.c; ++c) {
            const float v = grad_out.at(n, c, 0, 0) * inv;
            for (int y = 0; y < in_shape_.h; ++y)
                for (int xx = 0; xx < in_shape_.w; ++xx) g.at(n, c, y, xx) = v;
        }
    return g;
}

// ---------------------------------------------------------------------------
// LinearLayer

LinearLayer::LinearLayer(std::string name, int c_in, int c_out)
    : Layer(std::move(name)),
      weight_(this->name() + ".w", ParamKind::full_precision, {c_out, c_in, 1, 1}),
      bias_(this->name() + ".b", ParamKind::full_precision, {1, c_out, 1, 1}),
      c_in_(c_in), c_out_(c_out) {}

void LinearLayer::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

DenseTensor LinearLayer::forward(const DenseTensor& x, const ForwardMode&) {
    if (x.shape.c != c_in_ || x.shape.h != 1 || x.shape.w != 1)
        throw std::invalid_argument(name() + ": expects (n," + std::to_string(c_in_) + ",1,1)");
    saved_x_ = x;
    DenseTensor out(x.shape.n, c_out_, 1, 1);
    for (int n = 0; n < x.shape.n; ++n)
        for (int o = 0; o < c_out_; ++o) {
            float acc = bias_.value[size_t(o)];
            for (int i = 0; i < c_in_; ++i)
                acc += weight_.value[size_t(o) * c_in_ + i] * x.at(n, i, 0, 0);
            out.at(n, o, 0, 0) = acc;
        }
    return out;
}

DenseTensor LinearLayer::backward(const DenseTensor& grad_out) {
    const int n_batch = saved_x_.shape.n;
    DenseTensor gx(saved_x_.shape);
    for (int o = 0; o < c_out_; ++o) {
        float gb = 0.0f;
        for (int n = 0; n < n_batch; ++n) {
            const float g = grad_out.at(n, o, 0, 0);
            gb += g;
            for (int i = 0; i < c_in_; ++i)
                weight_.grad[size_t(o) * c_in_ + i] += g * saved_x_.at(n, i, 0, 0);
        }
        bias_.grad[size_t(o)] += gb;
    }
    for (int n = 0; n < n_batch; ++n)
        for (int i = 0; i < c_in_; ++i) {
            float acc = 0.0f;
            for (int o = 0; o < c_out_; ++o)
                acc += weight_.value[size_t(o) * c_in_ + i] * grad_out.at(n, o, 0, 0);
            gx.at(n, i, 0, 0) = acc;
        }
    return gx;
}

void LinearLayer::add_cost(Shape4, FlopRow& row) const {
    row.real_ops += 2.0 * double(c_in_) * c_out_;
}

// ---------------------------------------------------------------------------
// BinConvELLayer

BinConvELLayer::BinConvELLayer(std::string name, ConvSpec s, ELConfig el, bool el_on)
    : Layer(std::move(name)), spec(s),
      weight_(this->name() + ".w", ParamKind::binary_latent,
              {s.c_out, s.c_in_per_group(), s.k_h, s.k_w}),
      bn_scale_(this->name() + ".bn.scale", ParamKind::full_precision, {1, s.c_out, 1, 1}),
      bn_shift_(this->name() + ".bn.shift", ParamKind::full_precision, {1, s.c_out, 1, 1}),
      bn_mean_(this->name() + ".bn.running_mean", ParamKind::bn_stat, {1, s.c_out, 1, 1}),
      bn_var_(this->name() + ".bn.running_var", ParamKind::bn_stat, {1, s.c_out, 1, 1}),
      gamma_(this->name() + ".gamma", ParamKind::gamma, {1, 1, 1, 1}),
      el_(el), el_enabled_(el_on) {
    spec.validate();
    if (el_.c_in != spec.c_in || el_.c_out != spec.c_out)
        throw std::invalid_argument(this->name() + ": EL channel config mismatch");
    gamma_init_ = el_.gamma;
    gamma_.value[0] = el_.gamma;
    std::fill(bn_scale_.value.begin(), bn_scale_.value.end(), 1.0f);
    std::fill(bn_var_.value.begin(), bn_var_.value.end(), 1.0f);
}

ELConfig BinConvELLayer::el_config() const {
    ELConfig cfg = el_;
    cfg.gamma = gamma_.value[0];
    return cfg;
}

void BinConvELLayer::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight_);
    out.push_back(&bn_scale_);
    out.push_back(&bn_shift_);
    out.push_back(&bn_mean_);
    out.push_back(&bn_var_);
    if (el_enabled_) out.push_back(&gamma_);
}

Shape4 BinConvELLayer::out_shape(Shape4 in) const {
    if (in.c != spec.c_in)
        throw std::invalid_argument(name() + ": expects " + std::to_string(spec.c_in) +
                                    " channels, got " + std::to_string(in.c));
    const Shape4 conv{in.n, spec.c_out, spec.out_h(in.h), spec.out_w(in.w)};
    if (el_enabled_) {
        const int lh = el_.downsample ? in.h / 2 : in.h;
        const int lw = el_.downsample ? in.w / 2 : in.w;
        if (lh != conv.h || lw != conv.w)
            throw std::invalid_argument(name() + ": conv/SEI shape mismatch");
    }
    return conv;
}

DenseTensor BinConvELLayer::forward(const DenseTensor& x, const ForwardMode& mode) {
    saved_x_ = x;
    const DenseTensor w = weight_.tensor();

    DenseTensor y = binarizer_ == Binarizer::sign
                        ? binconv2d(pack_bits(x), pack_bits(w), spec)
                        : conv2d_forward(clip_pm1(x), clip_pm1(w), spec, 0.0f);
    if (spec.scale_mode != ScaleMode::none) {
        alpha_ = weight_alpha(w);
        if (spec.scale_mode == ScaleMode::alpha_and_k) {
            k_ = activation_scale_k(x, spec);
            y = apply_scale(y, &k_, alpha_, spec);
        } else {
            y = apply_scale(y, nullptr, alpha_, spec);
        }
    }

    BNState state;
    state.scale = bn_scale_.value;
    state.shift = bn_shift_.value;
    state.running_mean = bn_mean_.value;
    state.running_var = bn_var_.value;
    const bool batch_stats = mode.training && mode.bn_batch_stats;
    y = batchnorm_forward(y, state, batch_stats, &bn_cache_);
    if (batch_stats) {
        bn_mean_.value = state.running_mean;
        bn_var_.value = state.running_var;
    }

    if (relu_before_link) {
        relu_in_ = y;
        for (auto& v : y.data) v = v > 0.0f ? v : 0.0f;
    }

    if (el_enabled_) y = add_tensors(y, sei_forward(x, el_config()), name());
    return y;
}

DenseTensor BinConvELLayer::backward(const DenseTensor& grad_out) {
    DenseTensor grad_link_x;
    if (el_enabled_) {
        SeiGrads sg = sei_backward(grad_out, el_config(), saved_x_);
        gamma_.grad[0] += sg.gamma;
        grad_link_x = std::move(sg.x);
    }

    DenseTensor g = grad_out;
    if (relu_before_link)
        for (size_t i = 0; i < g.data.size(); ++i)
            if (relu_in_.data[i] <= 0.0f) g.data[i] = 0.0f;

    BNState state;
    state.scale = bn_scale_.value;
    state.shift = bn_shift_.value;
    BNGrads bg = batchnorm_backward(g, state, bn_cache_);
    accumulate(bn_scale_.grad, bg.scale);
    accumulate(bn_shift_.grad, bg.shift);

    ConvGrads cg = binconv_backward(bg.x, saved_x_, weight_.tensor(), spec,
                                    spec.scale_mode == ScaleMode::alpha_and_k ? &k_ : nullptr,
                                    spec.scale_mode != ScaleMode::none ? &alpha_ : nullptr,
                                    binarizer_);
    accumulate(weight_.grad, cg.weights.data);

    if (el_enabled_) return add_tensors(cg.input, grad_link_x, name() + ".backward");
    return std::move(cg.input);
}

void BinConvELLayer::add_cost(Shape4 in, FlopRow& row) const {
    row.binary_ops += 2.0 * conv_macs(spec, in) / 64.0;
    if (el_enabled_)
        row.el_scale_add += double(spec.c_out) * spec.out_h(in.h) * spec.out_w(in.w);
}

// ---------------------------------------------------------------------------
// ResidualJoinLayer

DenseTensor ResidualJoinLayer::forward(const DenseTensor&, const ForwardMode&) {
    throw std::logic_error(name() + ": join requires graph-driven two-input forward");
}

DenseTensor ResidualJoinLayer::backward(const DenseTensor&) {
    throw std::logic_error(name() + ": join requires graph-driven two-input backward");
}

DenseTensor ResidualJoinLayer::forward_join(const DenseTensor& main, const DenseTensor& side,
                                            const ForwardMode& mode) {
    DenseTensor s = side;
    for (auto& l : shortcut) s = l->forward(s, mode);
    return add_tensors(main, s, name());
}

DenseTensor ResidualJoinLayer::backward_join(const DenseTensor& grad_out,
                                             DenseTensor& grad_side) {
    grad_side = grad_out;
    for (auto it = shortcut.rbegin(); it != shortcut.rend(); ++it)
        grad_side = (*it)->backward(grad_side);
    return grad_out;
}

Shape4 ResidualJoinLayer::side_out_shape(Shape4 side) const {
    for (const auto& l : shortcut) side = l->out_shape(side);
    return side;
}

void ResidualJoinLayer::collect_params(std::vector<Param*>& out) {
    for (auto& l : shortcut) l->collect_params(out);
}

void ResidualJoinLayer::set_binarizer(Binarizer b) {
    for (auto& l : shortcut) l->set_binarizer(b);
}

void ResidualJoinLayer::add_cost_side(Shape4 side_in, FlopRow& row) const {
    for (const auto& l : shortcut) {
        l->add_cost(side_in, row);
        side_in = l->out_shape(side_in);
    }
}

// ---------------------------------------------------------------------------
// LayerGraph

DenseTensor LayerGraph::forward(const DenseTensor& x, const ForwardMode& mode) {
    residual_stack_.clear();
    DenseTensor cur = x;
    for (auto& layer : layers) {
        if (layer->kind() == LayerKind::residual_begin) {
            residual_stack_.push_back(cur);
        } else if (layer->kind() == LayerKind::residual_join) {
            if (residual_stack_.empty())
                throw std::logic_error(layer->name() + ": no matching residual begin");
            DenseTensor side = std::move(residual_stack_.back());
            residual_stack_.pop_back();
            cur = static_cast<ResidualJoinLayer*>(layer.get())->forward_join(cur, side, mode);
        } else {
            cur = layer->forward(cur, mode);
        }
    }
    return cur;
}

DenseTensor LayerGraph::backward(const DenseTensor& grad_out) {
    grad_side_stack_.clear();
    DenseTensor g = grad_out;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        Layer* layer = it->get();
        if (layer->kind() == LayerKind::residual_join) {
            DenseTensor side;
            g = static_cast<ResidualJoinLayer*>(layer)->backward_join(g, side);
            grad_side_stack_.push_back(std::move(side));
        } else if (layer->kind() == LayerKind::residual_begin) {
            if (grad_side_stack_.empty())
                throw std::logic_error(layer->name() + ": no matching residual join");
            g = add_tensors(g, grad_side_stack_.back(), layer->name());
            grad_side_stack_.pop_back();
        } else {
            g = layer->backward(g);
        }
    }
    return g;
}

std::vector<Param*> LayerGraph::params() {
    std::vector<Param*> out;
    for (auto& layer : layers) layer->collect_params(out);
    return out;
}

void LayerGraph::zero_grads() {
    for (Param* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

void LayerGraph::set_binarizer(Binarizer b) {
    for (auto& layer : layers) layer->set_binarizer(b);
}

Shape4 LayerGraph::trace_shapes(int batch) const {
    Shape4 cur{batch, input_channels, input_hw, input_hw};
    std::vector<Shape4> stack;
    for (const auto& layer : layers) {
        if (layer->kind() == LayerKind::residual_begin) {
            stack.push_back(cur);
        } else if (layer->kind() == LayerKind::residual_join) {
            if (stack.empty()) throw std::logic_error(layer->name() + ": unmatched join");
            const Shape4 side =
                static_cast<const ResidualJoinLayer*>(layer.get())->side_out_shape(stack.back());
            stack.pop_back();
            if (!(side == cur))
                throw std::invalid_argument(layer->name() + ": residual shape mismatch " +
                                            cur.str() + " vs " + side.str());
        } else {
            cur = layer->out_shape(cur);
        }
    }
    if (!stack.empty()) throw std::logic_error("unmatched residual begin");
    return cur;
}

std::string LayerGraph::first_nonfinite_layer(const DenseTensor& x, const ForwardMode& mode) {
    std::vector<DenseTensor> stack;
    DenseTensor cur = x;
    for (auto& layer : layers) {
        if (layer->kind() == LayerKind::residual_begin) {
            stack.push_back(cur);
            continue;
        }
        if (layer->kind() == LayerKind::residual_join) {
            DenseTensor side = std::move(stack.back());
            stack.pop_back();
            cur = static_cast<ResidualJoinLayer*>(layer.get())->forward_join(cur, side, mode);
        } else {
            cur = layer->forward(cur, mode);
        }
        if (!cur.all_finite()) return layer->name();
    }
    return {};
}

std::vector<GammaRecord> dump_gamma(LayerGraph& graph) {
    std::vector<GammaRecord> out;
    for (auto& layer : graph.layers) {
        auto* bc = dynamic_cast<BinConvELLayer*>(layer.get());
        if (bc == nullptr || !bc->el_enabled()) continue;
        const ELConfig cfg = bc->el_config();
        out.push_back({bc->name(), cfg.mode(), bc->gamma_init_value(), cfg.gamma});
    }
    return out;
}

}  // namespace elbnn
