#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "flip/error.hpp"
#include "flip/rng.hpp"
#include "flip/tensor.hpp"

namespace flip {

struct LayerDesc {
    enum class Kind : std::uint8_t { Conv = 0, MaxPool = 1, Dense = 2, Relu = 3, Softmax = 4 };
    Kind kind = Kind::Relu;
    int in_c = 0, out_c = 0, k = 0, stride = 1, pad = 0;  // conv / maxpool (k, stride)
    int in_n = 0, out_n = 0;                              // dense

    bool operator==(const LayerDesc&) const = default;
};

// Shared trunk feeding one or more head stacks; heads see the trunk output.
struct NetworkSpec {
    std::vector<int> input_shape;  // {C,H,W} or {N}
    std::vector<LayerDesc> trunk;
    std::vector<std::vector<LayerDesc>> heads;

    bool operator==(const NetworkSpec&) const = default;
};

inline std::vector<int> shape_after(const LayerDesc& d, const std::vector<int>& in) {
    using K = LayerDesc::Kind;
    switch (d.kind) {
        case K::Conv: {
            if (in.size() != 3) throw ParamError("conv: input must be CxHxW");
            if (in[0] != d.in_c) throw ParamError("conv: channel mismatch");
            const int oh = (in[1] + 2 * d.pad - d.k) / d.stride + 1;
            const int ow = (in[2] + 2 * d.pad - d.k) / d.stride + 1;
            if (oh <= 0 || ow <= 0) throw ParamError("conv: output collapses to zero");
            return {d.out_c, oh, ow};
        }
        case K::MaxPool: {
            if (in.size() != 3) throw ParamError("maxpool: input must be CxHxW");
            const int oh = (in[1] - d.k) / d.stride + 1;
            const int ow = (in[2] - d.k) / d.stride + 1;
            if (oh <= 0 || ow <= 0) throw ParamError("maxpool: output collapses to zero");
            return {in[0], oh, ow};
        }
        case K::Dense: {
            if (static_cast<int>(Tensor<float>::numel_of(in)) != d.in_n)
                throw ParamError("dense: input size mismatch");
            return {d.out_n};
        }
        case K::Relu:
            return in;
        case K::Softmax:
            if (in.size() != 1) throw ParamError("softmax: input must be a vector");
            return in;
    }
    throw ParamError("unknown layer kind");
}

// Fluent spec construction with shape inference.
class SpecBuilder {
public:
    explicit SpecBuilder(std::vector<int> input_shape) {
        spec_.input_shape = std::move(input_shape);
        cur_ = spec_.input_shape;
        trunk_out_ = cur_;
    }

    SpecBuilder& conv(int out_c, int k, int stride = 1, int pad = 0) {
        LayerDesc d;
        d.kind = LayerDesc::Kind::Conv;
        if (cur_.size() != 3) throw ParamError("conv after non-spatial layer");
        d.in_c = cur_[0];
        d.out_c = out_c;
        d.k = k;
        d.stride = stride;
        d.pad = pad;
        return push(d);
    }
    SpecBuilder& maxpool(int k = 2, int stride = 2) {
        LayerDesc d;
        d.kind = LayerDesc::Kind::MaxPool;
        d.k = k;
        d.stride = stride;
        return push(d);
    }
    SpecBuilder& dense(int out_n) {
        LayerDesc d;
        d.kind = LayerDesc::Kind::Dense;
        d.in_n = static_cast<int>(Tensor<float>::numel_of(cur_));
        d.out_n = out_n;
        return push(d);
    }
    SpecBuilder& relu() {
        LayerDesc d;
        d.kind = LayerDesc::Kind::Relu;
        return push(d);
    }
    SpecBuilder& softmax() {
        LayerDesc d;
        d.kind = LayerDesc::Kind::Softmax;
        return push(d);
    }

    // ends the trunk (first call) and starts a new head
    SpecBuilder& begin_head() {
        if (spec_.heads.empty()) trunk_out_ = cur_;
        spec_.heads.emplace_back();
        cur_ = trunk_out_;
        return *this;
    }

    NetworkSpec build() const { return spec_; }

private:
    SpecBuilder& push(const LayerDesc& d) {
        cur_ = shape_after(d, cur_);
        if (spec_.heads.empty())
            spec_.trunk.push_back(d);
        else
            spec_.heads.back().push_back(d);
        return *this;
    }

    NetworkSpec spec_;
    std::vector<int> cur_;
    std::vector<int> trunk_out_;
};

// Gradients in parameter order (conv/dense weights then bias, trunk first,
// then heads in declaration order).
template <typename S>
struct GradBuffer {
    std::vector<Tensor<S>> grads;
    void zero() {
        for (auto& g : grads) g.zero();
    }
};

// Per-call activation cache; owning it outside the network keeps forward()
// const so one parameter set can serve many threads.
template <typename S>
struct Workspace {
    std::vector<Tensor<S>> ins;            // input of every layer slot
    std::vector<std::vector<int>> argmax;  // maxpool routing
    std::vector<Tensor<S>> head_out;
    Tensor<S> trunk_out;
    bool forward_done = false;
};

template <typename S>
class Network {
public:
    explicit Network(const NetworkSpec& spec) : spec_(spec) {
        auto cur = spec.input_shape;
        std::size_t slot = 0;
        for (const auto& d : spec_.trunk) cur = add_layer(d, cur, slot);
        trunk_shape_ = cur;
        for (const auto& head : spec_.heads) {
            auto hcur = trunk_shape_;
            head_first_slot_.push_back(slot);
            for (const auto& d : head) hcur = add_layer(d, hcur, slot);
            head_shapes_.push_back(hcur);
        }
        if (spec_.heads.empty()) throw ParamError("network: at least one head required");
    }

    const NetworkSpec& spec() const { return spec_; }
    int num_heads() const { return static_cast<int>(spec_.heads.size()); }
    const std::vector<int>& head_shape(int h) const { return head_shapes_[h]; }

    // He-uniform for conv/dense weights, zero bias.
    void init_he(Rng& rng) {
        for (auto& L : layers_) {
            if (L.desc.kind == LayerDesc::Kind::Conv) {
                const double limit = std::sqrt(6.0 / (L.desc.in_c * L.desc.k * L.desc.k));
                for (auto& v : L.w.data) v = static_cast<S>(rng.uniform(-limit, limit));
                L.b.zero();
            } else if (L.desc.kind == LayerDesc::Kind::Dense) {
                const double limit = std::sqrt(6.0 / L.desc.in_n);
                for (auto& v : L.w.data) v = static_cast<S>(rng.uniform(-limit, limit));
                L.b.zero();
            }
        }
    }

    std::vector<Tensor<S>*> params() {
        std::vector<Tensor<S>*> out;
        for (auto& L : layers_)
            if (L.has_params()) {
                out.push_back(&L.w);
                out.push_back(&L.b);
            }
        return out;
    }
    std::vector<const Tensor<S>*> params() const {
        std::vector<const Tensor<S>*> out;
        for (const auto& L : layers_)
            if (L.has_params()) {
                out.push_back(&L.w);
                out.push_back(&L.b);
            }
        return out;
    }

    GradBuffer<S> make_grad_buffer() const {
        GradBuffer<S> gb;
        for (const auto& L : layers_)
            if (L.has_params()) {
                gb.grads.emplace_back(L.w.shape);
                gb.grads.emplace_back(L.b.shape);
            }
        return gb;
    }

    void copy_params_from(const Network& o) {
        if (!(spec_ == o.spec_)) throw ParamError("copy_params_from: spec mismatch");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i].w.data = o.layers_[i].w.data;
            layers_[i].b.data = o.layers_[i].b.data;
        }
    }

    template <typename T>
    Network<T> cast() const {
        Network<T> out(spec_);
        auto dst = out.params();
        auto src = params();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i]->data.assign(src[i]->data.begin(), src[i]->data.end());
        return out;
    }

    // Forward through trunk and every head. `head_mask` (optional) skips
    // heads whose entry is false; skipped heads return empty tensors.
    std::vector<Tensor<S>> forward(const Tensor<S>& input, Workspace<S>& ws,
                                   const std::vector<bool>* head_mask = nullptr) const {
        if (input.shape != spec_.input_shape) throw ParamError("forward: input shape mismatch");
        ws.ins.resize(layers_.size());
        ws.argmax.resize(layers_.size());
        ws.head_out.assign(spec_.heads.size(), Tensor<S>{});

        Tensor<S> cur = input;
        for (std::size_t i = 0; i < spec_.trunk.size(); ++i) cur = apply(i, cur, ws);
        ws.trunk_out = cur;

        for (std::size_t h = 0; h < spec_.heads.size(); ++h) {
            if (head_mask && !(*head_mask)[h]) continue;
            Tensor<S> x = ws.trunk_out;
            std::size_t slot = head_first_slot_[h];
            for (std::size_t i = 0; i < spec_.heads[h].size(); ++i) x = apply(slot + i, x, ws);
            ws.head_out[h] = std::move(x);
        }
        ws.forward_done = true;
        return ws.head_out;
    }

    // Accumulates parameter gradients into `gb` (callers zero it when they
    // want fresh gradients). head_grads entries may be empty to skip a head.
    void backward(Workspace<S>& ws, const std::vector<Tensor<S>>& head_grads, GradBuffer<S>& gb) const {
        if (!ws.forward_done) throw StateError("backward called without a preceding forward");
        if (head_grads.size() != spec_.heads.size())
            throw ParamError("backward: one gradient per head required");
        if (gb.grads.empty()) gb = make_grad_buffer();

        Tensor<S> dtrunk(trunk_shape_);
        for (std::size_t h = 0; h < spec_.heads.size(); ++h) {
            if (head_grads[h].data.empty()) continue;
            if (ws.head_out[h].data.empty())
                throw StateError("backward: head gradient supplied for a head skipped in forward");
            Tensor<S> dy = head_grads[h];
            const std::size_t base = head_first_slot_[h];
            for (int i = static_cast<int>(spec_.heads[h].size()) - 1; i >= 0; --i)
                dy = apply_backward(base + static_cast<std::size_t>(i), dy, ws, gb);
            for (std::size_t j = 0; j < dtrunk.data.size(); ++j) dtrunk.data[j] += dy.data[j];
        }
        Tensor<S> dy = std::move(dtrunk);
        for (int i = static_cast<int>(spec_.trunk.size()) - 1; i >= 0; --i)
            dy = apply_backward(static_cast<std::size_t>(i), dy, ws, gb);
    }

private:
    template <typename>
    friend class Network;

    struct Slab {
        LayerDesc desc;
        std::vector<int> in_shape, out_shape;
        Tensor<S> w, b;
        int grad_base = -1;  // index of w's grad in the GradBuffer
        bool has_params() const {
            return desc.kind == LayerDesc::Kind::Conv || desc.kind == LayerDesc::Kind::Dense;
        }
    };

    std::vector<int> add_layer(const LayerDesc& d, const std::vector<int>& in, std::size_t& slot) {
        Slab L;
        L.desc = d;
        L.in_shape = in;
        L.out_shape = shape_after(d, in);
        if (d.kind == LayerDesc::Kind::Conv) {
            L.w = Tensor<S>({d.out_c, d.in_c, d.k, d.k});
            L.b = Tensor<S>({d.out_c});
        } else if (d.kind == LayerDesc::Kind::Dense) {
            L.w = Tensor<S>({d.out_n, d.in_n});
            L.b = Tensor<S>({d.out_n});
        }
        if (L.has_params()) {
            L.grad_base = n_param_tensors_;
            n_param_tensors_ += 2;
        }
        layers_.push_back(std::move(L));
        ++slot;
        return layers_.back().out_shape;
    }

    Tensor<S> apply(std::size_t i, const Tensor<S>& x, Workspace<S>& ws) const {
        const Slab& L = layers_[i];
        if (x.shape != L.in_shape) throw ParamError("layer input shape mismatch");
        ws.ins[i] = x;
        using K = LayerDesc::Kind;
        Tensor<S> y(L.out_shape);
        switch (L.desc.kind) {
            case K::Conv:
                conv_forward(L, x, y);
                break;
            case K::MaxPool:
                pool_forward(L, x, y, ws.argmax[i]);
                break;
            case K::Dense:
                dense_forward(L, x, y);
                break;
            case K::Relu:
                for (std::size_t j = 0; j < x.data.size(); ++j) y.data[j] = x.data[j] > S(0) ? x.data[j] : S(0);
                break;
            case K::Softmax: {
                S mx = x.data[0];
                for (S v : x.data) mx = std::max(mx, v);
                S sum = 0;
                for (std::size_t j = 0; j < x.data.size(); ++j) {
                    y.data[j] = std::exp(x.data[j] - mx);
                    sum += y.data[j];
                }
                for (auto& v : y.data) v /= sum;
                break;
            }
        }
        return y;
    }

    Tensor<S> apply_backward(std::size_t i, const Tensor<S>& dy, const Workspace<S>& ws,
                             GradBuffer<S>& gb) const {
        const Slab& L = layers_[i];
        const Tensor<S>& x = ws.ins[i];
        using K = LayerDesc::Kind;
        Tensor<S> dx(L.in_shape);
        switch (L.desc.kind) {
            case K::Conv:
                conv_backward(L, x, dy, dx, gb.grads[L.grad_base], gb.grads[L.grad_base + 1]);
                break;
            case K::MaxPool: {
                const auto& am = ws.argmax[i];
                for (std::size_t j = 0; j < dy.data.size(); ++j) dx.data[am[j]] += dy.data[j];
                break;
            }
            case K::Dense:
                dense_backward(L, x, dy, dx, gb.grads[L.grad_base], gb.grads[L.grad_base + 1]);
                break;
            case K::Relu:
                for (std::size_t j = 0; j < dy.data.size(); ++j)
                    dx.data[j] = x.data[j] > S(0) ? dy.data[j] : S(0);
                break;
            case K::Softmax: {
                // y was not cached; recompute (softmax sits on 2-way outputs, cost is nil)
                S mx = x.data[0];
                for (S v : x.data) mx = std::max(mx, v);
                S sum = 0;
                std::vector<S> y(x.data.size());
                for (std::size_t j = 0; j < x.data.size(); ++j) {
                    y[j] = std::exp(x.data[j] - mx);
                    sum += y[j];
                }
                S dot = 0;
                for (std::size_t j = 0; j < y.size(); ++j) {
                    y[j] /= sum;
                    dot += y[j] * dy.data[j];
                }
                for (std::size_t j = 0; j < y.size(); ++j) dx.data[j] = y[j] * (dy.data[j] - dot);
                break;
            }
        }
        return dx;
    }

    static void conv_forward(const Slab& L, const Tensor<S>& x, Tensor<S>& y) {
        const int C = L.in_shape[0], H = L.in_shape[1], W = L.in_shape[2];
        const int K = L.desc.out_c, OH = L.out_shape[1], OW = L.out_shape[2];
        const int k = L.desc.k, s = L.desc.stride, p = L.desc.pad;
        for (int co = 0; co < K; ++co) {
            S* yplane = y.ptr() + static_cast<std::size_t>(co) * OH * OW;
            const S bias = L.b.data[co];
            for (int j = 0; j < OH * OW; ++j) yplane[j] = bias;
            for (int ci = 0; ci < C; ++ci) {
                const S* xplane = x.ptr() + static_cast<std::size_t>(ci) * H * W;
                const S* wk = L.w.ptr() + ((static_cast<std::size_t>(co) * C + ci) * k) * k;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const S wv = wk[ky * k + kx];
                        for (int oy = 0; oy < OH; ++oy) {
                            const int iy = oy * s + ky - p;
                            if (iy < 0 || iy >= H) continue;
                            S* yrow = yplane + static_cast<std::size_t>(oy) * OW;
                            const S* xrow = xplane + static_cast<std::size_t>(iy) * W;
                            // valid ox range so that 0 <= ox*s + kx - p < W
                            int lo = 0, hi = OW;
                            while (lo < OW && lo * s + kx - p < 0) ++lo;
                            while (hi > lo && (hi - 1) * s + kx - p >= W) --hi;
                            const int off = kx - p;
                            if (s == 1) {
                                for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xrow[ox + off];
                            } else {
                                for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xrow[ox * s + off];
                            }
                        }
                    }
            }
        }
    }

    static void conv_backward(const Slab& L, const Tensor<S>& x, const Tensor<S>& dy, Tensor<S>& dx,
                              Tensor<S>& dw, Tensor<S>& db) {
        const int C = L.in_shape[0], H = L.in_shape[1], W = L.in_shape[2];
        const int K = L.desc.out_c, OH = L.out_shape[1], OW = L.out_shape[2];
        const int k = L.desc.k, s = L.desc.stride, p = L.desc.pad;
        for (int co = 0; co < K; ++co) {
            const S* dyplane = dy.ptr() + static_cast<std::size_t>(co) * OH * OW;
            S acc = 0;
            for (int j = 0; j < OH * OW; ++j) acc += dyplane[j];
            db.data[co] += acc;
            for (int ci = 0; ci < C; ++ci) {
                const S* xplane = x.ptr() + static_cast<std::size_t>(ci) * H * W;
                S* dxplane = dx.ptr() + static_cast<std::size_t>(ci) * H * W;
                const S* wk = L.w.ptr() + ((static_cast<std::size_t>(co) * C + ci) * k) * k;
                S* dwk = dw.ptr() + ((static_cast<std::size_t>(co) * C + ci) * k) * k;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const S wv = wk[ky * k + kx];
                        S wgrad = 0;
                        for (int oy = 0; oy < OH; ++oy) {
                            const int iy = oy * s + ky - p;
                            if (iy < 0 || iy >= H) continue;
                            const S* dyrow = dyplane + static_cast<std::size_t>(oy) * OW;
                            const S* xrow = xplane + static_cast<std::size_t>(iy) * W;
                            S* dxrow = dxplane + static_cast<std::size_t>(iy) * W;
                            int lo = 0, hi = OW;
                            while (lo < OW && lo * s + kx - p < 0) ++lo;
                            while (hi > lo && (hi - 1) * s + kx - p >= W) --hi;
                            const int off = kx - p;
                            if (s == 1) {
                                for (int ox = lo; ox < hi; ++ox) {
                                    wgrad += dyrow[ox] * xrow[ox + off];
                                    dxrow[ox + off] += wv * dyrow[ox];
                                }
                            } else {
                                for (int ox = lo; ox < hi; ++ox) {
                                    wgrad += dyrow[ox] * xrow[ox * s + off];
                                    dxrow[ox * s + off] += wv * dyrow[ox];
                                }
                            }
                        }
                        dwk[ky * k + kx] += wgrad;
                    }
            }
        }
    }

    static void pool_forward(const Slab& L, const Tensor<S>& x, Tensor<S>& y, std::vector<int>& argmax) {
        const int C = L.in_shape[0], H = L.in_shape[1], W = L.in_shape[2];
        const int OH = L.out_shape[1], OW = L.out_shape[2];
        const int k = L.desc.k, s = L.desc.stride;
        argmax.assign(y.data.size(), 0);
        for (int c = 0; c < C; ++c)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    S best = x.data[(static_cast<std::size_t>(c) * H + oy * s) * W + ox * s];
                    int best_idx = (c * H + oy * s) * W + ox * s;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = oy * s + ky, ix = ox * s + kx;
                            const int idx = (c * H + iy) * W + ix;
                            if (x.data[idx] > best) {
                                best = x.data[idx];
                                best_idx = idx;
                            }
                        }
                    const std::size_t o = (static_cast<std::size_t>(c) * OH + oy) * OW + ox;
                    y.data[o] = best;
                    argmax[o] = best_idx;
                }
    }

    static void dense_forward(const Slab& L, const Tensor<S>& x, Tensor<S>& y) {
        const int out_n = L.desc.out_n, in_n = L.desc.in_n;
        for (int o = 0; o < out_n; ++o) {
            const S* wrow = L.w.ptr() + static_cast<std::size_t>(o) * in_n;
            S acc = L.b.data[o];
            for (int i = 0; i < in_n; ++i) acc += wrow[i] * x.data[i];
            y.data[o] = acc;
        }
    }

    static void dense_backward(const Slab& L, const Tensor<S>& x, const Tensor<S>& dy, Tensor<S>& dx,
                               Tensor<S>& dw, Tensor<S>& db) {
        const int out_n = L.desc.out_n, in_n = L.desc.in_n;
        for (int o = 0; o < out_n; ++o) {
            const S g = dy.data[o];
            db.data[o] += g;
            const S* wrow = L.w.ptr() + static_cast<std::size_t>(o) * in_n;
            S* dwrow = dw.ptr() + static_cast<std::size_t>(o) * in_n;
            for (int i = 0; i < in_n; ++i) {
                dwrow[i] += g * x.data[i];
                dx.data[i] += g * wrow[i];
            }
        }
    }

    NetworkSpec spec_;
    std::vector<Slab> layers_;
    std::vector<std::size_t> head_first_slot_;
    std::vector<int> trunk_shape_;
    std::vector<std::vector<int>> head_shapes_;
    int n_param_tensors_ = 0;
};

// Decoupled-weight-decay Adam. State lives here so adam_step stays a plain
// update rule over (params, grads).
template <typename S>
class AdamW {
public:
    AdamW(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
          double weight_decay = 0.0)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

    void step(std::vector<Tensor<S>*> params, const GradBuffer<S>& grads) {
        if (m_.empty()) {
            for (auto* p : params) {
                m_.emplace_back(p->shape);
                v_.emplace_back(p->shape);
            }
        }
        if (params.size() != grads.grads.size() || params.size() != m_.size())
            throw ParamError("adam: param/grad count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i]->data;
            const auto& g = grads.grads[i].data;
            auto& m = m_[i].data;
            auto& v = v_[i].data;
            for (std::size_t j = 0; j < p.size(); ++j) {
                m[j] = static_cast<S>(b1_ * m[j] + (1.0 - b1_) * g[j]);
                v[j] = static_cast<S>(b2_ * v[j] + (1.0 - b2_) * g[j] * g[j]);
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= static_cast<S>(lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p[j]));
            }
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    double lr_, b1_, b2_, eps_, wd_;
    std::vector<Tensor<S>> m_, v_;
    long t_ = 0;
};

// Huber value/derivative as a function of the residual e (delta = 1).
inline double huber_value(double e) {
    const double a = std::abs(e);
    return a <= 1.0 ? 0.5 * e * e : a - 0.5;
}
inline double huber_grad(double e) { return e > 1.0 ? 1.0 : (e < -1.0 ? -1.0 : e); }

}  // namespace flip
