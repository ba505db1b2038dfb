#include "ferkit/tensornet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ferkit {

namespace {

class ConvLayer final : public Layer {
public:
    ConvLayer(std::size_t in_ch, std::size_t out_ch) : in_ch_(in_ch), out_ch_(out_ch) {
        if (out_ch == 0 || in_ch == 0)
            throw std::invalid_argument("conv channel counts must be >= 1");
        w_ = Tensor::zeros({out_ch, in_ch, 9});
        b_ = Tensor::zeros({out_ch});
        gw_ = Tensor::zeros({out_ch, in_ch, 9});
        gb_ = Tensor::zeros({out_ch});
    }

    Tensor forward(const Tensor& x, Rng*, bool) override {
        if (x.shape.size() != 3 || x.shape[0] != in_ch_)
            throw std::runtime_error("conv expects input (" + std::to_string(in_ch_) +
                                     ",H,W), got " + x.shape_str());
        const std::size_t H = x.shape[1], W = x.shape[2];
        cache_ = x;
        Tensor out = Tensor::zeros({out_ch_, H, W});
        for (std::size_t oc = 0; oc < out_ch_; ++oc) {
            const double* wk = &w_.v[oc * in_ch_ * 9];
            for (std::size_t ic = 0; ic < in_ch_; ++ic) {
                const double* wi = wk + ic * 9;
                const double* xi = &x.v[ic * H * W];
                double* oo = &out.v[oc * H * W];
                for (std::size_t y = 0; y < H; ++y) {
                    for (std::size_t xx = 0; xx < W; ++xx) {
                        double acc = 0.0;
                        for (int dy = -1; dy <= 1; ++dy) {
                            const long sy = static_cast<long>(y) + dy;
                            if (sy < 0 || sy >= static_cast<long>(H)) continue;
                            for (int dx = -1; dx <= 1; ++dx) {
                                const long sx = static_cast<long>(xx) + dx;
                                if (sx < 0 || sx >= static_cast<long>(W)) continue;
                                acc += wi[(dy + 1) * 3 + (dx + 1)] * xi[sy * W + sx];
                            }
                        }
                        oo[y * W + xx] += acc;
                    }
                }
            }
            double* oo = &out.v[oc * H * W];
            for (std::size_t i = 0; i < H * W; ++i) oo[i] += b_.v[oc];
        }
        return out;
    }

    Tensor backward(const Tensor& g) override {
        const std::size_t H = cache_.shape[1], W = cache_.shape[2];
        Tensor gx = Tensor::zeros(cache_.shape);
        for (std::size_t oc = 0; oc < out_ch_; ++oc) {
            const double* go = &g.v[oc * H * W];
            double gbacc = 0.0;
            for (std::size_t i = 0; i < H * W; ++i) gbacc += go[i];
            gb_.v[oc] += gbacc;
            for (std::size_t ic = 0; ic < in_ch_; ++ic) {
                const double* xi = &cache_.v[ic * H * W];
                const double* wi = &w_.v[(oc * in_ch_ + ic) * 9];
                double* gwi = &gw_.v[(oc * in_ch_ + ic) * 9];
                double* gxi = &gx.v[ic * H * W];
                for (std::size_t y = 0; y < H; ++y) {
                    for (std::size_t xx = 0; xx < W; ++xx) {
                        const double gv = go[y * W + xx];
                        if (gv == 0.0) continue;
                        for (int dy = -1; dy <= 1; ++dy) {
                            const long sy = static_cast<long>(y) + dy;
                            if (sy < 0 || sy >= static_cast<long>(H)) continue;
                            for (int dx = -1; dx <= 1; ++dx) {
                                const long sx = static_cast<long>(xx) + dx;
                                if (sx < 0 || sx >= static_cast<long>(W)) continue;
                                const int d = (dy + 1) * 3 + (dx + 1);
                                gwi[d] += gv * xi[sy * W + sx];
                                gxi[sy * W + sx] += gv * wi[d];
                            }
                        }
                    }
                }
            }
        }
        return gx;
    }

    std::vector<Tensor*> params() override { return {&w_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }
    std::string kind() const override { return "conv"; }
    nlohmann::json spec() const override {
        return {{"kind", "conv"}, {"in", in_ch_}, {"out", out_ch_}};
    }
    std::unique_ptr<Layer> clone() const override {
        auto c = std::make_unique<ConvLayer>(in_ch_, out_ch_);
        c->w_ = w_;
        c->b_ = b_;
        return c;
    }

private:
    std::size_t in_ch_, out_ch_;
    Tensor w_, b_, gw_, gb_;
    Tensor cache_;
};

class ReluLayer final : public Layer {
public:
    Tensor forward(const Tensor& x, Rng*, bool) override {
        mask_.assign(x.v.size(), 0);
        Tensor out = x;
        for (std::size_t i = 0; i < out.v.size(); ++i) {
            if (out.v[i] > 0.0) mask_[i] = 1;
            else out.v[i] = 0.0;
        }
        return out;
    }
    Tensor backward(const Tensor& g) override {
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.v.size(); ++i)
            if (!mask_[i]) gx.v[i] = 0.0;
        return gx;
    }
    std::string kind() const override { return "relu"; }
    nlohmann::json spec() const override { return {{"kind", "relu"}}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluLayer>(); }

private:
    std::vector<char> mask_;
};

class MaxPoolLayer final : public Layer {
public:
    Tensor forward(const Tensor& x, Rng*, bool) override {
        if (x.shape.size() != 3 || x.shape[1] % 2 != 0 || x.shape[2] % 2 != 0)
            throw std::runtime_error("maxpool expects (C,H,W) with even H,W, got " + x.shape_str());
        const std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2];
        in_shape_ = x.shape;
        Tensor out = Tensor::zeros({C, H / 2, W / 2});
        argmax_.assign(out.v.size(), 0);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < H; y += 2) {
                for (std::size_t xx = 0; xx < W; xx += 2) {
                    std::size_t best = (c * H + y) * W + xx;
                    // first-in-window wins on ties: fixed scan order
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            std::size_t idx = (c * H + y + dy) * W + xx + dx;
                            if (x.v[idx] > x.v[best]) best = idx;
                        }
                    std::size_t o = (c * (H / 2) + y / 2) * (W / 2) + xx / 2;
                    out.v[o] = x.v[best];
                    argmax_[o] = best;
                }
            }
        }
        return out;
    }
    Tensor backward(const Tensor& g) override {
        Tensor gx = Tensor::zeros(in_shape_);
        for (std::size_t o = 0; o < g.v.size(); ++o)
            gx.v[argmax_[o]] += g.v[o];
        return gx;
    }
    std::string kind() const override { return "maxpool"; }
    nlohmann::json spec() const override { return {{"kind", "maxpool"}}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(); }

private:
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> argmax_;
};

class DropoutLayer final : public Layer {
public:
    explicit DropoutLayer(double rate) : rate_(rate) {
        if (rate < 0.0 || rate >= 1.0)
            throw std::invalid_argument("dropout rate must be in [0,1)");
    }
    Tensor forward(const Tensor& x, Rng* rng, bool train) override {
        if (!train || rate_ == 0.0) {
            mask_.clear(); // infer mode: exact identity
            return x;
        }
        if (!rng)
            throw std::runtime_error("dropout in train mode needs an rng stream");
        // inverted dropout: scale kept units by 1/(1-rate) at train time
        const double scale = 1.0 / (1.0 - rate_);
        mask_.assign(x.v.size(), 0.0);
        Tensor out = x;
        for (std::size_t i = 0; i < out.v.size(); ++i) {
            if (rng->uniform() >= rate_) mask_[i] = scale;
            out.v[i] *= mask_[i];
        }
        return out;
    }
    Tensor backward(const Tensor& g) override {
        if (mask_.empty()) return g;
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] *= mask_[i];
        return gx;
    }
    double rate() const { return rate_; }
    std::string kind() const override { return "dropout"; }
    nlohmann::json spec() const override { return {{"kind", "dropout"}, {"rate", rate_}}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(rate_); }

private:
    double rate_;
    std::vector<double> mask_;
};

class DenseLayer final : public Layer {
public:
    DenseLayer(std::size_t in_features, std::size_t out_features)
        : in_(in_features), out_(out_features) {
        w_ = Tensor::zeros({out_, in_});
        b_ = Tensor::zeros({out_});
        gw_ = Tensor::zeros({out_, in_});
        gb_ = Tensor::zeros({out_});
    }
    Tensor forward(const Tensor& x, Rng*, bool) override {
        if (x.count() != in_)
            throw std::runtime_error("dense expects " + std::to_string(in_) +
                                     " inputs, got " + x.shape_str());
        cache_ = x; // flattening is implicit
        Tensor out = Tensor::zeros({out_});
        for (std::size_t o = 0; o < out_; ++o) {
            const double* wr = &w_.v[o * in_];
            double acc = b_.v[o];
            for (std::size_t i = 0; i < in_; ++i) acc += wr[i] * x.v[i];
            out.v[o] = acc;
        }
        return out;
    }
    Tensor backward(const Tensor& g) override {
        Tensor gx = Tensor::zeros(cache_.shape);
        for (std::size_t o = 0; o < out_; ++o) {
            const double gv = g.v[o];
            gb_.v[o] += gv;
            double* gwr = &gw_.v[o * in_];
            const double* wr = &w_.v[o * in_];
            for (std::size_t i = 0; i < in_; ++i) {
                gwr[i] += gv * cache_.v[i];
                gx.v[i] += gv * wr[i];
            }
        }
        return gx;
    }
    std::size_t out_features() const { return out_; }
    std::vector<Tensor*> params() override { return {&w_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }
    std::string kind() const override { return "dense"; }
    nlohmann::json spec() const override {
        return {{"kind", "dense"}, {"in", in_}, {"out", out_}};
    }
    std::unique_ptr<Layer> clone() const override {
        auto c = std::make_unique<DenseLayer>(in_, out_);
        c->w_ = w_;
        c->b_ = b_;
        return c;
    }

private:
    std::size_t in_, out_;
    Tensor w_, b_, gw_, gb_;
    Tensor cache_;
};

class SoftmaxLayer final : public Layer {
public:
    Tensor forward(const Tensor& x, Rng*, bool) override {
        logits_.assign(x.v.begin(), x.v.end());
        PredictedDistribution pd = softmax(logits_);
        Tensor out = Tensor::zeros({x.count()});
        out.v = pd.q;
        return out;
    }
    // Upstream hands us the gradient at the logits directly, so backward
    // is a pass-through.
    Tensor backward(const Tensor& g) override { return g; }
    const std::vector<double>& logits() const { return logits_; }
    std::string kind() const override { return "softmax"; }
    nlohmann::json spec() const override { return {{"kind", "softmax"}}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<SoftmaxLayer>(); }

private:
    std::vector<double> logits_;
};

} // namespace

std::unique_ptr<Layer> make_conv(std::size_t in_ch, std::size_t out_ch) {
    return std::make_unique<ConvLayer>(in_ch, out_ch);
}
std::unique_ptr<Layer> make_relu() { return std::make_unique<ReluLayer>(); }
std::unique_ptr<Layer> make_maxpool() { return std::make_unique<MaxPoolLayer>(); }
std::unique_ptr<Layer> make_dropout(double rate) { return std::make_unique<DropoutLayer>(rate); }
std::unique_ptr<Layer> make_dense(std::size_t in_features, std::size_t out_features) {
    return std::make_unique<DenseLayer>(in_features, out_features);
}
std::unique_ptr<Layer> make_softmax() { return std::make_unique<SoftmaxLayer>(); }

PredictedDistribution Model::forward(const Tensor& input, Rng* rng, bool train) {
    if (layers_.empty() || layers_.back()->kind() != "softmax")
        throw std::runtime_error("model must end in a softmax layer");
    Tensor x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        try {
            x = layers_[i]->forward(x, rng, train);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("layer " + std::to_string(i) + " (" +
                                     layers_[i]->kind() + "): " + e.what());
        }
    }
    auto* sm = static_cast<SoftmaxLayer*>(layers_.back().get());
    PredictedDistribution pd;
    pd.logits = sm->logits();
    pd.q = x.v;
    forward_done_ = true;
    return pd;
}

void Model::backward(const std::vector<double>& grad_at_logits) {
    if (!forward_done_)
        throw std::runtime_error("backward called without a matching forward cache");
    if (grad_at_logits.size() != output_size())
        throw std::runtime_error("gradient size does not match model output");
    Tensor g = Tensor::zeros({grad_at_logits.size()});
    g.v = grad_at_logits;
    for (std::size_t i = layers_.size(); i-- > 0;)
        g = layers_[i]->backward(g);
    forward_done_ = false;
}

void Model::zero_grads() {
    for (auto& l : layers_)
        for (Tensor* g : l->grads()) g->fill(0.0);
}

std::vector<Tensor*> Model::parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* p : l->params()) out.push_back(p);
    return out;
}

std::vector<Tensor*> Model::gradients() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* g : l->grads()) out.push_back(g);
    return out;
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        for (Tensor* p : const_cast<Layer&>(*l).params()) n += p->count();
    return n;
}

std::size_t Model::conv_layer_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        if (l->kind() == "conv") ++n;
    return n;
}

bool Model::has_active_dropout() const {
    for (const auto& l : layers_)
        if (l->kind() == "dropout" &&
            static_cast<const DropoutLayer&>(*l).rate() > 0.0)
            return true;
    return false;
}

std::size_t Model::output_size() const {
    for (std::size_t i = layers_.size(); i-- > 0;)
        if (layers_[i]->kind() == "dense")
            return static_cast<const DenseLayer&>(*layers_[i]).out_features();
    throw std::runtime_error("model has no dense layer");
}

void Model::init_params(Rng& rng) {
    for (auto& l : layers_) {
        auto ps = l->params();
        if (ps.empty()) continue;
        // He fan-in scaling; ps[0] = weights, ps[1] = biases (zeroed)
        std::size_t fan_in = 1;
        const auto& ws = ps[0]->shape;
        for (std::size_t d = 1; d < ws.size(); ++d) fan_in *= ws[d];
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (double& w : ps[0]->v) w = rng.normal() * stddev;
        ps[1]->fill(0.0);
    }
}

Model Model::clone() const {
    Model m;
    for (const auto& l : layers_) m.add(l->clone());
    return m;
}

nlohmann::json Model::spec_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& l : layers_) arr.push_back(l->spec());
    return arr;
}

Model Model::from_spec(const nlohmann::json& spec) {
    Model m;
    for (const auto& s : spec) {
        const std::string kind = s.at("kind").get<std::string>();
        if (kind == "conv")
            m.add(make_conv(s.at("in").get<std::size_t>(), s.at("out").get<std::size_t>()));
        else if (kind == "relu")
            m.add(make_relu());
        else if (kind == "maxpool")
            m.add(make_maxpool());
        else if (kind == "dropout")
            m.add(make_dropout(s.at("rate").get<double>()));
        else if (kind == "dense")
            m.add(make_dense(s.at("in").get<std::size_t>(), s.at("out").get<std::size_t>()));
        else if (kind == "softmax")
            m.add(make_softmax());
        else
            throw std::runtime_error("unknown layer kind in spec: " + kind);
    }
    return m;
}

Model build_vgg13(std::size_t input_size, std::size_t k) {
    Model m;
    const std::size_t widths[4] = {64, 128, 256, 256};
    const std::size_t convs_per_block[4] = {2, 2, 3, 3};
    std::size_t ch = 1;
    std::size_t spatial = input_size;
    for (int b = 0; b < 4; ++b) {
        for (std::size_t c = 0; c < convs_per_block[b]; ++c) {
            m.add(make_conv(ch, widths[b]));
            m.add(make_relu());
            ch = widths[b];
        }
        m.add(make_maxpool());
        m.add(make_dropout(0.25));
        spatial /= 2;
    }
    std::size_t flat = ch * spatial * spatial;
    m.add(make_dense(flat, 1024));
    m.add(make_relu());
    m.add(make_dropout(0.50));
    m.add(make_dense(1024, 1024));
    m.add(make_relu());
    m.add(make_dropout(0.50));
    m.add(make_dense(1024, k));
    m.add(make_softmax());
    return m;
}

Model build_toy(std::size_t input_size, std::size_t k, std::size_t blocks) {
    if (blocks < 1) throw std::invalid_argument("toy model needs >= 1 block");
    Model m;
    std::size_t ch = 1;
    std::size_t width = 8;
    std::size_t spatial = input_size;
    for (std::size_t b = 0; b < blocks; ++b) {
        m.add(make_conv(ch, width));
        m.add(make_relu());
        m.add(make_conv(width, width));
        m.add(make_relu());
        m.add(make_maxpool());
        m.add(make_dropout(0.25));
        ch = width;
        width *= 2;
        if (spatial % 2 != 0)
            throw std::invalid_argument("input size not divisible through " +
                                        std::to_string(blocks) + " pooling stages");
        spatial /= 2;
    }
    m.add(make_dense(ch * spatial * spatial, 64));
    m.add(make_relu());
    m.add(make_dropout(0.25));
    m.add(make_dense(64, k));
    m.add(make_softmax());
    return m;
}

GradCheckReport gradient_check(Model& model,
                               const Tensor& input,
                               const LabelDistribution& dist,
                               const Scheme& scheme,
                               Rng& rng,
                               bool train_mode,
                               double eps,
                               std::size_t max_coords) {
    if (train_mode && model.has_active_dropout())
        throw std::invalid_argument(
            "gradient check refuses train mode with active dropout (stochastic loss)");

    PredictedDistribution base = model.forward(input, nullptr, train_mode);

    // Freeze the scheme target from the unperturbed pass so the checked
    // function is smooth in the parameters.
    std::optional<TrainingTarget> frozen;
    if (scheme.id == SchemeId::PLD) {
        frozen = draw_pld(dist, rng);
    } else if (scheme.id == SchemeId::ML) {
        TrainingTarget t;
        t.kind = TrainingTarget::Kind::OneHot;
        t.index = loss_ml(dist, base, scheme.ml_theta).chosen;
        frozen = t;
    }

    model.zero_grads();
    model.backward(grad_logits(scheme, dist, base, frozen));

    std::vector<Tensor*> params = model.parameters();
    std::vector<Tensor*> grads = model.gradients();

    std::size_t total = 0;
    for (Tensor* p : params) total += p->count();
    std::vector<std::pair<std::size_t, std::size_t>> coords; // (tensor, index)
    if (max_coords == 0 || max_coords >= total) {
        coords.reserve(total);
        for (std::size_t ti = 0; ti < params.size(); ++ti)
            for (std::size_t i = 0; i < params[ti]->count(); ++i)
                coords.emplace_back(ti, i);
    } else {
        for (std::size_t n = 0; n < max_coords; ++n) {
            std::size_t flat = rng.uniform_int(total);
            std::size_t ti = 0;
            while (flat >= params[ti]->count()) flat -= params[ti++]->count();
            coords.emplace_back(ti, flat);
        }
    }

    GradCheckReport rep;
    for (auto [ti, i] : coords) {
        Tensor& p = *params[ti];
        const Tensor& g = *grads[ti];
        {
            const double saved = p.v[i];
            p.v[i] = saved + eps;
            double lp = scheme_loss(scheme, dist, model.forward(input, nullptr, train_mode), frozen);
            p.v[i] = saved - eps;
            double lm = scheme_loss(scheme, dist, model.forward(input, nullptr, train_mode), frozen);
            p.v[i] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double analytic = g.v[i];
            const double rel = std::fabs(analytic - numeric) /
                               std::max({std::fabs(analytic), std::fabs(numeric), 1.0});
            ++rep.checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_tensor = ti;
                rep.worst_coord = i;
                rep.analytic = analytic;
                rep.numeric = numeric;
            }
        }
    }
    (void)total;
    return rep;
}

} // namespace ferkit
