#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "flip/data.hpp"
#include "flip/fill.hpp"
#include "flip/image.hpp"
#include "flip/net.hpp"
#include "flip/net_io.hpp"
#include "flip/rng.hpp"
#include "flip/util.hpp"

namespace flip {

constexpr int kClassifierInput = 64;

// 4 conv blocks (8-16-32-32, stride-2 pools) + dense head, 2-way softmax.
inline NetworkSpec classifier_spec() {
    return SpecBuilder({1, kClassifierInput, kClassifierInput})
        .conv(8, 3, 1, 1).relu().maxpool()
        .conv(16, 3, 1, 1).relu().maxpool()
        .conv(32, 3, 1, 1).relu().maxpool()
        .conv(32, 3, 1, 1).relu().maxpool()
        .begin_head().dense(64).relu().dense(2).softmax()
        .build();
}

// Frozen binary nodule-vs-normal-tissue model. Index 0 of the softmax is the
// nodule class.
class ClassifierModel {
public:
    explicit ClassifierModel(Network<float> net) : net_(std::move(net)) {
        if (net_.spec().input_shape != std::vector<int>{1, kClassifierInput, kClassifierInput})
            throw ParamError("classifier: unexpected input shape");
    }

    static ClassifierModel load(const std::string& path) { return ClassifierModel(load_checkpoint(path)); }
    void save(const std::string& path) const { save_checkpoint(path, net_); }

    const Network<float>& net() const { return net_; }

    // probability vector (nodule, normal) for a 64x64 [0,255] float crop
    std::pair<double, double> predict(const std::vector<float>& crop64) const {
        Tensor<float> in({1, kClassifierInput, kClassifierInput});
        for (std::size_t i = 0; i < in.data.size(); ++i) in.data[i] = crop64[i] / 255.0f;
        Workspace<float> ws;
        const auto out = net_.forward(in, ws);
        return {out[0].data[0], out[0].data[1]};
    }

private:
    Network<float> net_;
};

// Nodule probability of the bbox content: crops the (possibly partially
// erased) image, resizes to 64x64 bilinearly, runs the frozen classifier.
inline double nodule_score(const ClassifierModel& model, const GrayImage& img, const BoundingBox& b) {
    BoundingBox c = shift_box(b, 0, 0, img.width, img.height);
    if (c.w < 4 || c.h < 4) throw ParamError("nodule_score: degenerate bbox (< 4 px a side)");
    return model.predict(resize_bilinear(crop(img, c), kClassifierInput, kClassifierInput)).first;
}

struct LabelledCrop {
    std::vector<float> pixels;  // 64x64, [0,255]
    int label = 0;              // 0 = nodule, 1 = normal tissue
};

// Positives: bbox crop and tight-box crop of each phantom. Negatives: a crop
// of the background-filled image at the bbox and one at a random location
// (every crop of the filled image is nodule-free since mask ⊆ bbox).
inline std::vector<LabelledCrop> make_classifier_crops(const LoadedItem& item, Rng& rng) {
    std::vector<LabelledCrop> out;
    const auto resize = [](const GrayImage& img, const BoundingBox& b) {
        return resize_bilinear(crop(img, b), kClassifierInput, kClassifierInput);
    };

    out.push_back({resize(item.image, item.box), 0});
    int mnx = item.mask.width, mny = item.mask.height, mxx = -1, mxy = -1;
    for (int y = 0; y < item.mask.height; ++y)
        for (int x = 0; x < item.mask.width; ++x)
            if (item.mask.at(x, y)) {
                mnx = std::min(mnx, x);
                mny = std::min(mny, y);
                mxx = std::max(mxx, x);
                mxy = std::max(mxy, y);
            }
    if (mxx >= 0 && mxx - mnx >= 3 && mxy - mny >= 3)
        out.push_back({resize(item.image, {mnx, mny, mxx - mnx + 1, mxy - mny + 1}), 0});

    const GrayImage bg = build_background(item.image, item.box);
    out.push_back({resize(bg, item.box), 1});
    BoundingBox rnd = item.box;
    rnd.x0 = rng.uniform_int(0, std::max(0, bg.width - rnd.w));
    rnd.y0 = rng.uniform_int(0, std::max(0, bg.height - rnd.h));
    out.push_back({resize(bg, rnd), 1});
    return out;
}

struct ClassifierTrainConfig {
    int epochs = 18;
    int batch_size = 32;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    std::uint64_t seed = 1;
    int threads = 2;
};

struct EpochLog {
    int epoch;
    double train_loss;
    double val_acc;
};

struct ClassifierTrainResult {
    Network<float> net;
    std::vector<EpochLog> log;
    double best_val_acc = 0;
};

namespace detail {

inline double ce_loss_and_grad(const Tensor<float>& probs, int label, Tensor<float>& dprobs) {
    const double p = std::max(static_cast<double>(probs.data[label]), 1e-12);
    dprobs = Tensor<float>(probs.shape);
    dprobs.data[label] = static_cast<float>(-1.0 / p);
    return -std::log(p);
}

}  // namespace detail

// Cross-entropy training with AdamW; keeps the epoch checkpoint with the
// best validation accuracy. Both classes must be present in the train set.
inline ClassifierTrainResult train_classifier(const std::vector<LabelledCrop>& train,
                                              const std::vector<LabelledCrop>& val,
                                              const ClassifierTrainConfig& cfg) {
    bool has_pos = false, has_neg = false;
    for (const auto& c : train) (c.label == 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw DataError("train_classifier: both classes must be present in the train set");
    if (val.empty()) throw DataError("train_classifier: empty validation set");

    Rng rng(cfg.seed);
    Network<float> net(classifier_spec());
    net.init_he(rng);
    AdamW<float> opt(cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay);

    const auto to_tensor = [](const LabelledCrop& c) {
        Tensor<float> t({1, kClassifierInput, kClassifierInput});
        for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = c.pixels[i] / 255.0f;
        return t;
    };

    std::vector<int> idx(train.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

    ClassifierTrainResult res{net, {}, -1.0};
    std::vector<GradBuffer<float>> sample_gb;
    std::vector<double> sample_loss;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Fisher-Yates with the run RNG; deterministic given the seed
        for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.uniform_int(0, i)]);

        double loss_sum = 0;
        std::size_t loss_n = 0;
        for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            const std::size_t bs = std::min<std::size_t>(cfg.batch_size, idx.size() - start);
            sample_gb.assign(bs, GradBuffer<float>{});
            sample_loss.assign(bs, 0.0);
            parallel_for(bs, cfg.threads, [&](std::size_t j) {
                const LabelledCrop& c = train[idx[start + j]];
                Workspace<float> ws;
                const auto out = net.forward(to_tensor(c), ws);
                Tensor<float> dp;
                sample_loss[j] = detail::ce_loss_and_grad(out[0], c.label, dp);
                for (auto& v : dp.data) v /= static_cast<float>(bs);
                sample_gb[j] = net.make_grad_buffer();
                net.backward(ws, {dp}, sample_gb[j]);
            });
            GradBuffer<float> gb = net.make_grad_buffer();
            for (std::size_t j = 0; j < bs; ++j)
                for (std::size_t g = 0; g < gb.grads.size(); ++g)
                    for (std::size_t e = 0; e < gb.grads[g].data.size(); ++e)
                        gb.grads[g].data[e] += sample_gb[j].grads[g].data[e];
            opt.step(net.params(), gb);
            for (std::size_t j = 0; j < bs; ++j) loss_sum += sample_loss[j];
            loss_n += bs;
            if (!std::isfinite(loss_sum))
                throw TrainingDivergence("classifier training diverged (NaN loss) at epoch " +
                                         std::to_string(epoch));
        }

        std::vector<int> correct(val.size(), 0);
        parallel_for(val.size(), cfg.threads, [&](std::size_t j) {
            Workspace<float> ws;
            const auto out = net.forward(to_tensor(val[j]), ws);
            const int pred = out[0].data[0] >= out[0].data[1] ? 0 : 1;
            correct[j] = pred == val[j].label ? 1 : 0;
        });
        int n_correct = 0;
        for (int c : correct) n_correct += c;
        const double acc = static_cast<double>(n_correct) / static_cast<double>(val.size());
        res.log.push_back({epoch, loss_sum / static_cast<double>(loss_n), acc});
        if (acc > res.best_val_acc) {
            res.best_val_acc = acc;
            res.net.copy_params_from(net);
        }
    }
    return res;
}

inline std::string classifier_log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,train_loss,val_acc\n";
    for (const auto& row : log)
        out += std::to_string(row.epoch) + "," + fmt_double(row.train_loss) + "," +
               fmt_double(row.val_acc) + "\n";
    return out;
}

}  // namespace flip
