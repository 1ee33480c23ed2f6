#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "flip/classifier.hpp"
#include "flip/error.hpp"
#include "flip/image.hpp"
#include "flip/superpixel.hpp"
#include "flip/tensor.hpp"
#include "flip/util.hpp"
#include "flip/wasserstein.hpp"

namespace flip {

enum class Action : int { Erase = 0, Pass = 1 };

constexpr int kObsSize = 64;

struct RewardConfig {
    double theta = 25.0;       // Wasserstein threshold, intensity units
    double beta = 0.05;        // terminal nodule-score threshold
    int max_traversals = 2;    // N
    double idr_penalty = 1.0;  // magnitude of the thr() punishment
    bool idr_enabled = true;   // thr term off = CSR-only ablation

    void validate() const {
        if (theta <= 0) throw ParamError("reward: theta must be > 0");
        if (beta <= 0 || beta >= 1) throw ParamError("reward: beta must be in (0,1)");
        if (max_traversals < 1) throw ParamError("reward: max traversals must be >= 1");
    }
};

// One 64x64 view; observations share frames, episodes allocate each frame once.
struct Frame {
    std::array<std::uint8_t, kObsSize * kObsSize> px;
};
using FramePtr = std::shared_ptr<const Frame>;

// Six stacked frames: agent 1's last three views then agent 2's. Stage-2
// observations carry the coarse-mask crop as a 7th conditioning channel.
struct Observation {
    std::array<FramePtr, 6> frames;
    FramePtr conditioning;

    int channels() const { return conditioning ? 7 : 6; }

    Tensor<float> to_tensor() const {
        Tensor<float> t({channels(), kObsSize, kObsSize});
        for (int f = 0; f < 6; ++f)
            for (int i = 0; i < kObsSize * kObsSize; ++i)
                t.data[static_cast<std::size_t>(f) * kObsSize * kObsSize + i] = frames[f]->px[i] / 255.0f;
        if (conditioning)
            for (int i = 0; i < kObsSize * kObsSize; ++i)
                t.data[6 * static_cast<std::size_t>(kObsSize) * kObsSize + i] = conditioning->px[i] / 255.0f;
        return t;
    }
};

// R = sgn(Sc_{t-1} - Sc_t) + thr(W, theta); thr punishes an erasure whose
// Wasserstein shift of the erased-region distribution exceeds theta. Pass
// actions have W = 0 by definition.
inline double step_reward(double sc_before, double sc_after, double w, const RewardConfig& cfg) {
    const double csr = sc_before > sc_after ? 1.0 : (sc_before < sc_after ? -1.0 : 0.0);
    const double idr = (cfg.idr_enabled && w > cfg.theta) ? -cfg.idr_penalty : 0.0;
    return csr + idr;
}

enum class Termination { None, Flip, TraversalLimit };

struct TraceRow {
    int step = 0;
    int agent = 0;       // 0 or 1
    int superpixel = 0;  // label acted on
    Action action = Action::Pass;
    double score = 0;        // Sc_t after the action
    double wasserstein = 0;  // W(I_{t-1}, I_t); 0 for pass
    double reward = 0;
    long long erased_px = 0;  // cumulative
    double dice = -1;         // vs GT; filled by the pipeline when GT is known
};

struct StepResult {
    Observation obs;
    double reward = 0;
    bool done = false;
};

// Superpixel-erasing environment over one bbox. Two agents alternate; each
// walks its half of the traversal order, at most `max_traversals` passes.
// Erasing replaces the superpixel's pixels with the pseudo-background and
// updates the nodule score and the erased-region intensity histogram (source
// intensities; 256 bins).
class ErasureEnv {
public:
    ErasureEnv(const GrayImage& source, const GrayImage& background, const BoundingBox& box,
               const SuperpixelMap& map, const ClassifierModel& model, const RewardConfig& cfg,
               const Mask* conditioning_mask = nullptr)
        : source_(&source),
          background_(&background),
          box_(box),
          map_(&map),
          model_(&model),
          cfg_(cfg),
          cond_mask_(conditioning_mask) {
        cfg_.validate();
        if (!background.same_shape(source))
            throw ParamError("env: background/source shape mismatch");
        if (map.w != box.w || map.h != box.h)
            throw ParamError("env: superpixel map does not cover the bbox");
        if (map.order.empty()) throw ParamError("env: traversal order not assigned");
        if (box.x0 < 0 || box.y0 < 0 || box.x0 + box.w > source.width || box.y0 + box.h > source.height)
            throw ParamError("env: bbox outside the image");
        if (cond_mask_ && (cond_mask_->width != source.width || cond_mask_->height != source.height))
            throw ParamError("env: conditioning mask shape mismatch");
    }

    std::pair<Observation, Observation> reset() {
        working_ = *source_;
        erased_.assign(map_->count + 1, false);
        hist_.fill(0);
        erased_px_ = 0;
        steps_ = 0;
        done_ = false;
        termination_ = Termination::None;
        trace_.clear();
        score_ = nodule_score(*model_, working_, box_);
        for (int k = 0; k < 2; ++k) {
            auto& a = agents_[k];
            a.schedule = map_->schedule(k);
            a.cursor = 0;
            a.traversals_done = 0;
            a.finished = a.schedule.empty();
            a.view_label = a.schedule.empty() ? 1 : a.schedule[0];
            const FramePtr f = make_frame(a.view_label);
            a.history = {f, f, f};
        }
        if (score_ < cfg_.beta) {
            done_ = true;
            termination_ = Termination::Flip;
        }
        return {observe(0), observe(1)};
    }

    StepResult step(int agent, Action action) {
        if (done_) throw StateError("env: step after episode done");
        if (agent < 0 || agent > 1) throw ParamError("env: agent id must be 0 or 1");
        AgentState& a = agents_[agent];
        if (a.finished) throw StateError("env: agent schedule exhausted");

        const int sp = a.schedule[a.cursor];
        const double sc_before = score_;
        double w = 0;
        if (action == Action::Erase) {
            w = erase_superpixel(sp);
            score_ = nodule_score(*model_, working_, box_);
            AgentState& other = agents_[1 - agent];
            if (!other.finished && other.schedule[other.cursor] == sp) advance(other, false);
        }
        const double reward = step_reward(sc_before, score_, w, cfg_);

        advance(a, true);
        ++steps_;
        if (score_ < cfg_.beta) {
            done_ = true;
            termination_ = Termination::Flip;
        } else if (agents_[0].finished && agents_[1].finished) {
            done_ = true;
            termination_ = Termination::TraversalLimit;
        }

        a.view_label = a.finished ? a.view_label : a.schedule[a.cursor];
        a.history = {a.history[1], a.history[2], make_frame(a.view_label)};

        trace_.push_back({steps_, agent, sp, action, score_, w, reward, erased_px_, -1});
        return {observe(agent), reward, done_};
    }

    // Current stacked observation; the conditioning channel (stage 2) is
    // windowed on the given agent's current superpixel.
    Observation observe(int agent) const {
        Observation o;
        for (int i = 0; i < 3; ++i) {
            o.frames[i] = agents_[0].history[i];
            o.frames[3 + i] = agents_[1].history[i];
        }
        if (cond_mask_) o.conditioning = make_cond_frame(agents_[agent].view_label);
        return o;
    }

    bool done() const { return done_; }
    bool agent_finished(int k) const { return agents_[k].finished; }
    Termination termination() const { return termination_; }
    double score() const { return score_; }
    int steps() const { return steps_; }
    long long erased_pixels() const { return erased_px_; }
    const std::vector<TraceRow>& trace() const { return trace_; }
    const GrayImage& working_image() const { return working_; }
    const BoundingBox& box() const { return box_; }
    const SuperpixelMap& map() const { return *map_; }

    bool is_erased(int label) const { return erased_[label]; }

    // image-sized binary mask of everything erased so far
    Mask erased_mask() const {
        Mask m(source_->width, source_->height);
        for (int l = 1; l <= map_->count; ++l) {
            if (!erased_[l]) continue;
            for (int p : map_->pixels[l])
                m.at(box_.x0 + p % map_->w, box_.y0 + p / map_->w) = 1;
        }
        return m;
    }

    std::vector<double> erased_histogram() const {
        std::vector<double> h(256, 0.0);
        if (erased_px_ == 0) return h;
        for (int i = 0; i < 256; ++i) h[i] = static_cast<double>(hist_[i]) / static_cast<double>(erased_px_);
        return h;
    }

    // Recomputes the working image and histogram from scratch and compares
    // with the incrementally maintained state.
    bool check_consistency() const {
        GrayImage ref = *source_;
        std::array<long long, 256> hist{};
        long long npx = 0;
        for (int l = 1; l <= map_->count; ++l) {
            if (!erased_[l]) continue;
            for (int p : map_->pixels[l]) {
                const int x = box_.x0 + p % map_->w, y = box_.y0 + p / map_->w;
                ref.at(x, y) = background_->at(x, y);
                ++hist[source_->at(x, y)];
                ++npx;
            }
        }
        return ref.data == working_.data && hist == hist_ && npx == erased_px_;
    }

private:
    struct AgentState {
        std::vector<int> schedule;
        std::size_t cursor = 0;
        int traversals_done = 0;
        bool finished = false;
        int view_label = 1;
        std::array<FramePtr, 3> history;
    };

    double erase_superpixel(int sp) {
        std::vector<double> prev;
        if (erased_px_ > 0) prev = erased_histogram();
        for (int p : map_->pixels[sp]) {
            const int x = box_.x0 + p % map_->w, y = box_.y0 + p / map_->w;
            working_.at(x, y) = background_->at(x, y);
            ++hist_[source_->at(x, y)];
        }
        erased_px_ += static_cast<long long>(map_->pixels[sp].size());
        erased_[sp] = true;
        if (prev.empty()) return 0.0;  // first erasure is never punished
        return wasserstein_1d(prev, erased_histogram());
    }

    // Moves the cursor to the next non-erased superpixel; wrapping past the
    // schedule end completes a traversal. `consumed` marks that the current
    // slot was acted on (vs. invalidated by the other agent's erase).
    void advance(AgentState& a, bool consumed) {
        if (a.finished) return;
        if (consumed) ++a.cursor;
        while (true) {
            while (a.cursor < a.schedule.size() && erased_[a.schedule[a.cursor]]) ++a.cursor;
            if (a.cursor < a.schedule.size()) return;
            ++a.traversals_done;
            if (a.traversals_done >= cfg_.max_traversals) {
                a.finished = true;
                return;
            }
            a.cursor = 0;
        }
    }

    FramePtr make_frame(int label) const {
        auto f = std::make_shared<Frame>();
        fill_window(working_, label, f->px);
        return f;
    }

    FramePtr make_cond_frame(int label) const {
        auto f = std::make_shared<Frame>();
        GrayImage m(cond_mask_->width, cond_mask_->height);
        for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = cond_mask_->data[i] ? 255 : 0;
        fill_window(m, label, f->px);
        return f;
    }

    void fill_window(const GrayImage& img, int label, std::array<std::uint8_t, kObsSize * kObsSize>& out) const {
        const auto& c = map_->centroids[label];
        const int cx = box_.x0 + static_cast<int>(std::lround(c.first));
        const int cy = box_.y0 + static_cast<int>(std::lround(c.second));
        for (int y = 0; y < kObsSize; ++y)
            for (int x = 0; x < kObsSize; ++x)
                out[static_cast<std::size_t>(y) * kObsSize + x] =
                    img.at_clamped(cx - kObsSize / 2 + x, cy - kObsSize / 2 + y);
    }

    const GrayImage* source_;
    const GrayImage* background_;
    BoundingBox box_;
    const SuperpixelMap* map_;
    const ClassifierModel* model_;
    RewardConfig cfg_;
    const Mask* cond_mask_;

    GrayImage working_;
    std::vector<bool> erased_;
    std::array<long long, 256> hist_{};
    long long erased_px_ = 0;
    double score_ = 0;
    int steps_ = 0;
    bool done_ = false;
    Termination termination_ = Termination::None;
    std::array<AgentState, 2> agents_;
    std::vector<TraceRow> trace_;
};

// Episode trace CSV; the dice column appears only when ground truth was
// available (pipeline fills it).
inline std::string trace_csv(const std::vector<TraceRow>& rows, bool with_dice) {
    std::string out = with_dice
                          ? "step,agent,superpixel,action,score,wasserstein,reward,erased_px,dice\n"
                          : "step,agent,superpixel,action,score,wasserstein,reward,erased_px\n";
    for (const auto& r : rows) {
        out += std::to_string(r.step) + "," + std::to_string(r.agent + 1) + "," +
               std::to_string(r.superpixel) + "," + (r.action == Action::Erase ? "erase" : "pass") +
               "," + fmt_double(r.score) + "," + fmt_double(r.wasserstein) + "," +
               fmt_double(r.reward) + "," + std::to_string(r.erased_px);
        if (with_dice) out += "," + fmt_double(r.dice, 4);
        out += "\n";
    }
    return out;
}

inline std::vector<TraceRow> parse_trace_csv(const std::string& text, bool* with_dice = nullptr) {
    const auto lines = split(text, '\n');
    if (lines.empty()) throw DataError("trace csv: empty");
    const bool dice_col = lines[0].find(",dice") != std::string::npos;
    if (with_dice) *with_dice = dice_col;
    std::vector<TraceRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string line = trim(lines[i]);
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != (dice_col ? 9u : 8u))
            throw DataError("trace csv: bad column count on line " + std::to_string(i + 1));
        TraceRow r;
        try {
            r.step = std::stoi(f[0]);
            r.agent = std::stoi(f[1]) - 1;
            r.superpixel = std::stoi(f[2]);
            r.action = f[3] == "erase" ? Action::Erase : Action::Pass;
            r.score = std::stod(f[4]);
            r.wasserstein = std::stod(f[5]);
            r.reward = std::stod(f[6]);
            r.erased_px = std::stoll(f[7]);
            if (dice_col) r.dice = std::stod(f[8]);
        } catch (const std::exception&) {
            throw DataError("trace csv: bad value on line " + std::to_string(i + 1));
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace flip
