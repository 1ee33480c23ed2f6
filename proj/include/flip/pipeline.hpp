#pragma once

#include <utility>
#include <vector>

#include "flip/classifier.hpp"
#include "flip/env.hpp"
#include "flip/fill.hpp"
#include "flip/metrics.hpp"
#include "flip/net.hpp"
#include "flip/superpixel.hpp"

namespace flip {

// Keep the largest 4-connected component, then fill interior holes
// (background regions not reachable from the raster border). Empty masks
// pass through unchanged.
inline Mask postprocess(const Mask& mask) {
    const int w = mask.width, h = mask.height;
    if (mask.area() == 0) return mask;

    std::vector<int> comp(mask.data.size(), 0);
    int n_comp = 0;
    std::vector<std::size_t> stack;
    std::vector<long long> comp_size(1, 0);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        if (!mask.data[i] || comp[i]) continue;
        ++n_comp;
        comp_size.push_back(0);
        comp[i] = n_comp;
        stack.assign(1, i);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++comp_size[n_comp];
            const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
                const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
                if (mask.data[q] && !comp[q]) {
                    comp[q] = n_comp;
                    stack.push_back(q);
                }
            }
        }
    }
    int keep = 1;
    for (int c = 2; c <= n_comp; ++c)
        if (comp_size[c] > comp_size[keep]) keep = c;

    Mask out(w, h);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = comp[i] == keep ? 1 : 0;

    // flood the background from the border; anything unreached is a hole
    std::vector<std::uint8_t> outside(out.data.size(), 0);
    stack.clear();
    for (int x = 0; x < w; ++x) {
        for (int y : {0, h - 1}) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            if (!out.data[p] && !outside[p]) {
                outside[p] = 1;
                stack.push_back(p);
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x : {0, w - 1}) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            if (!out.data[p] && !outside[p]) {
                outside[p] = 1;
                stack.push_back(p);
            }
        }
    }
    while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
            const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
            if (!out.data[q] && !outside[q]) {
                outside[q] = 1;
                stack.push_back(q);
            }
        }
    }
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (!out.data[i] && !outside[i]) out.data[i] = 1;
    return out;
}

// argmax over the agent's two Q-values; exact ties break toward Pass
inline Action greedy_action(const Network<float>& qnet, const Observation& obs, int agent) {
    Workspace<float> ws;
    std::vector<bool> mask(qnet.num_heads(), false);
    mask[agent] = true;
    const auto out = qnet.forward(obs.to_tensor(), ws, &mask);
    const float q_erase = out[agent].data[0];
    const float q_pass = out[agent].data[1];
    return q_erase > q_pass ? Action::Erase : Action::Pass;
}

// Alternating greedy rollout until the episode terminates.
inline void run_greedy_episode(ErasureEnv& env, const Network<float>& qnet) {
    env.reset();
    while (!env.done()) {
        for (int k = 0; k < 2 && !env.done(); ++k) {
            if (env.agent_finished(k)) continue;
            env.step(k, greedy_action(qnet, env.observe(k), k));
        }
    }
}

struct StageResult {
    Mask mask;  // post-processed prediction (image-sized)
    std::vector<TraceRow> curve;
    Termination termination = Termination::None;
    int steps = 0;
    double dice = -1;  // vs GT, when available
};

struct C2FResult {
    StageResult coarse;
    StageResult fine;
};

struct SegmentParams {
    SeedsParams coarse_seeds{40, 2, 16, 8};
    SeedsParams fine_seeds{160, 2, 16, 8};
    RewardConfig reward;
};

namespace detail {

// Per-step DICE against GT, replayed from the trace over the superpixel map.
inline void fill_curve_dice(std::vector<TraceRow>& rows, const SuperpixelMap& map,
                            const BoundingBox& box, const Mask& gt) {
    long long n_gt = 0;
    for (auto v : gt.data) n_gt += v;
    long long n_pred = 0, n_inter = 0;
    for (auto& r : rows) {
        if (r.action == Action::Erase) {
            for (int p : map.pixels[r.superpixel]) {
                const int x = box.x0 + p % map.w, y = box.y0 + p / map.w;
                ++n_pred;
                n_inter += gt.at(x, y);
            }
        }
        r.dice = (n_pred + n_gt) == 0 ? 100.0
                                      : 200.0 * static_cast<double>(n_inter) /
                                            static_cast<double>(n_pred + n_gt);
    }
}

}  // namespace detail

inline StageResult make_stage_result(const ErasureEnv& env, const Mask* gt) {
    StageResult sr;
    sr.mask = postprocess(env.erased_mask());
    sr.curve = env.trace();
    sr.termination = env.termination();
    sr.steps = env.steps();
    if (gt) {
        detail::fill_curve_dice(sr.curve, env.map(), env.box(), *gt);
        sr.dice = overlap_metrics(sr.mask, *gt).dice;
    }
    return sr;
}

// Two-stage coarse-to-fine segmentation. Stage 1 erases greedily on the
// coarse superpixel map; stage 2 restarts on the fine map with the coarse
// prediction as a 7th observation channel. Both stages share the classifier
// and the pseudo-background.
inline C2FResult segment_c2f(const GrayImage& image, const BoundingBox& box,
                             const ClassifierModel& classifier, const Network<float>& qnet_stage1,
                             const Network<float>& qnet_stage2, const SegmentParams& params,
                             const Mask* gt = nullptr) {
    if (qnet_stage1.spec().input_shape != std::vector<int>{6, kObsSize, kObsSize})
        throw ParamError("segment_c2f: stage-1 network must take 6x64x64 observations");
    if (qnet_stage2.spec().input_shape != std::vector<int>{7, kObsSize, kObsSize})
        throw ParamError("segment_c2f: stage-2 network must take 7x64x64 observations");

    const GrayImage background = build_background(image, box);
    const GrayImage region = crop(image, box);

    C2FResult out;
    {
        const SuperpixelMap cmap = assign_traversal(seeds_segment(region, params.coarse_seeds), box);
        ErasureEnv env(image, background, box, cmap, classifier, params.reward);
        run_greedy_episode(env, qnet_stage1);
        out.coarse = make_stage_result(env, gt);
    }
    {
        const SuperpixelMap fmap = assign_traversal(seeds_segment(region, params.fine_seeds), box);
        ErasureEnv env(image, background, box, fmap, classifier, params.reward, &out.coarse.mask);
        run_greedy_episode(env, qnet_stage2);
        out.fine = make_stage_result(env, gt);
    }
    return out;
}

}  // namespace flip
