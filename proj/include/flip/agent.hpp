#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "flip/data.hpp"
#include "flip/env.hpp"
#include "flip/net.hpp"
#include "flip/pipeline.hpp"
#include "flip/rng.hpp"
#include "flip/util.hpp"

namespace flip {

// Q-network: the classifier trunk shape over stacked observations, one
// 2-value dense head per agent. The trunk is a single parameter storage;
// heads only own their dense stacks.
inline NetworkSpec qnetwork_spec(int channels) {
    return SpecBuilder({channels, kObsSize, kObsSize})
        .conv(8, 3, 1, 1).relu().maxpool()
        .conv(16, 3, 1, 1).relu().maxpool()
        .conv(32, 3, 1, 1).relu().maxpool()
        .conv(32, 3, 1, 1).relu().maxpool()
        .begin_head().dense(64).relu().dense(2)
        .begin_head().dense(64).relu().dense(2)
        .build();
}

struct Transition {
    Observation s;
    Observation s_next;
    Action action = Action::Pass;
    float reward = 0;
    bool done = false;
    int agent = 0;
};

// Ring buffer with proportional-priority sampling (Fenwick tree); a switch
// falls back to uniform sampling. New transitions enter at max priority.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity) : capacity_(capacity), tree_(static_cast<std::size_t>(capacity), 0.0) {
        if (capacity < 1) throw ParamError("replay: capacity must be >= 1");
        prio_.assign(static_cast<std::size_t>(capacity), 0.0);
    }

    int size() const { return static_cast<int>(store_.size()); }
    int capacity() const { return capacity_; }
    const Transition& get(int slot) const { return store_[static_cast<std::size_t>(slot)]; }

    void push(Transition t) {
        const int slot = head_;
        if (size() < capacity_) {
            store_.push_back(std::move(t));
        } else {
            store_[static_cast<std::size_t>(slot)] = std::move(t);
        }
        head_ = (head_ + 1) % capacity_;
        set_priority(slot, max_prio_);
    }

    void set_priority(int slot, double p) {
        p = std::max(p, 1e-12);
        max_prio_ = std::max(max_prio_, p);
        tree_add(slot, p - prio_[static_cast<std::size_t>(slot)]);
        prio_[static_cast<std::size_t>(slot)] = p;
    }

    double priority(int slot) const { return prio_[static_cast<std::size_t>(slot)]; }

    std::vector<int> sample(int batch, Rng& rng, bool uniform) const {
        if (size() < batch) throw StateError("replay: sampling from underfilled buffer");
        std::vector<int> slots(static_cast<std::size_t>(batch));
        if (uniform) {
            for (auto& s : slots) s = rng.uniform_int(0, size() - 1);
            return slots;
        }
        const double total = tree_total();
        for (auto& s : slots) s = std::min(find_prefix(rng.uniform() * total), size() - 1);
        return slots;
    }

private:
    // Fenwick tree over priorities for O(log n) proportional draws.
    void tree_add(int i, double delta) {
        for (int j = i + 1; j <= capacity_; j += j & -j) tree_[static_cast<std::size_t>(j - 1)] += delta;
    }
    double tree_total() const {
        double s = 0;
        for (int j = capacity_; j > 0; j -= j & -j) s += tree_[static_cast<std::size_t>(j - 1)];
        return s;
    }
    // smallest index whose prefix sum exceeds r
    int find_prefix(double r) const {
        int pos = 0;
        int mask = 1;
        while ((mask << 1) <= capacity_) mask <<= 1;
        for (; mask > 0; mask >>= 1) {
            const int next = pos + mask;
            if (next <= capacity_ && tree_[static_cast<std::size_t>(next - 1)] <= r) {
                r -= tree_[static_cast<std::size_t>(next - 1)];
                pos = next;
            }
        }
        return pos;
    }

    int capacity_;
    int head_ = 0;
    double max_prio_ = 1.0;
    std::vector<Transition> store_;
    std::vector<double> prio_;
    std::vector<double> tree_;
};

// epsilon-greedy over the agent's head; exact Q ties break toward Pass
inline Action select_action(const Network<float>& qnet, const Observation& obs, int agent, double eps,
                            Rng& rng) {
    if (eps < 0 || eps > 1) throw ParamError("select_action: eps must be in [0,1]");
    if (eps > 0 && rng.uniform() < eps) return rng.uniform() < 0.5 ? Action::Erase : Action::Pass;
    return greedy_action(qnet, obs, agent);
}

// Double-DQN target: the current network picks a', the target network
// evaluates it. Terminal transitions collapse to the reward.
inline double ddqn_target(double reward, bool done, double gamma,
                          const std::array<double, 2>& q_next_current,
                          const std::array<double, 2>& q_next_target) {
    if (done) return reward;
    const int a = q_next_current[0] > q_next_current[1] ? 0 : 1;
    return reward + gamma * q_next_target[a];
}

inline std::vector<double> q_targets(const std::vector<const Transition*>& batch,
                                     const Network<float>& current, const Network<float>& target,
                                     double gamma, int threads = 1) {
    if (batch.empty()) throw ParamError("q_targets: empty batch");
    std::vector<double> out(batch.size(), 0.0);
    parallel_for(batch.size(), threads, [&](std::size_t j) {
        const Transition& t = *batch[j];
        if (t.done) {
            out[j] = t.reward;
            return;
        }
        Workspace<float> ws;
        std::vector<bool> mask(static_cast<std::size_t>(current.num_heads()), false);
        mask[static_cast<std::size_t>(t.agent)] = true;
        const Tensor<float> sx = t.s_next.to_tensor();
        const auto qc = current.forward(sx, ws, &mask);
        Workspace<float> wst;
        const auto qt = target.forward(sx, wst, &mask);
        out[j] = ddqn_target(t.reward, t.done, gamma,
                             {qc[static_cast<std::size_t>(t.agent)].data[0],
                              qc[static_cast<std::size_t>(t.agent)].data[1]},
                             {qt[static_cast<std::size_t>(t.agent)].data[0],
                              qt[static_cast<std::size_t>(t.agent)].data[1]});
    });
    return out;
}

struct TrainConfig {
    double gamma = 0.9;
    double lr = 3e-4;
    int batch_size = 32;
    int sync_interval = 1200;  // iterations between target-network copies
    double eps_start = 1.0;
    double eps_end = 0.05;
    long eps_decay_steps = 0;  // 0 = 60% of the planned env steps
    int episodes = 150;
    int buffer_capacity = 8000;
    bool prioritized = true;  // false = Eq.-style uniform sampling
    bool huber = true;        // false = plain squared TD loss
    int warmup = 200;         // env steps stored before updates start
    int train_every = 1;      // env steps per training update
    int eval_interval = 15;   // episodes between validation DICE evals
    int eval_max_items = 12;
    std::uint64_t seed = 1;
    int threads = 2;

    void validate() const {
        if (gamma <= 0 || gamma >= 1) throw ParamError("train: gamma must be in (0,1)");
        if (sync_interval < 1) throw ParamError("train: sync interval must be >= 1");
        if (batch_size < 1 || episodes < 1 || buffer_capacity < batch_size)
            throw ParamError("train: bad batch/episode/buffer sizing");
    }
};

struct TrainLogRow {
    long iteration;
    double loss;
    double mean_episode_reward;
    double eps;
    double val_dice;
};

struct AgentTrainResult {
    Network<float> net;
    std::vector<TrainLogRow> log;
    double best_val_dice = -1;
    long iterations = 0;
    long env_steps = 0;
};

inline std::string agent_log_csv(const std::vector<TrainLogRow>& log) {
    std::string out = "iteration,loss,mean_episode_reward,epsilon,val_dice\n";
    for (const auto& r : log)
        out += std::to_string(r.iteration) + "," + fmt_double(r.loss) + "," +
               fmt_double(r.mean_episode_reward) + "," + fmt_double(r.eps, 4) + "," +
               fmt_double(r.val_dice) + "\n";
    return out;
}

namespace detail {

// Lazily built per-item pieces shared by every episode on that item.
struct ItemCache {
    bool ready = false;
    GrayImage background;
    SuperpixelMap map;
    Mask coarse_pred;  // stage 2 only
};

struct EpisodeSetup {
    const LoadedItem* item;
    ItemCache* cache;
};

inline void ensure_cache(const LoadedItem& item, ItemCache& cache, int stage,
                         const SegmentParams& params, const ClassifierModel& classifier,
                         const Network<float>* stage1_net) {
    if (cache.ready) return;
    cache.background = build_background(item.image, item.box);
    const GrayImage region = crop(item.image, item.box);
    const SeedsParams& sp = stage == 1 ? params.coarse_seeds : params.fine_seeds;
    cache.map = assign_traversal(seeds_segment(region, sp), item.box);
    if (stage == 2) {
        const SuperpixelMap cmap = assign_traversal(seeds_segment(region, params.coarse_seeds), item.box);
        ErasureEnv env(item.image, cache.background, item.box, cmap, classifier, params.reward);
        run_greedy_episode(env, *stage1_net);
        cache.coarse_pred = postprocess(env.erased_mask());
    }
    cache.ready = true;
}

}  // namespace detail

// DDQN training over the erasing environment. Alternating rollouts feed the
// replay buffer; every `train_every` env steps one batch is sampled and the
// Huber-smoothed TD loss is minimized on each transition's own head (the
// shared trunk accumulates both heads' gradients). The target network syncs
// every sync_interval iterations. Returns the checkpoint with the best
// validation DICE.
inline AgentTrainResult train_agents(const std::vector<LoadedItem>& train_items,
                                     const std::vector<LoadedItem>& val_items,
                                     const ClassifierModel& classifier, int stage,
                                     const Network<float>* stage1_net, const SegmentParams& params,
                                     const TrainConfig& cfg) {
    cfg.validate();
    if (stage != 1 && stage != 2) throw ParamError("train_agents: stage must be 1 or 2");
    if (stage == 2 && !stage1_net) throw ParamError("train_agents: stage 2 needs the stage-1 network");
    if (train_items.empty() || val_items.empty())
        throw DataError("train_agents: empty train or validation set");

    Rng rng(cfg.seed);
    Network<float> qnet(qnetwork_spec(stage == 1 ? 6 : 7));
    qnet.init_he(rng);
    Network<float> target = qnet;
    AdamW<float> opt(cfg.lr);
    ReplayBuffer buffer(cfg.buffer_capacity);

    const int sp_count =
        stage == 1 ? params.coarse_seeds.requested : params.fine_seeds.requested;
    const long planned_steps = static_cast<long>(cfg.episodes) * (sp_count + 4);
    const long decay_steps =
        cfg.eps_decay_steps > 0 ? cfg.eps_decay_steps : std::max(1L, planned_steps * 6 / 10);

    std::vector<detail::ItemCache> train_cache(train_items.size());
    std::vector<detail::ItemCache> val_cache(val_items.size());

    AgentTrainResult res{qnet, {}, -1.0, 0, 0};
    long env_steps = 0;
    long iterations = 0;
    double loss_acc = 0;
    long loss_n = 0;
    double ep_reward_acc = 0;
    long ep_n = 0;

    std::vector<GradBuffer<float>> sample_gb(static_cast<std::size_t>(cfg.batch_size));
    std::vector<double> sample_loss(static_cast<std::size_t>(cfg.batch_size));
    std::vector<double> sample_td(static_cast<std::size_t>(cfg.batch_size));

    const auto eps_at = [&](long step) {
        const double f = std::min(1.0, static_cast<double>(step) / static_cast<double>(decay_steps));
        return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * f;
    };

    const auto train_step = [&]() {
        const auto slots = buffer.sample(cfg.batch_size, rng, !cfg.prioritized);
        std::vector<const Transition*> batch;
        batch.reserve(slots.size());
        for (int s : slots) batch.push_back(&buffer.get(s));
        const auto targets = q_targets(batch, qnet, target, cfg.gamma, cfg.threads);

        const std::size_t bs = batch.size();
        parallel_for(bs, cfg.threads, [&](std::size_t j) {
            const Transition& t = *batch[j];
            Workspace<float> ws;
            std::vector<bool> mask(static_cast<std::size_t>(qnet.num_heads()), false);
            mask[static_cast<std::size_t>(t.agent)] = true;
            const auto out = qnet.forward(t.s.to_tensor(), ws, &mask);
            const double q = out[static_cast<std::size_t>(t.agent)].data[static_cast<int>(t.action)];
            const double e = targets[j] - q;
            sample_td[j] = e;
            sample_loss[j] = cfg.huber ? huber_value(e) : 0.5 * e * e;
            const double dq = cfg.huber ? -huber_grad(e) : -e;
            std::vector<Tensor<float>> hg(2);
            hg[static_cast<std::size_t>(t.agent)] = Tensor<float>({2});
            hg[static_cast<std::size_t>(t.agent)].data[static_cast<int>(t.action)] =
                static_cast<float>(dq / static_cast<double>(bs));
            sample_gb[j] = qnet.make_grad_buffer();
            qnet.backward(ws, hg, sample_gb[j]);
        });

        GradBuffer<float> gb = qnet.make_grad_buffer();
        double loss = 0;
        for (std::size_t j = 0; j < bs; ++j) {
            loss += sample_loss[j];
            for (std::size_t g = 0; g < gb.grads.size(); ++g)
                for (std::size_t e = 0; e < gb.grads[g].data.size(); ++e)
                    gb.grads[g].data[e] += sample_gb[j].grads[g].data[e];
        }
        loss /= static_cast<double>(bs);
        if (!std::isfinite(loss))
            throw TrainingDivergence("agent training diverged (NaN loss) at iteration " +
                                     std::to_string(iterations + 1));
        opt.step(qnet.params(), gb);
        ++iterations;
        if (cfg.prioritized)
            for (std::size_t j = 0; j < bs; ++j)
                buffer.set_priority(slots[j], std::abs(sample_td[j]) + 1e-3);
        if (iterations % cfg.sync_interval == 0) target.copy_params_from(qnet);
        loss_acc += loss;
        ++loss_n;
    };

    const auto validate = [&]() {
        const std::size_t n = std::min<std::size_t>(val_items.size(), cfg.eval_max_items);
        std::vector<double> dices(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            detail::ensure_cache(val_items[i], val_cache[i], stage, params, classifier, stage1_net);
        parallel_for(n, cfg.threads, [&](std::size_t i) {
            const auto& item = val_items[i];
            auto& cache = val_cache[i];
            ErasureEnv env(item.image, cache.background, item.box, cache.map, classifier,
                           params.reward, stage == 2 ? &cache.coarse_pred : nullptr);
            run_greedy_episode(env, qnet);
            dices[i] = overlap_metrics(postprocess(env.erased_mask()), item.mask).dice;
        });
        double mean = 0;
        for (double d : dices) mean += d;
        return mean / static_cast<double>(n);
    };

    for (int ep = 1; ep <= cfg.episodes; ++ep) {
        const int item_idx = rng.uniform_int(0, static_cast<int>(train_items.size()) - 1);
        const auto& item = train_items[static_cast<std::size_t>(item_idx)];
        auto& cache = train_cache[static_cast<std::size_t>(item_idx)];
        detail::ensure_cache(item, cache, stage, params, classifier, stage1_net);

        ErasureEnv env(item.image, cache.background, item.box, cache.map, classifier, params.reward,
                       stage == 2 ? &cache.coarse_pred : nullptr);
        env.reset();
        double ep_reward = 0;
        while (!env.done()) {
            for (int k = 0; k < 2 && !env.done(); ++k) {
                if (env.agent_finished(k)) continue;
                const Observation obs = env.observe(k);
                const Action a = select_action(qnet, obs, k, eps_at(env_steps), rng);
                const StepResult sr = env.step(k, a);
                Transition t;
                t.s = obs;
                t.s_next = sr.obs;
                t.action = a;
                t.reward = static_cast<float>(sr.reward);
                t.done = sr.done || env.agent_finished(k);
                t.agent = k;
                buffer.push(std::move(t));
                ep_reward += sr.reward;
                ++env_steps;
                if (buffer.size() >= std::max(cfg.warmup, cfg.batch_size) &&
                    env_steps % cfg.train_every == 0)
                    train_step();
            }
        }
        ep_reward_acc += ep_reward;
        ++ep_n;

        if (ep % cfg.eval_interval == 0 || ep == cfg.episodes) {
            const double vd = validate();
            res.log.push_back({iterations, loss_n ? loss_acc / loss_n : 0.0,
                               ep_n ? ep_reward_acc / ep_n : 0.0, eps_at(env_steps), vd});
            loss_acc = 0;
            loss_n = 0;
            ep_reward_acc = 0;
            ep_n = 0;
            if (vd > res.best_val_dice) {
                res.best_val_dice = vd;
                res.net.copy_params_from(qnet);
            }
        }
    }
    res.iterations = iterations;
    res.env_steps = env_steps;
    return res;
}

}  // namespace flip
