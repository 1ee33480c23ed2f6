// Acceptance suite: one pass/fail line per criterion. Heavy criteria reuse
// trained artifacts from the work directory when present; delete it to force
// a full retrain.
//
// usage: acceptance [workdir] [comma-separated criterion ids]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "flip/agent.hpp"
#include "flip/harness.hpp"
#include "flip/pipeline.hpp"

#include "oracles.hpp"

using namespace flip;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double secs() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// ---- desk-scale run configuration ------------------------------------------------------

constexpr int kThreads = 2;
constexpr std::uint64_t kSeed = 1234;
constexpr int kGroups = 40;
constexpr int kPerGroup = 3;

constexpr int kClassifierEpochs = 18;

constexpr int kStage1Episodes = 120;
constexpr int kStage2Episodes = 60;
constexpr int kStage1TrainEvery = 2;
constexpr int kStage2TrainEvery = 3;

// ---- criterion 1: gradients ------------------------------------------------------------

bool composed_td_loss_gradcheck(double tol, double* worst) {
    // two-head net; batch mixes both heads; loss = mean huber(target - Q(s,a))
    Rng rng(11);
    const auto spec = SpecBuilder({1, 8, 8})
                          .conv(2, 3, 1, 1).relu().maxpool()
                          .begin_head().dense(4).relu().dense(2)
                          .begin_head().dense(4).relu().dense(2)
                          .build();
    Network<double> net(spec);
    net.init_he(rng);

    struct Item {
        Tensor<double> s;
        int action;
        int agent;
        double target;
    };
    std::vector<Item> batch;
    for (int i = 0; i < 6; ++i) {
        Tensor<double> s({1, 8, 8});
        for (auto& v : s.data) v = rng.uniform(-1, 1);
        batch.push_back({std::move(s), i % 2, (i / 2) % 2, rng.uniform(-2, 2)});
    }

    const auto loss_at = [&]() {
        double loss = 0;
        for (const auto& it : batch) {
            Workspace<double> ws;
            const auto out = net.forward(it.s, ws);
            loss += huber_value(it.target - out[static_cast<std::size_t>(it.agent)].data[it.action]);
        }
        return loss / static_cast<double>(batch.size());
    };

    GradBuffer<double> gb = net.make_grad_buffer();
    for (const auto& it : batch) {
        Workspace<double> ws;
        const auto out = net.forward(it.s, ws);
        const double e = it.target - out[static_cast<std::size_t>(it.agent)].data[it.action];
        std::vector<Tensor<double>> hg(2);
        hg[static_cast<std::size_t>(it.agent)] = Tensor<double>({2});
        hg[static_cast<std::size_t>(it.agent)].data[it.action] =
            -huber_grad(e) / static_cast<double>(batch.size());
        net.backward(ws, hg, gb);
    }

    double max_rel = 0;
    auto params = net.params();
    const double h = 1e-3;
    for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t j = 0; j < params[t]->data.size(); ++j) {
            const double orig = params[t]->data[j];
            params[t]->data[j] = orig + h;
            const double lp = loss_at();
            params[t]->data[j] = orig - h;
            const double lm = loss_at();
            params[t]->data[j] = orig;
            const double fd = (lp - lm) / (2 * h);
            const double an = gb.grads[t].data[j];
            max_rel = std::max(max_rel, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
        }
    *worst = max_rel;
    return max_rel < tol;
}

void criterion_gradients() {
    Timer t;
    Rng rng(7);
    double worst = 0;

    const auto check_spec = [&](const NetworkSpec& spec, const std::vector<int>& in_shape,
                                std::uint64_t seed) {
        Network<double> net(spec);
        net.init_he(rng);
        Tensor<double> in(in_shape);
        Rng r2(seed);
        for (auto& v : in.data) v = r2.uniform(-1, 1);
        const auto res = oracle::grad_check(
            net, in, [seed](const std::vector<Tensor<double>>& outs) {
                Rng r(seed + 1);
                double loss = 0;
                std::vector<Tensor<double>> grads;
                for (const auto& o : outs) {
                    Tensor<double> g(o.shape);
                    for (std::size_t i = 0; i < o.data.size(); ++i) {
                        g.data[i] = r.uniform(-1, 1);
                        loss += g.data[i] * o.data[i];
                    }
                    grads.push_back(std::move(g));
                }
                return std::make_pair(loss, std::move(grads));
            });
        worst = std::max(worst, res.max_rel_err);
    };

    check_spec(SpecBuilder({2, 6, 6}).begin_head().conv(3, 3, 1, 1).build(), {2, 6, 6}, 100);
    check_spec(SpecBuilder({1, 7, 7}).begin_head().conv(2, 3, 2, 0).build(), {1, 7, 7}, 101);
    check_spec(SpecBuilder({2, 6, 6}).begin_head().maxpool().dense(3).build(), {2, 6, 6}, 102);
    check_spec(SpecBuilder({6}).begin_head().dense(5).relu().dense(3).softmax().build(), {6}, 103);
    check_spec(SpecBuilder({1, 8, 8})
                   .conv(2, 3, 1, 1).relu().maxpool()
                   .begin_head().dense(4).relu().dense(2)
                   .begin_head().dense(4).relu().dense(2)
                   .build(),
               {1, 8, 8}, 104);

    double td_worst = 0;
    const bool td_ok = composed_td_loss_gradcheck(1e-4, &td_worst);
    worst = std::max(worst, td_worst);
    report(1, "gradient-correctness", worst < 1e-4 && td_ok,
           fmt("max rel err %.2e (tol 1e-4, incl. composed TD loss), %.1fs", worst, t.secs()));
}

// ---- criterion 2: wasserstein oracle ---------------------------------------------------

void criterion_wasserstein() {
    Timer t;
    Rng rng(5);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const int bins = rng.uniform_int(2, 16);
        const auto a = oracle::random_histogram(rng, bins);
        const auto b = oracle::random_histogram(rng, bins);
        worst = std::max(worst, std::abs(wasserstein_1d(a, b) - oracle::emd_1d_greedy(a, b)));
    }
    report(2, "wasserstein-oracle", worst < 1e-9,
           fmt("1000 pairs, max |diff| %.2e (tol 1e-9), %.1fs", worst, t.secs()));
}

// ---- criterion 3: DDQN fixed point -----------------------------------------------------

void criterion_ddqn_fixed_point() {
    Timer t;
    const oracle::TabularMdp mdp{{{1.0, 0.0}, {-1.0, 2.0}}, {{1, 0}, {0, 1}}};
    const double gamma = 0.9;
    const auto qstar = oracle::q_star(mdp, gamma);
    std::array<std::array<double, 2>, 2> q{}, qt{};
    for (int it = 0; it < 4000; ++it) {
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a) {
                const int s2 = mdp.next[s][a];
                const double tgt = ddqn_target(mdp.reward[s][a], false, gamma, {q[s2][0], q[s2][1]},
                                               {qt[s2][0], qt[s2][1]});
                q[s][a] += 0.5 * (tgt - q[s][a]);
            }
        if (it % 25 == 0) qt = q;
    }
    double worst = 0;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) worst = std::max(worst, std::abs(q[s][a] - qstar[s][a]));
    report(3, "ddqn-fixed-point", worst < 1e-3,
           fmt("max |Q - Q*| %.2e (tol 1e-3), %.1fs", worst, t.secs()));
}

// ---- criterion 4: superpixel invariants ------------------------------------------------

void criterion_superpixels() {
    Timer t;
    Rng rng(13);
    bool ok = true;
    std::string why = "ok";
    for (int i = 0; i < 100 && ok; ++i) {
        const int w = rng.uniform_int(16, 56), h = rng.uniform_int(16, 56);
        GrayImage img(w, h);
        for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        const SeedsParams p{rng.uniform_int(2, 40), 2, 16, rng.uniform_int(0, 8)};
        const auto m = seeds_segment(img, p);
        // partition
        std::size_t total = 0;
        for (int l = 1; l <= m.count && ok; ++l) {
            if (m.pixels[l].empty()) {
                ok = false;
                why = "empty label";
            }
            total += m.pixels[l].size();
        }
        if (total != static_cast<std::size_t>(w) * h) {
            ok = false;
            why = "not a partition";
        }
        // connectivity
        for (int l = 1; l <= m.count && ok; ++l) {
            std::vector<int> stack = {m.pixels[l][0]};
            std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
            seen[static_cast<std::size_t>(m.pixels[l][0])] = 1;
            std::size_t cnt = 1;
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int x = p % w, y = p / w;
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
                    const int q = ny[k] * w + nx[k];
                    if (m.labels[static_cast<std::size_t>(q)] == l && !seen[static_cast<std::size_t>(q)]) {
                        seen[static_cast<std::size_t>(q)] = 1;
                        stack.push_back(q);
                        ++cnt;
                    }
                }
            }
            if (cnt != m.pixels[l].size()) {
                ok = false;
                why = "label disconnected";
            }
        }
        // determinism
        if (ok && seeds_segment(img, p).labels != m.labels) {
            ok = false;
            why = "nondeterministic";
        }
    }

    // boundary recall 1.0 on the two-halves image
    GrayImage halves(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) halves.at(x, y) = x < 16 ? 50 : 200;
    const auto m = seeds_segment(halves, {4, 2, 16, 8});
    int miss = 0;
    for (int y = 0; y < 32; ++y) {
        bool found = false;
        for (int dx = -1; dx <= 1 && !found; ++dx)
            for (int dy = -1; dy <= 1 && !found; ++dy) {
                const int x = 15 + dx, yy = y + dy;
                if (x < 0 || x >= 31 || yy < 0 || yy >= 32) continue;
                if (m.label_at(x, yy) != m.label_at(x + 1, yy)) found = true;
            }
        miss += found ? 0 : 1;
    }
    if (miss > 0) {
        ok = false;
        why = "boundary recall < 1";
    }
    report(4, "superpixel-invariants", ok, fmt("%s (100 regions + recall), %.1fs", why.c_str(), t.secs()));
}

// ---- criterion 5: metric oracle --------------------------------------------------------

void criterion_metrics() {
    Timer t;
    Rng rng(17);
    bool exact = true;
    double worst_identity = 0;
    int done = 0;
    while (done < 500) {
        const int w = rng.uniform_int(3, 12), h = rng.uniform_int(3, 12);
        const Mask a = oracle::random_mask(rng, w, h, rng.uniform(0.15, 0.7));
        const Mask b = oracle::random_mask(rng, w, h, rng.uniform(0.15, 0.7));
        if (a.area() == 0 || b.area() == 0) continue;
        const auto got = boundary_metrics(a, b);
        const auto want = oracle::boundary_bruteforce(a, b);
        if (got.hd != want.hd || got.asd != want.asd) exact = false;
        const auto o = overlap_metrics(a, b);
        const double d = o.dice / 100.0;
        if (d > 0) worst_identity = std::max(worst_identity, std::abs(o.jac / 100.0 - d / (2.0 - d)));
        ++done;
    }
    report(5, "metric-oracle", exact && worst_identity < 1e-9,
           fmt("500 pairs exact=%d, jac-dice identity err %.2e, %.1fs", exact ? 1 : 0, worst_identity,
               t.secs()));
}

// ---- shared artifacts ------------------------------------------------------------------

struct Artifacts {
    std::string work;
    std::string data_dir;
    std::string classifier_ckpt;
    std::string stage1_ckpt;
    std::string stage2_ckpt;
    std::string stage1_noidr_ckpt;
};

bool file_exists(const std::string& p) { return std::filesystem::exists(p); }

void ensure_dataset(Artifacts& art) {
    art.data_dir = join_path(art.work, "data");
    if (file_exists(join_path(art.data_dir, "test.txt"))) {
        std::printf("  -- dataset cached at %s\n", art.data_dir.c_str());
        return;
    }
    Timer t;
    GenDataOptions g;
    g.out = art.data_dir;
    g.groups = kGroups;
    g.per_group = kPerGroup;
    g.seed = kSeed;
    g.threads = kThreads;
    run_gen_data(g);
    std::printf("  -- gen-data: %.1fs\n", t.secs());
}

void ensure_classifier(Artifacts& art) {
    const std::string dir = join_path(art.work, "classifier");
    art.classifier_ckpt = join_path(dir, "classifier.ckpt");
    if (file_exists(art.classifier_ckpt)) {
        std::printf("  -- classifier cached\n");
        return;
    }
    Timer t;
    TrainClassifierOptions o;
    o.data = art.data_dir;
    o.out = dir;
    o.epochs = kClassifierEpochs;
    o.seed = kSeed + 1;
    o.threads = kThreads;
    const auto res = run_train_classifier(o);
    std::printf("  -- train-classifier: best val acc %.4f, %.1fs\n", res.best_val_acc, t.secs());
}

TrainAgentsOptions agent_options(const Artifacts& art, int stage, bool idr) {
    TrainAgentsOptions o;
    o.stage = stage;
    o.data = art.data_dir;
    o.classifier = art.classifier_ckpt;
    o.out = join_path(art.work, stage == 1 ? (idr ? "agents1" : "agents1_noidr") : "agents2");
    if (stage == 2) o.stage1 = art.stage1_ckpt;
    o.env.idr = idr;
    o.episodes = stage == 1 ? kStage1Episodes : kStage2Episodes;
    o.train_every = stage == 1 ? kStage1TrainEvery : kStage2TrainEvery;
    o.seed = kSeed + 2;
    o.threads = kThreads;
    return o;
}

void ensure_agents(Artifacts& art) {
    {
        const auto o = agent_options(art, 1, true);
        art.stage1_ckpt = join_path(o.out, "qnet_stage1.ckpt");
        if (!file_exists(art.stage1_ckpt)) {
            Timer t;
            const auto res = run_train_agents(o);
            std::printf("  -- train-agents stage 1: best val DICE %.2f (%ld iters), %.1fs\n",
                        res.best_val_dice, res.iterations, t.secs());
        } else {
            std::printf("  -- stage-1 agents cached\n");
        }
    }
    {
        const auto o = agent_options(art, 2, true);
        art.stage2_ckpt = join_path(o.out, "qnet_stage2.ckpt");
        if (!file_exists(art.stage2_ckpt)) {
            Timer t;
            const auto res = run_train_agents(o);
            std::printf("  -- train-agents stage 2: best val DICE %.2f (%ld iters), %.1fs\n",
                        res.best_val_dice, res.iterations, t.secs());
        } else {
            std::printf("  -- stage-2 agents cached\n");
        }
    }
}

void ensure_noidr_agents(Artifacts& art) {
    const auto o = agent_options(art, 1, false);
    art.stage1_noidr_ckpt = join_path(o.out, "qnet_stage1.ckpt");
    if (file_exists(art.stage1_noidr_ckpt)) {
        std::printf("  -- no-IDR stage-1 agents cached\n");
        return;
    }
    Timer t;
    const auto res = run_train_agents(o);
    std::printf("  -- train-agents stage 1 (IDR off): best val DICE %.2f, %.1fs\n", res.best_val_dice,
                t.secs());
}

// ---- criterion 6: classifier quality ---------------------------------------------------

void criterion_classifier(Artifacts& art) {
    Timer t;
    const auto model = ClassifierModel::load(art.classifier_ckpt);
    const auto val_items = load_dataset(join_path(art.data_dir, "val.txt"));
    const auto test_items = load_dataset(join_path(art.data_dir, "test.txt"));

    // held-out crop accuracy (val + test, never touched by training)
    std::vector<LoadedItem> held;
    held.insert(held.end(), val_items.begin(), val_items.end());
    held.insert(held.end(), test_items.begin(), test_items.end());
    const auto crops = build_crop_set(held, derive_seed(kSeed + 1, 2), kThreads);
    int correct = 0;
    for (const auto& c : crops) {
        const auto [pn, pt] = model.predict(c.pixels);
        correct += ((pn >= pt) == (c.label == 0)) ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(crops.size());

    // unmodified bbox keeps the tag; oracle erase flips it
    int tagged = 0, flipped = 0;
    for (const auto& item : test_items) {
        if (nodule_score(model, item.image, item.box) > 0.5) ++tagged;
        const GrayImage bg = build_background(item.image, item.box);
        GrayImage oracle_erased = item.image;
        for (int y = 0; y < item.mask.height; ++y)
            for (int x = 0; x < item.mask.width; ++x)
                if (item.mask.at(x, y)) oracle_erased.at(x, y) = bg.at(x, y);
        if (nodule_score(model, oracle_erased, item.box) < 0.05) ++flipped;
    }
    const double tag_rate = static_cast<double>(tagged) / test_items.size();
    const double flip_rate = static_cast<double>(flipped) / test_items.size();

    report(6, "classifier-quality", acc >= 0.95 && flip_rate >= 0.90 && tag_rate >= 0.95,
           fmt("held-out acc %.3f (>=0.95), oracle-erase flip %.2f (>=0.90), tag %.2f (>=0.95), %.1fs",
               acc, flip_rate, tag_rate, t.secs()));
}

// ---- criteria 7/8/11: end-to-end segmentation ------------------------------------------

EvaluateOutcome criterion_e2e(Artifacts& art) {
    Timer t;
    EvaluateOptions o;
    o.data = art.data_dir;
    o.split = "test";
    o.classifier = art.classifier_ckpt;
    o.stage1 = art.stage1_ckpt;
    o.stage2 = art.stage2_ckpt;
    o.out = join_path(art.work, "eval");
    o.threads = kThreads;
    const auto out = run_evaluate(o);
    const bool pass = out.dice.n >= 20 && out.dice.mean >= 80.0 && out.dice.mean >= out.coarse_dice.mean;
    report(7, "e2e-desk-scale-dice", pass,
           fmt("fine DICE %.2f (>=80), coarse %.2f (fine>=coarse), n=%d, %.1fs", out.dice.mean,
               out.coarse_dice.mean, out.dice.n, t.secs()));
    return out;
}

void criterion_termination(const EvaluateOutcome& ev) {
    Timer t;
    bool all_terminated = true, non_decreasing = true, flip_below = true;
    int episodes = 0;
    for (const auto& r : ev.results) {
        for (const StageResult* sr : {&r.coarse, &r.fine}) {
            ++episodes;
            if (sr->termination != Termination::Flip && sr->termination != Termination::TraversalLimit)
                all_terminated = false;
            long long prev = 0;
            for (const auto& row : sr->curve) {
                if (row.erased_px < prev) non_decreasing = false;
                prev = row.erased_px;
            }
            if (sr->termination == Termination::Flip && !sr->curve.empty() &&
                sr->curve.back().score >= 0.05)
                flip_below = false;
        }
    }
    report(8, "termination-contract", all_terminated && non_decreasing && flip_below,
           fmt("%d episodes: causes ok=%d, area monotone=%d, flip<beta=%d, %.1fs", episodes,
               all_terminated, non_decreasing, flip_below, t.secs()));
}

void criterion_box_shift(Artifacts& art) {
    Timer t;
    BoxShiftOptions o;
    o.data = art.data_dir;
    o.split = "test";
    o.classifier = art.classifier_ckpt;
    o.stage1 = art.stage1_ckpt;
    o.stage2 = art.stage2_ckpt;
    o.out = join_path(art.work, "boxshift");
    o.bands = "0-10,10-20,20-30";
    o.seed = kSeed + 3;
    o.threads = kThreads;
    const auto out = run_box_shift(o);
    const bool pass = out.bands.size() == 3 && out.bands[0].dice.n >= 20 &&
                      out.bands[2].dice.mean <= out.bands[0].dice.mean;
    report(9, "box-shift-direction", pass,
           fmt("DICE band1 %.2f >= band3 %.2f (n=%d), %.1fs", out.bands[0].dice.mean,
               out.bands[2].dice.mean, out.bands[0].dice.n, t.secs()));
}

// ---- criterion 10: IDR ablation --------------------------------------------------------

double stage1_overseg(const Artifacts& art, const std::string& ckpt) {
    const auto items = load_dataset(join_path(art.data_dir, "test.txt"));
    const auto model = ClassifierModel::load(art.classifier_ckpt);
    const auto qnet = load_checkpoint(ckpt);
    SegmentParams params;  // defaults match the training configuration
    std::vector<double> ratios(items.size());
    parallel_for(items.size(), kThreads, [&](std::size_t i) {
        const auto& item = items[i];
        const GrayImage bg = build_background(item.image, item.box);
        const auto map =
            assign_traversal(seeds_segment(crop(item.image, item.box), params.coarse_seeds), item.box);
        ErasureEnv env(item.image, bg, item.box, map, model, params.reward);
        run_greedy_episode(env, qnet);
        const Mask pred = postprocess(env.erased_mask());
        long long extra = 0, n_gt = 0;
        for (std::size_t p = 0; p < pred.data.size(); ++p) {
            extra += pred.data[p] && !item.mask.data[p] ? 1 : 0;
            n_gt += item.mask.data[p];
        }
        ratios[i] = n_gt ? static_cast<double>(extra) / static_cast<double>(n_gt) : 0.0;
    });
    double mean = 0;
    for (double r : ratios) mean += r;
    return mean / static_cast<double>(ratios.size());
}

void criterion_idr_ablation(Artifacts& art) {
    Timer t;
    ensure_noidr_agents(art);
    const double with_idr = stage1_overseg(art, art.stage1_ckpt);
    const double without_idr = stage1_overseg(art, art.stage1_noidr_ckpt);
    report(10, "idr-ablation-overseg", without_idr > with_idr,
           fmt("|P\\G|/|G|: IDR on %.4f < IDR off %.4f, %.1fs", with_idr, without_idr, t.secs()));
}

// ---- criterion 11: reproducibility -----------------------------------------------------

void criterion_reproducibility(Artifacts& art) {
    Timer t;
    const std::string eval_dir = join_path(art.work, "eval");
    const std::string replay_dir = join_path(art.work, "eval_replay");
    std::filesystem::remove_all(replay_dir);
    run_from_manifest(join_path(eval_dir, "manifest.json"), replay_dir);
    const bool metrics_equal = read_file(join_path(eval_dir, "metrics.csv")) ==
                               read_file(join_path(replay_dir, "metrics.csv"));
    const bool summary_equal = read_file(join_path(eval_dir, "summary.csv")) ==
                               read_file(join_path(replay_dir, "summary.csv"));

    // a second command class: gen-data replay must also be bit-identical
    const std::string gd_replay = join_path(art.work, "data_replay");
    std::filesystem::remove_all(gd_replay);
    run_from_manifest(join_path(art.data_dir, "manifest.json"), gd_replay);
    const bool data_equal = read_file(join_path(art.data_dir, "dataset.txt")) ==
                            read_file(join_path(gd_replay, "dataset.txt"));

    report(11, "manifest-reproducibility", metrics_equal && summary_equal && data_equal,
           fmt("evaluate metrics=%d summary=%d, gen-data=%d (bitwise), %.1fs", metrics_equal,
               summary_equal, data_equal, t.secs()));
}

}  // namespace

int main(int argc, char** argv) {
    const std::string work = argc > 1 ? argv[1] : "acceptance_work";
    std::set<int> enabled;
    if (argc > 2) {
        for (const auto& tok : split(argv[2], ','))
            if (!tok.empty()) enabled.insert(std::stoi(tok));
    }
    const auto on = [&](int id) { return enabled.empty() || enabled.count(id) > 0; };
    ensure_dir(work);
    std::printf("acceptance work dir: %s\n", work.c_str());

    Timer total;
    try {
        if (on(1)) criterion_gradients();
        if (on(2)) criterion_wasserstein();
        if (on(3)) criterion_ddqn_fixed_point();
        if (on(4)) criterion_superpixels();
        if (on(5)) criterion_metrics();

        Artifacts art;
        art.work = work;
        const bool needs_artifacts = on(6) || on(7) || on(8) || on(9) || on(10) || on(11);
        if (needs_artifacts) {
            ensure_dataset(art);
            ensure_classifier(art);
        }
        if (on(6)) criterion_classifier(art);
        if (on(7) || on(8) || on(9) || on(10) || on(11)) ensure_agents(art);
        if (on(7) || on(8)) {
            const auto ev = criterion_e2e(art);
            if (on(8)) criterion_termination(ev);
        }
        if (on(9)) criterion_box_shift(art);
        if (on(10)) criterion_idr_ablation(art);
        if (on(11)) criterion_reproducibility(art);
    } catch (const std::exception& e) {
        std::printf("[FAIL] -- fatal: %s\n", e.what());
        ++g_failures;
    }

    std::printf("%d criterion failure(s), total %.1fs\n", g_failures, total.secs());
    return g_failures == 0 ? 0 : 1;
}
