#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "flip/agent.hpp"
#include "flip/classifier.hpp"
#include "flip/data.hpp"
#include "flip/env.hpp"
#include "flip/error.hpp"
#include "flip/manifest.hpp"
#include "flip/metrics.hpp"
#include "flip/pipeline.hpp"
#include "flip/svg.hpp"
#include "flip/util.hpp"

namespace flip {

namespace cfg {

// exact-round-trip double formatting for config snapshots
inline std::string dstr(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Writer {
    std::map<std::string, std::string>& m;
    void operator()(const char* k, const std::string& v) { m[k] = v; }
    void operator()(const char* k, int v) { m[k] = std::to_string(v); }
    void operator()(const char* k, long v) { m[k] = std::to_string(v); }
    void operator()(const char* k, std::uint64_t v) { m[k] = std::to_string(v); }
    void operator()(const char* k, double v) { m[k] = dstr(v); }
    void operator()(const char* k, bool v) { m[k] = v ? "true" : "false"; }
};

struct Reader {
    const std::map<std::string, std::string>& m;
    std::vector<std::string>* known;

    const std::string* find(const char* k) {
        if (known) known->push_back(k);
        const auto it = m.find(k);
        return it == m.end() ? nullptr : &it->second;
    }
    void operator()(const char* k, std::string& v) {
        if (const auto* s = find(k)) v = *s;
    }
    void operator()(const char* k, int& v) {
        if (const auto* s = find(k)) v = std::stoi(*s);
    }
    void operator()(const char* k, long& v) {
        if (const auto* s = find(k)) v = std::stol(*s);
    }
    void operator()(const char* k, std::uint64_t& v) {
        if (const auto* s = find(k)) v = std::stoull(*s);
    }
    void operator()(const char* k, double& v) {
        if (const auto* s = find(k)) v = std::stod(*s);
    }
    void operator()(const char* k, bool& v) {
        if (const auto* s = find(k)) {
            if (*s == "true" || *s == "1")
                v = true;
            else if (*s == "false" || *s == "0")
                v = false;
            else
                throw UsageError(std::string("config key '") + k + "': expected a boolean");
        }
    }
};

template <typename Opt>
std::map<std::string, std::string> to_config(const Opt& o) {
    std::map<std::string, std::string> m;
    Writer w{m};
    Opt copy = o;
    copy.visit(w);
    return m;
}

template <typename Opt>
Opt from_config(const std::map<std::string, std::string>& m) {
    Opt o;
    std::vector<std::string> known;
    Reader r{m, &known};
    try {
        o.visit(r);
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad config value: ") + e.what());
    }
    for (const auto& [k, v] : m) {
        (void)v;
        bool ok = false;
        for (const auto& n : known)
            if (n == k) {
                ok = true;
                break;
            }
        if (!ok) throw UsageError("unknown config key '" + k + "'");
    }
    return o;
}

}  // namespace cfg

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

inline std::string join_path(const std::string& a, const std::string& b) {
    return (std::filesystem::path(a) / b).string();
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOptions {
    std::string out;
    int groups = 40;
    int per_group = 3;
    int canvas = 96;
    int margin = 4;
    double min_contrast = 30.0;
    double train_frac = 0.7;
    double val_frac = 0.1;
    std::uint64_t seed = 1234;
    int threads = 2;

    template <typename F>
    void visit(F&& f) {
        f("out", out);
        f("groups", groups);
        f("per_group", per_group);
        f("canvas", canvas);
        f("margin", margin);
        f("min_contrast", min_contrast);
        f("train_frac", train_frac);
        f("val_frac", val_frac);
        f("seed", seed);
        f("threads", threads);
    }
};

inline RunManifest run_gen_data(const GenDataOptions& opt) {
    if (opt.out.empty()) throw UsageError("gen-data: --out is required");
    if (opt.groups < 3) throw UsageError("gen-data: need at least 3 groups (one per split)");
    if (opt.per_group < 1) throw UsageError("gen-data: per_group must be >= 1");
    if (opt.train_frac <= 0 || opt.val_frac <= 0 || opt.train_frac + opt.val_frac >= 1)
        throw UsageError("gen-data: fractions must be positive with train+val < 1");
    if (opt.canvas < 48) throw UsageError("gen-data: canvas must be at least 48 px");

    ensure_dir(opt.out);
    ensure_dir(join_path(opt.out, "images"));
    ensure_dir(join_path(opt.out, "masks"));

    Rng rng(opt.seed);
    std::vector<GroupParams> group_params;
    group_params.reserve(static_cast<std::size_t>(opt.groups));
    for (int g = 0; g < opt.groups; ++g) group_params.push_back(draw_group_params(rng, opt.canvas));

    // group-level split ("patient level": members of a group never straddle splits)
    std::vector<int> order(static_cast<std::size_t>(opt.groups));
    for (int g = 0; g < opt.groups; ++g) order[static_cast<std::size_t>(g)] = g;
    for (int i = opt.groups - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    int n_train = std::max(1, static_cast<int>(std::lround(opt.train_frac * opt.groups)));
    int n_val = std::max(1, static_cast<int>(std::lround(opt.val_frac * opt.groups)));
    while (n_train + n_val >= opt.groups) (n_train > 1 ? n_train : n_val) -= 1;
    std::vector<int> split_of(static_cast<std::size_t>(opt.groups));  // 0 train, 1 val, 2 test
    for (int i = 0; i < opt.groups; ++i)
        split_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
            i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);

    const std::size_t total = static_cast<std::size_t>(opt.groups) * opt.per_group;
    std::vector<Phantom> phantoms(total);
    std::vector<std::string> errors(total);
    parallel_for(total, opt.threads, [&](std::size_t i) {
        const int g = static_cast<int>(i) / opt.per_group;
        const int j = static_cast<int>(i) % opt.per_group;
        for (int attempt = 0; attempt < 24; ++attempt) {
            const std::uint64_t s = derive_seed(opt.seed, static_cast<std::uint64_t>(g) * 1009 + j +
                                                              static_cast<std::uint64_t>(attempt) * 7777777ULL);
            try {
                phantoms[i] = generate_phantom(
                    spec_from_group(group_params[static_cast<std::size_t>(g)], opt.canvas, opt.margin,
                                    opt.min_contrast, s));
                return;
            } catch (const DataError& e) {
                errors[i] = e.what();
            }
        }
    });
    for (std::size_t i = 0; i < total; ++i)
        if (phantoms[i].image.width == 0)
            throw DataError("gen-data: phantom generation kept failing: " + errors[i]);

    RunManifest man;
    man.command = "gen-data";
    man.config = cfg::to_config(opt);
    man.root_seed = opt.seed;
    man.input_hash = hash_files({});
    man.created_at = now_utc_iso8601();

    std::vector<DatasetItem> splits[3];
    std::vector<DatasetItem> all;
    for (std::size_t i = 0; i < total; ++i) {
        const int g = static_cast<int>(i) / opt.per_group;
        const int j = static_cast<int>(i) % opt.per_group;
        char name[32];
        std::snprintf(name, sizeof(name), "p%03d_%02d", g, j);
        DatasetItem it;
        it.image_path = std::string("images/") + name + ".pgm";
        it.mask_path = std::string("masks/") + name + ".pgm";
        it.box = phantoms[i].box;
        save_image(join_path(opt.out, it.image_path), phantoms[i].image);
        save_mask(join_path(opt.out, it.mask_path), phantoms[i].mask);
        man.outputs.push_back(it.image_path);
        man.outputs.push_back(it.mask_path);
        splits[split_of[static_cast<std::size_t>(g)]].push_back(it);
        all.push_back(it);
    }
    const char* names[3] = {"train.txt", "val.txt", "test.txt"};
    for (int s = 0; s < 3; ++s) {
        write_file(join_path(opt.out, names[s]), encode_dataset_manifest(splits[s]));
        man.outputs.push_back(names[s]);
    }
    write_file(join_path(opt.out, "dataset.txt"), encode_dataset_manifest(all));
    man.outputs.push_back("dataset.txt");
    save_manifest(join_path(opt.out, "manifest.json"), man);
    return man;
}

// ---------------------------------------------------------------------------
// train-classifier

struct TrainClassifierOptions {
    std::string data;
    std::string out;
    int epochs = 18;
    int batch = 32;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    std::uint64_t seed = 7;
    int threads = 2;

    template <typename F>
    void visit(F&& f) {
        f("data", data);
        f("out", out);
        f("epochs", epochs);
        f("batch", batch);
        f("lr", lr);
        f("weight_decay", weight_decay);
        f("seed", seed);
        f("threads", threads);
    }
};

struct TrainClassifierOutcome {
    RunManifest manifest;
    double best_val_acc = 0;
    std::string checkpoint_path;
};

inline std::vector<LabelledCrop> build_crop_set(const std::vector<LoadedItem>& items,
                                                std::uint64_t seed, int threads) {
    std::vector<std::vector<LabelledCrop>> per_item(items.size());
    parallel_for(items.size(), threads, [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        per_item[i] = make_classifier_crops(items[i], rng);
    });
    std::vector<LabelledCrop> out;
    for (auto& v : per_item)
        for (auto& c : v) out.push_back(std::move(c));
    return out;
}

inline TrainClassifierOutcome run_train_classifier(const TrainClassifierOptions& opt) {
    if (opt.data.empty() || opt.out.empty())
        throw UsageError("train-classifier: --data and --out are required");
    ensure_dir(opt.out);

    const std::string train_manifest = join_path(opt.data, "train.txt");
    const std::string val_manifest = join_path(opt.data, "val.txt");
    const auto train_items = load_dataset(train_manifest);
    const auto val_items = load_dataset(val_manifest);
    if (train_items.empty() || val_items.empty())
        throw DataError("train-classifier: empty train or val split");

    const auto train_crops = build_crop_set(train_items, derive_seed(opt.seed, 1), opt.threads);
    const auto val_crops = build_crop_set(val_items, derive_seed(opt.seed, 2), opt.threads);

    ClassifierTrainConfig cc;
    cc.epochs = opt.epochs;
    cc.batch_size = opt.batch;
    cc.lr = opt.lr;
    cc.weight_decay = opt.weight_decay;
    cc.seed = derive_seed(opt.seed, 3);
    cc.threads = opt.threads;
    const auto res = train_classifier(train_crops, val_crops, cc);

    TrainClassifierOutcome out;
    out.best_val_acc = res.best_val_acc;
    out.checkpoint_path = join_path(opt.out, "classifier.ckpt");
    save_checkpoint(out.checkpoint_path, res.net);
    write_file(join_path(opt.out, "classifier_log.csv"), classifier_log_csv(res.log));

    RunManifest& man = out.manifest;
    man.command = "train-classifier";
    man.config = cfg::to_config(opt);
    man.root_seed = opt.seed;
    man.inputs = {train_manifest, val_manifest};
    man.input_hash = hash_files(man.inputs);
    man.outputs = {"classifier.ckpt", "classifier_log.csv"};
    man.created_at = now_utc_iso8601();
    save_manifest(join_path(opt.out, "manifest.json"), man);
    return out;
}

// ---------------------------------------------------------------------------
// shared environment/segmentation knobs

struct EnvOptions {
    double theta = 25.0;
    double beta = 0.05;
    int traversals = 2;
    double idr_penalty = 1.0;
    bool idr = true;
    int coarse_sp = 40;
    int fine_sp = 160;
    int sp_levels = 2;
    int sp_bins = 16;
    int sp_iters = 8;

    template <typename F>
    void visit(F&& f) {
        f("theta", theta);
        f("beta", beta);
        f("traversals", traversals);
        f("idr_penalty", idr_penalty);
        f("idr", idr);
        f("coarse_sp", coarse_sp);
        f("fine_sp", fine_sp);
        f("sp_levels", sp_levels);
        f("sp_bins", sp_bins);
        f("sp_iters", sp_iters);
    }

    SegmentParams to_params() const {
        SegmentParams p;
        p.coarse_seeds = {coarse_sp, sp_levels, sp_bins, sp_iters};
        p.fine_seeds = {fine_sp, sp_levels, sp_bins, sp_iters};
        p.reward.theta = theta;
        p.reward.beta = beta;
        p.reward.max_traversals = traversals;
        p.reward.idr_penalty = idr_penalty;
        p.reward.idr_enabled = idr;
        return p;
    }
};

// ---------------------------------------------------------------------------
// train-agents

struct TrainAgentsOptions {
    int stage = 1;
    std::string data;
    std::string classifier;
    std::string stage1;  // required when stage == 2
    std::string out;
    EnvOptions env;
    double gamma = 0.9;
    double lr = 3e-4;
    int batch = 32;
    int sync = 1200;
    double eps_start = 1.0;
    double eps_end = 0.05;
    long eps_decay = 0;
    int episodes = 0;  // 0 = stage default (150 coarse, 80 fine)
    int buffer = 8000;
    bool prioritized = true;
    bool huber = true;
    int warmup = 200;
    int train_every = 1;
    int eval_interval = 15;
    int eval_max_items = 12;
    std::uint64_t seed = 11;
    int threads = 2;

    template <typename F>
    void visit(F&& f) {
        f("stage", stage);
        f("data", data);
        f("classifier", classifier);
        f("stage1", stage1);
        f("out", out);
        env.visit(f);
        f("gamma", gamma);
        f("lr", lr);
        f("batch", batch);
        f("sync", sync);
        f("eps_start", eps_start);
        f("eps_end", eps_end);
        f("eps_decay", eps_decay);
        f("episodes", episodes);
        f("buffer", buffer);
        f("prioritized", prioritized);
        f("huber", huber);
        f("warmup", warmup);
        f("train_every", train_every);
        f("eval_interval", eval_interval);
        f("eval_max_items", eval_max_items);
        f("seed", seed);
        f("threads", threads);
    }
};

struct TrainAgentsOutcome {
    RunManifest manifest;
    double best_val_dice = -1;
    long iterations = 0;
    std::string checkpoint_path;
};

inline TrainAgentsOutcome run_train_agents(const TrainAgentsOptions& opt) {
    if (opt.data.empty() || opt.classifier.empty() || opt.out.empty())
        throw UsageError("train-agents: --data, --classifier and --out are required");
    if (opt.stage != 1 && opt.stage != 2) throw UsageError("train-agents: --stage must be 1 or 2");
    if (opt.stage == 2 && opt.stage1.empty())
        throw UsageError("train-agents: stage 2 requires --stage1 <checkpoint>");
    ensure_dir(opt.out);

    const std::string train_manifest = join_path(opt.data, "train.txt");
    const std::string val_manifest = join_path(opt.data, "val.txt");
    const auto train_items = load_dataset(train_manifest);
    const auto val_items = load_dataset(val_manifest);
    const ClassifierModel classifier = ClassifierModel::load(opt.classifier);
    std::optional<Network<float>> stage1_net;
    if (opt.stage == 2) stage1_net = load_checkpoint(opt.stage1);

    TrainConfig tc;
    tc.gamma = opt.gamma;
    tc.lr = opt.lr;
    tc.batch_size = opt.batch;
    tc.sync_interval = opt.sync;
    tc.eps_start = opt.eps_start;
    tc.eps_end = opt.eps_end;
    tc.eps_decay_steps = opt.eps_decay;
    tc.episodes = opt.episodes > 0 ? opt.episodes : (opt.stage == 1 ? 150 : 80);
    tc.buffer_capacity = opt.buffer;
    tc.prioritized = opt.prioritized;
    tc.huber = opt.huber;
    tc.warmup = opt.warmup;
    tc.train_every = opt.train_every;
    tc.eval_interval = opt.eval_interval;
    tc.eval_max_items = opt.eval_max_items;
    tc.seed = opt.seed;
    tc.threads = opt.threads;

    const auto res = train_agents(train_items, val_items, classifier, opt.stage,
                                  stage1_net ? &*stage1_net : nullptr, opt.env.to_params(), tc);

    TrainAgentsOutcome out;
    out.best_val_dice = res.best_val_dice;
    out.iterations = res.iterations;
    const std::string ckpt_name = "qnet_stage" + std::to_string(opt.stage) + ".ckpt";
    const std::string log_name = "agents_stage" + std::to_string(opt.stage) + "_log.csv";
    out.checkpoint_path = join_path(opt.out, ckpt_name);
    save_checkpoint(out.checkpoint_path, res.net);
    write_file(join_path(opt.out, log_name), agent_log_csv(res.log));

    RunManifest& man = out.manifest;
    man.command = "train-agents";
    man.config = cfg::to_config(opt);
    man.root_seed = opt.seed;
    man.inputs = {train_manifest, val_manifest, opt.classifier};
    if (opt.stage == 2) man.inputs.push_back(opt.stage1);
    man.input_hash = hash_files(man.inputs);
    man.outputs = {ckpt_name, log_name};
    man.created_at = now_utc_iso8601();
    save_manifest(join_path(opt.out, "manifest_stage" + std::to_string(opt.stage) + ".json"), man);
    return out;
}

// ---------------------------------------------------------------------------
// segment / evaluate / box-shift-study

struct SegmentOptions {
    std::string image;  // single-image mode
    std::string box;    // "x0 y0 w h"
    std::string data;   // dataset mode
    std::string split = "test";
    std::string classifier;
    std::string stage1;
    std::string stage2;
    std::string out;
    EnvOptions env;
    int threads = 2;
    std::uint64_t seed = 0;

    template <typename F>
    void visit(F&& f) {
        f("image", image);
        f("box", box);
        f("data", data);
        f("split", split);
        f("classifier", classifier);
        f("stage1", stage1);
        f("stage2", stage2);
        f("out", out);
        env.visit(f);
        f("threads", threads);
        f("seed", seed);
    }
};

namespace detail {

inline BoundingBox parse_box(const std::string& s) {
    std::vector<int> v;
    for (const auto& tok : split(trim(s), ' '))
        if (!tok.empty()) {
            try {
                v.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw UsageError("bad --box value '" + s + "' (expected \"x0 y0 w h\")");
            }
        }
    if (v.size() != 4) throw UsageError("bad --box value '" + s + "' (expected \"x0 y0 w h\")");
    return {v[0], v[1], v[2], v[3]};
}

inline const char* term_str(Termination t) {
    switch (t) {
        case Termination::Flip:
            return "flip";
        case Termination::TraversalLimit:
            return "traversal-limit";
        default:
            return "none";
    }
}

inline nlohmann::json stage_json(const StageResult& sr, bool with_dice) {
    nlohmann::json j;
    j["termination"] = term_str(sr.termination);
    j["steps"] = sr.steps;
    if (with_dice)
        j["dice"] = sr.dice;
    else
        j["dice"] = nullptr;
    return j;
}

}  // namespace detail

struct SegmentOutcome {
    RunManifest manifest;
    std::vector<C2FResult> results;  // per item, dataset order
};

inline SegmentOutcome run_segment(const SegmentOptions& opt) {
    if (opt.classifier.empty() || opt.stage1.empty() || opt.stage2.empty() || opt.out.empty())
        throw UsageError("segment: --classifier, --stage1, --stage2 and --out are required");
    const bool single = !opt.image.empty();
    if (single && opt.box.empty()) throw UsageError("segment: --box is required with --image");
    if (!single && opt.data.empty()) throw UsageError("segment: give --image/--box or --data");
    ensure_dir(opt.out);

    const ClassifierModel classifier = ClassifierModel::load(opt.classifier);
    const Network<float> q1 = load_checkpoint(opt.stage1);
    const Network<float> q2 = load_checkpoint(opt.stage2);
    const SegmentParams params = opt.env.to_params();

    std::vector<LoadedItem> items;
    std::vector<bool> has_gt;
    std::vector<std::string> inputs = {opt.classifier, opt.stage1, opt.stage2};
    if (single) {
        LoadedItem it;
        it.image = load_image(opt.image);
        it.box = detail::parse_box(opt.box);
        it.id = std::filesystem::path(opt.image).stem().string();
        items.push_back(std::move(it));
        has_gt.push_back(false);
        inputs.push_back(opt.image);
    } else {
        const std::string manifest_path = join_path(opt.data, opt.split + ".txt");
        items = load_dataset(manifest_path);
        has_gt.assign(items.size(), true);
        inputs.push_back(manifest_path);
    }
    if (items.empty()) throw DataError("segment: no items in split '" + opt.split + "'");

    SegmentOutcome out;
    out.results.resize(items.size());
    parallel_for(items.size(), opt.threads, [&](std::size_t i) {
        out.results[i] = segment_c2f(items[i].image, items[i].box, classifier, q1, q2, params,
                                     has_gt[i] ? &items[i].mask : nullptr);
    });

    RunManifest& man = out.manifest;
    man.command = "segment";
    man.config = cfg::to_config(opt);
    man.root_seed = opt.seed;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& r = out.results[i];
        const std::string base = items[i].id;
        save_mask(join_path(opt.out, base + "_mask.pgm"), r.fine.mask);
        write_file(join_path(opt.out, base + "_curve.csv"), trace_csv(r.fine.curve, has_gt[i]));
        nlohmann::json j;
        j["id"] = base;
        j["box"] = {items[i].box.x0, items[i].box.y0, items[i].box.w, items[i].box.h};
        j["coarse"] = detail::stage_json(r.coarse, has_gt[i]);
        j["fine"] = detail::stage_json(r.fine, has_gt[i]);
        write_file(join_path(opt.out, base + "_record.json"), j.dump(2) + "\n");
        man.outputs.push_back(base + "_mask.pgm");
        man.outputs.push_back(base + "_curve.csv");
        man.outputs.push_back(base + "_record.json");
    }
    man.inputs = inputs;
    man.input_hash = hash_files(inputs);
    man.created_at = now_utc_iso8601();
    save_manifest(join_path(opt.out, "manifest.json"), man);
    return out;
}

struct EvaluateOptions {
    std::string data;
    std::string split = "test";
    std::string classifier;
    std::string stage1;
    std::string stage2;
    std::string out;
    EnvOptions env;
    int threads = 2;
    std::uint64_t seed = 0;

    template <typename F>
    void visit(F&& f) {
        f("data", data);
        f("split", split);
        f("classifier", classifier);
        f("stage1", stage1);
        f("stage2", stage2);
        f("out", out);
        env.visit(f);
        f("threads", threads);
        f("seed", seed);
    }
};

struct EvalRow {
    std::string id;
    MetricReport fine;
    double coarse_dice = 0;
    double overseg = 0;  // |P\G| / |G| of the fine mask
    Termination termination = Termination::None;
    int steps = 0;
};

struct EvaluateOutcome {
    RunManifest manifest;
    std::vector<EvalRow> rows;
    std::vector<C2FResult> results;
    MeanStd dice, jac, con, hd, asd, coarse_dice, overseg;
};

namespace detail {

inline double overseg_ratio(const Mask& pred, const Mask& gt) {
    long long extra = 0, n_gt = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        extra += pred.data[i] && !gt.data[i] ? 1 : 0;
        n_gt += gt.data[i];
    }
    return n_gt == 0 ? 0.0 : static_cast<double>(extra) / static_cast<double>(n_gt);
}

inline std::string opt_str(const std::optional<double>& v, int prec = 4) {
    return v ? fmt_double(*v, prec) : "nan";
}

inline void summarize(EvaluateOutcome& out) {
    std::vector<double> dice, jac, con, hd, asd, cd, ov;
    for (const auto& r : out.rows) {
        dice.push_back(r.fine.dice);
        jac.push_back(r.fine.jac);
        if (r.fine.con) con.push_back(*r.fine.con);
        if (r.fine.hd) hd.push_back(*r.fine.hd);
        if (r.fine.asd) asd.push_back(*r.fine.asd);
        cd.push_back(r.coarse_dice);
        ov.push_back(r.overseg);
    }
    out.dice = mean_std(dice);
    out.jac = mean_std(jac);
    out.con = mean_std(con);
    out.hd = mean_std(hd);
    out.asd = mean_std(asd);
    out.coarse_dice = mean_std(cd);
    out.overseg = mean_std(ov);
}

inline std::string metrics_csv(const std::vector<EvalRow>& rows) {
    std::string s = "id,dice,jac,con,hd,asd,coarse_dice,overseg,termination,steps\n";
    for (const auto& r : rows) {
        s += r.id + "," + fmt_double(r.fine.dice, 4) + "," + fmt_double(r.fine.jac, 4) + "," +
             opt_str(r.fine.con) + "," + opt_str(r.fine.hd) + "," + opt_str(r.fine.asd) + "," +
             fmt_double(r.coarse_dice, 4) + "," + fmt_double(r.overseg, 4) + "," +
             term_str(r.termination) + "," + std::to_string(r.steps) + "\n";
    }
    return s;
}

inline std::string summary_csv(const EvaluateOutcome& o) {
    std::string s = "metric,mean,std,n\n";
    const auto row = [&](const char* name, const MeanStd& m) {
        s += std::string(name) + "," + fmt_double(m.mean, 4) + "," + fmt_double(m.std, 4) + "," +
             std::to_string(m.n) + "\n";
    };
    row("dice", o.dice);
    row("jac", o.jac);
    row("con", o.con);
    row("hd", o.hd);
    row("asd", o.asd);
    row("coarse_dice", o.coarse_dice);
    row("overseg", o.overseg);
    return s;
}

inline std::string summary_table(const EvaluateOutcome& o) {
    std::string s;
    s += "            DICE(%)        JAC(%)         CON(%)         HD(px)         ASD(px)\n";
    s += "fine     ";
    for (const auto* m : {&o.dice, &o.jac, &o.con, &o.hd, &o.asd}) {
        std::string cell = mean_std_str(*m);
        cell.resize(std::max<std::size_t>(cell.size(), 13), ' ');
        s += "  " + cell;
    }
    s += "\ncoarse   ";
    std::string cell = mean_std_str(o.coarse_dice);
    cell.resize(std::max<std::size_t>(cell.size(), 13), ' ');
    s += "  " + cell + "  (DICE only)\n";
    return s;
}

}  // namespace detail

inline EvaluateOutcome run_evaluate(const EvaluateOptions& opt) {
    if (opt.data.empty() || opt.classifier.empty() || opt.stage1.empty() || opt.stage2.empty() ||
        opt.out.empty())
        throw UsageError("evaluate: --data, --classifier, --stage1, --stage2 and --out are required");
    ensure_dir(opt.out);

    const std::string manifest_path = join_path(opt.data, opt.split + ".txt");
    const auto items = load_dataset(manifest_path);
    if (items.empty()) throw DataError("evaluate: no items in split '" + opt.split + "'");
    const ClassifierModel classifier = ClassifierModel::load(opt.classifier);
    const Network<float> q1 = load_checkpoint(opt.stage1);
    const Network<float> q2 = load_checkpoint(opt.stage2);
    const SegmentParams params = opt.env.to_params();

    EvaluateOutcome out;
    out.rows.resize(items.size());
    out.results.resize(items.size());
    parallel_for(items.size(), opt.threads, [&](std::size_t i) {
        const auto& item = items[i];
        C2FResult r = segment_c2f(item.image, item.box, classifier, q1, q2, params, &item.mask);
        EvalRow row;
        row.id = item.id;
        row.fine = evaluate_masks(r.fine.mask, item.mask);
        row.coarse_dice = r.coarse.dice;
        row.overseg = detail::overseg_ratio(r.fine.mask, item.mask);
        row.termination = r.fine.termination;
        row.steps = r.fine.steps;
        out.rows[i] = std::move(row);
        out.results[i] = std::move(r);
    });
    detail::summarize(out);

    write_file(join_path(opt.out, "metrics.csv"), detail::metrics_csv(out.rows));
    write_file(join_path(opt.out, "summary.csv"), detail::summary_csv(out));
    write_file(join_path(opt.out, "table.txt"), detail::summary_table(out));

    RunManifest& man = out.manifest;
    man.command = "evaluate";
    man.config = cfg::to_config(opt);
    man.root_seed = opt.seed;
    man.inputs = {manifest_path, opt.classifier, opt.stage1, opt.stage2};
    man.input_hash = hash_files(man.inputs);
    man.outputs = {"metrics.csv", "summary.csv", "table.txt"};
    man.created_at = now_utc_iso8601();
    save_manifest(join_path(opt.out, "manifest.json"), man);
    return out;
}

struct BoxShiftOptions {
    std::string data;
    std::string split = "test";
    std::string classifier;
    std::string stage1;
    std::string stage2;
    std::string out;
    std::string bands = "0-10,10-20,20-30";
    double ref_width = 448.0;  // band pixels are quoted at this image width
    EnvOptions env;
    int threads = 2;
    std::uint64_t seed = 99;

    template <typename F>
    void visit(F&& f) {
        f("data", data);
        f("split", split);
        f("classifier", classifier);
        f("stage1", stage1);
        f("stage2", stage2);
        f("out", out);
        f("bands", bands);
        f("ref_width", ref_width);
        env.visit(f);
        f("threads", threads);
        f("seed", seed);
    }
};

inline std::vector<std::pair<double, double>> parse_bands(const std::string& s) {
    std::vector<std::pair<double, double>> out;
    for (const auto& part : split(s, ',')) {
        const auto lohi = split(trim(part), '-');
        if (lohi.size() != 2) throw UsageError("bad band '" + part + "' (expected lo-hi)");
        try {
            out.emplace_back(std::stod(lohi[0]), std::stod(lohi[1]));
        } catch (const std::exception&) {
            throw UsageError("bad band '" + part + "' (expected lo-hi)");
        }
        if (out.back().first < 0 || out.back().second < out.back().first)
            throw UsageError("bad band '" + part + "': need 0 <= lo <= hi");
    }
    if (out.empty()) throw UsageError("no shift bands given");
    return out;
}

struct BandSummary {
    std::string band;
    MeanStd dice, jac, con, hd, asd;
};

struct BoxShiftOutcome {
    RunManifest manifest;
    std::vector<BandSummary> bands;
};

inline BoxShiftOutcome run_box_shift(const BoxShiftOptions& opt) {
    if (opt.data.empty() || opt.classifier.empty() || opt.stage1.empty() || opt.stage2.empty() ||
        opt.out.empty())
        throw UsageError(
            "box-shift-study: --data, --classifier, --stage1, --stage2 and --out are required");
    ensure_dir(opt.out);

    const auto bands = parse_bands(opt.bands);
    const std::string manifest_path = join_path(opt.data, opt.split + ".txt");
    const auto items = load_dataset(manifest_path);
    if (items.empty()) throw DataError("box-shift-study: no items in split '" + opt.split + "'");
    const ClassifierModel classifier = ClassifierModel::load(opt.classifier);
    const Network<float> q1 = load_checkpoint(opt.stage1);
    const Network<float> q2 = load_checkpoint(opt.stage2);
    const SegmentParams params = opt.env.to_params();

    // proportional scaling: paper-width pixels -> this dataset's pixels
    const double scale = static_cast<double>(items[0].image.width) / opt.ref_width;

    std::string rows_csv = "band,id,shift_px,dice,jac,con,hd,asd\n";
    BoxShiftOutcome out;
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const double lo = bands[b].first * scale, hi = bands[b].second * scale;
        std::vector<MetricReport> reports(items.size());
        std::vector<double> shift_px(items.size());
        parallel_for(items.size(), opt.threads, [&](std::size_t i) {
            Rng rng(derive_seed(opt.seed, b * 1000003 + i));
            const double r = rng.uniform(lo, hi);
            const double ang = rng.uniform(0.0, 6.283185307179586);
            const int dx = static_cast<int>(std::lround(r * std::cos(ang)));
            const int dy = static_cast<int>(std::lround(r * std::sin(ang)));
            const auto& item = items[i];
            const BoundingBox shifted = shift_box(item.box, dx, dy, item.image.width, item.image.height);
            const C2FResult res =
                segment_c2f(item.image, shifted, classifier, q1, q2, params, &item.mask);
            reports[i] = evaluate_masks(res.fine.mask, item.mask);
            shift_px[i] = r;
        });

        BandSummary bs;
        bs.band = fmt_double(bands[b].first, 0) + "-" + fmt_double(bands[b].second, 0);
        std::vector<double> dice, jac, con, hd, asd;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& m = reports[i];
            dice.push_back(m.dice);
            jac.push_back(m.jac);
            if (m.con) con.push_back(*m.con);
            if (m.hd) hd.push_back(*m.hd);
            if (m.asd) asd.push_back(*m.asd);
            rows_csv += bs.band + "," + items[i].id + "," + fmt_double(shift_px[i], 2) + "," +
                        fmt_double(m.dice, 4) + "," + fmt_double(m.jac, 4) + "," +
                        detail::opt_str(m.con) + "," + detail::opt_str(m.hd) + "," +
                        detail::opt_str(m.asd) + "\n";
        }
        bs.dice = mean_std(dice);
        bs.jac = mean_std(jac);
        bs.con = mean_std(con);
        bs.hd = mean_std(hd);
        bs.asd = mean_std(asd);
        out.bands.push_back(std::move(bs));
    }

    std::string summary = "band,metric,mean,std,n\n";
    std::string table = "band            DICE(%)        JAC(%)         CON(%)         HD(px)         ASD(px)\n";
    for (const auto& bs : out.bands) {
        const auto row = [&](const char* name, const MeanStd& m) {
            summary += bs.band + "," + name + "," + fmt_double(m.mean, 4) + "," +
                       fmt_double(m.std, 4) + "," + std::to_string(m.n) + "\n";
        };
        row("dice", bs.dice);
        row("jac", bs.jac);
        row("con", bs.con);
        row("hd", bs.hd);
        row("asd", bs.asd);
        std::string line = bs.band;
        line.resize(12, ' ');
        for (const auto* m : {&bs.dice, &bs.jac, &bs.con, &bs.hd, &bs.asd}) {
            std::string cell = mean_std_str(*m);
            cell.resize(std::max<std::size_t>(cell.size(), 13), ' ');
            line += "  " + cell;
        }
        table += line + "\n";
    }
    write_file(join_path(opt.out, "boxshift_metrics.csv"), rows_csv);
    write_file(join_path(opt.out, "boxshift_summary.csv"), summary);
    write_file(join_path(opt.out, "boxshift_table.txt"), table);

    RunManifest& man = out.manifest;
    man.command = "box-shift-study";
    man.config = cfg::to_config(opt);
    man.root_seed = opt.seed;
    man.inputs = {manifest_path, opt.classifier, opt.stage1, opt.stage2};
    man.input_hash = hash_files(man.inputs);
    man.outputs = {"boxshift_metrics.csv", "boxshift_summary.csv", "boxshift_table.txt"};
    man.created_at = now_utc_iso8601();
    save_manifest(join_path(opt.out, "manifest.json"), man);
    return out;
}

// ---------------------------------------------------------------------------
// curves

struct CurvesOptions {
    std::string trace;
    std::string out;  // SVG file path
    double beta = 0.05;
    std::uint64_t seed = 0;

    template <typename F>
    void visit(F&& f) {
        f("trace", trace);
        f("out", out);
        f("beta", beta);
        f("seed", seed);
    }
};

inline RunManifest run_curves(const CurvesOptions& opt) {
    if (opt.trace.empty() || opt.out.empty()) throw UsageError("curves: --trace and --out are required");
    bool with_dice = false;
    const auto rows = parse_trace_csv(read_file(opt.trace), &with_dice);
    if (rows.empty()) throw DataError("curves: trace has no steps");
    const auto parent = std::filesystem::path(opt.out).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());
    write_file(opt.out, emit_curves(rows, with_dice, opt.beta));

    RunManifest man;
    man.command = "curves";
    man.config = cfg::to_config(opt);
    man.root_seed = opt.seed;
    man.inputs = {opt.trace};
    man.input_hash = hash_files(man.inputs);
    man.outputs = {std::filesystem::path(opt.out).filename().string()};
    man.created_at = now_utc_iso8601();
    save_manifest(opt.out + ".manifest.json", man);
    return man;
}

// ---------------------------------------------------------------------------
// manifest replay

// Re-runs a recorded command with its stored configuration. `out_override`
// redirects artifacts; inputs must be unchanged (hash-checked).
inline RunManifest run_from_manifest(const std::string& manifest_path, const std::string& out_override) {
    const RunManifest man = load_manifest(manifest_path);
    if (!man.inputs.empty() && hash_files(man.inputs) != man.input_hash)
        throw DataError("manifest replay: input files changed since the original run");

    auto config = man.config;
    if (!out_override.empty()) config["out"] = out_override;

    if (man.command == "gen-data") return run_gen_data(cfg::from_config<GenDataOptions>(config));
    if (man.command == "train-classifier")
        return run_train_classifier(cfg::from_config<TrainClassifierOptions>(config)).manifest;
    if (man.command == "train-agents")
        return run_train_agents(cfg::from_config<TrainAgentsOptions>(config)).manifest;
    if (man.command == "segment") return run_segment(cfg::from_config<SegmentOptions>(config)).manifest;
    if (man.command == "evaluate") return run_evaluate(cfg::from_config<EvaluateOptions>(config)).manifest;
    if (man.command == "box-shift-study")
        return run_box_shift(cfg::from_config<BoxShiftOptions>(config)).manifest;
    if (man.command == "curves") return run_curves(cfg::from_config<CurvesOptions>(config));
    throw DataError("manifest replay: unknown command '" + man.command + "'");
}

}  // namespace flip
