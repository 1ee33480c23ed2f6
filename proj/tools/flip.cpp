// fliplearn command line: dataset synthesis, training, segmentation and the
// evaluation protocols. Every command writes a manifest.json that `replay`
// can reproduce bit for bit.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "flip/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitMissing = 5;

void add_env_options(CLI::App* cmd, flip::EnvOptions& env) {
    cmd->add_option("--theta", env.theta, "IDR Wasserstein threshold (intensity units)");
    cmd->add_option("--beta", env.beta, "terminal nodule-score threshold");
    cmd->add_option("--traversals", env.traversals, "max schedule traversals per agent");
    cmd->add_option("--idr_penalty", env.idr_penalty, "IDR punishment magnitude");
    cmd->add_flag("--idr,!--no-idr", env.idr, "enable the intensity distribution reward");
    cmd->add_option("--coarse_sp", env.coarse_sp, "requested superpixels, coarse stage");
    cmd->add_option("--fine_sp", env.fine_sp, "requested superpixels, fine stage");
    cmd->add_option("--sp_levels", env.sp_levels, "SEEDS block levels");
    cmd->add_option("--sp_bins", env.sp_bins, "SEEDS histogram bins");
    cmd->add_option("--sp_iters", env.sp_iters, "SEEDS hill-climb iterations");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flip-learning segmentation workbench: erase superpixels inside a bbox until the"
                 " classifier tag flips; the erased region is the mask."};
    app.require_subcommand(0, 1);
    app.set_config("--config", "", "plain-text key=value config (CLI flags override)");

    std::string from_manifest, replay_out;
    app.add_option("--from-manifest", from_manifest, "re-run a recorded command from its manifest");
    app.add_option("--out", replay_out, "output directory override for --from-manifest");

    flip::GenDataOptions gen;
    auto* c_gen = app.add_subcommand("gen-data", "synthesize a phantom dataset with GT masks and boxes");
    c_gen->add_option("--out", gen.out, "output dataset directory")->required();
    c_gen->add_option("--groups", gen.groups, "patient-style groups (split unit)");
    c_gen->add_option("--per_group", gen.per_group, "phantoms per group");
    c_gen->add_option("--canvas", gen.canvas, "canvas side in pixels");
    c_gen->add_option("--margin", gen.margin, "bbox margin around the mask tight box");
    c_gen->add_option("--min_contrast", gen.min_contrast, "minimum |fg-bg| mean intensity");
    c_gen->add_option("--train_frac", gen.train_frac, "train split fraction (by group)");
    c_gen->add_option("--val_frac", gen.val_frac, "val split fraction (by group)");
    c_gen->add_option("--seed", gen.seed, "root seed");
    c_gen->add_option("--threads", gen.threads, "worker threads");

    flip::TrainClassifierOptions tcl;
    auto* c_tcl = app.add_subcommand("train-classifier", "train the nodule/normal-tissue classifier");
    c_tcl->add_option("--data", tcl.data, "dataset directory (from gen-data)")->required();
    c_tcl->add_option("--out", tcl.out, "artifact directory")->required();
    c_tcl->add_option("--epochs", tcl.epochs);
    c_tcl->add_option("--batch", tcl.batch);
    c_tcl->add_option("--lr", tcl.lr);
    c_tcl->add_option("--weight_decay", tcl.weight_decay);
    c_tcl->add_option("--seed", tcl.seed);
    c_tcl->add_option("--threads", tcl.threads);

    flip::TrainAgentsOptions tag;
    auto* c_tag = app.add_subcommand("train-agents", "train the erasing agents (DDQN)");
    c_tag->add_option("--stage", tag.stage, "1 = coarse, 2 = fine (conditioned on stage 1)")->required();
    c_tag->add_option("--data", tag.data)->required();
    c_tag->add_option("--classifier", tag.classifier, "classifier checkpoint")->required();
    c_tag->add_option("--stage1", tag.stage1, "stage-1 checkpoint (stage 2 only)");
    c_tag->add_option("--out", tag.out)->required();
    add_env_options(c_tag, tag.env);
    c_tag->add_option("--gamma", tag.gamma);
    c_tag->add_option("--lr", tag.lr);
    c_tag->add_option("--batch", tag.batch);
    c_tag->add_option("--sync", tag.sync, "target-network sync interval (iterations)");
    c_tag->add_option("--eps_start", tag.eps_start);
    c_tag->add_option("--eps_end", tag.eps_end);
    c_tag->add_option("--eps_decay", tag.eps_decay, "env steps to reach eps_end (0 = auto)");
    c_tag->add_option("--episodes", tag.episodes, "0 = stage default");
    c_tag->add_option("--buffer", tag.buffer, "replay capacity M");
    c_tag->add_flag("--prioritized,!--uniform-replay", tag.prioritized, "prioritized vs uniform replay");
    c_tag->add_flag("--huber,!--squared-loss", tag.huber, "Huber-smoothed vs plain squared TD loss");
    c_tag->add_option("--warmup", tag.warmup);
    c_tag->add_option("--train_every", tag.train_every);
    c_tag->add_option("--eval_interval", tag.eval_interval);
    c_tag->add_option("--eval_max_items", tag.eval_max_items);
    c_tag->add_option("--seed", tag.seed);
    c_tag->add_option("--threads", tag.threads);

    flip::SegmentOptions seg;
    auto* c_seg = app.add_subcommand("segment", "segment one image or a dataset split");
    c_seg->add_option("--image", seg.image, "single PGM image");
    c_seg->add_option("--box", seg.box, "\"x0 y0 w h\" for --image");
    c_seg->add_option("--data", seg.data, "dataset directory (split mode)");
    c_seg->add_option("--split", seg.split, "train|val|test");
    c_seg->add_option("--classifier", seg.classifier)->required();
    c_seg->add_option("--stage1", seg.stage1)->required();
    c_seg->add_option("--stage2", seg.stage2)->required();
    c_seg->add_option("--out", seg.out)->required();
    add_env_options(c_seg, seg.env);
    c_seg->add_option("--threads", seg.threads);
    c_seg->add_option("--seed", seg.seed);

    flip::EvaluateOptions ev;
    auto* c_ev = app.add_subcommand("evaluate", "segment a split and report DICE/JAC/CON/HD/ASD");
    c_ev->add_option("--data", ev.data)->required();
    c_ev->add_option("--split", ev.split);
    c_ev->add_option("--classifier", ev.classifier)->required();
    c_ev->add_option("--stage1", ev.stage1)->required();
    c_ev->add_option("--stage2", ev.stage2)->required();
    c_ev->add_option("--out", ev.out)->required();
    add_env_options(c_ev, ev.env);
    c_ev->add_option("--threads", ev.threads);
    c_ev->add_option("--seed", ev.seed);

    flip::BoxShiftOptions bs;
    auto* c_bs = app.add_subcommand("box-shift-study", "robustness to annotation-box shifts");
    c_bs->add_option("--data", bs.data)->required();
    c_bs->add_option("--split", bs.split);
    c_bs->add_option("--classifier", bs.classifier)->required();
    c_bs->add_option("--stage1", bs.stage1)->required();
    c_bs->add_option("--stage2", bs.stage2)->required();
    c_bs->add_option("--out", bs.out)->required();
    c_bs->add_option("--bands", bs.bands, "shift bands in reference-width pixels");
    c_bs->add_option("--ref_width", bs.ref_width, "image width the bands are quoted at");
    add_env_options(c_bs, bs.env);
    c_bs->add_option("--threads", bs.threads);
    c_bs->add_option("--seed", bs.seed);

    flip::CurvesOptions cv;
    auto* c_cv = app.add_subcommand("curves", "render an erase-curve SVG from an episode trace");
    c_cv->add_option("--trace", cv.trace, "trace CSV (from segment)")->required();
    c_cv->add_option("--out", cv.out, "output SVG path")->required();
    c_cv->add_option("--beta", cv.beta, "flip threshold line");

    std::string rp_manifest, rp_out;
    auto* c_rp = app.add_subcommand("replay", "re-run a command from its manifest.json");
    c_rp->add_option("--manifest", rp_manifest)->required();
    c_rp->add_option("--out", rp_out, "output directory override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (c_gen->parsed()) {
            const auto man = flip::run_gen_data(gen);
            std::printf("gen-data: %zu files under %s\n", man.outputs.size(), gen.out.c_str());
        } else if (c_tcl->parsed()) {
            const auto out = flip::run_train_classifier(tcl);
            std::printf("train-classifier: best val acc %.4f -> %s\n", out.best_val_acc,
                        out.checkpoint_path.c_str());
        } else if (c_tag->parsed()) {
            const auto out = flip::run_train_agents(tag);
            std::printf("train-agents stage %d: best val DICE %.2f after %ld iterations -> %s\n",
                        tag.stage, out.best_val_dice, out.iterations, out.checkpoint_path.c_str());
        } else if (c_seg->parsed()) {
            const auto out = flip::run_segment(seg);
            std::printf("segment: %zu item(s) -> %s\n", out.results.size(), seg.out.c_str());
        } else if (c_ev->parsed()) {
            const auto out = flip::run_evaluate(ev);
            std::printf("evaluate: fine DICE %s | coarse DICE %s | n=%d\n",
                        flip::mean_std_str(out.dice).c_str(), flip::mean_std_str(out.coarse_dice).c_str(),
                        out.dice.n);
        } else if (c_bs->parsed()) {
            const auto out = flip::run_box_shift(bs);
            for (const auto& band : out.bands)
                std::printf("box-shift %s px: DICE %s\n", band.band.c_str(),
                            flip::mean_std_str(band.dice).c_str());
        } else if (c_cv->parsed()) {
            flip::run_curves(cv);
            std::printf("curves: %s\n", cv.out.c_str());
        } else if (c_rp->parsed()) {
            const auto man = flip::run_from_manifest(rp_manifest, rp_out);
            std::printf("replay: %s done\n", man.command.c_str());
        } else if (!from_manifest.empty()) {
            const auto man = flip::run_from_manifest(from_manifest, replay_out);
            std::printf("replay: %s done\n", man.command.c_str());
        } else {
            std::fputs(app.help().c_str(), stdout);
            return kExitUsage;
        }
    } catch (const flip::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const flip::ParamError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const flip::TrainingDivergence& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return kExitDivergence;
    } catch (const flip::MissingArtifact& e) {
        std::fprintf(stderr, "missing artifact: %s\n", e.what());
        return kExitMissing;
    } catch (const flip::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitOk;
}
