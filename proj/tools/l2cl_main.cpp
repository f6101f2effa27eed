#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "l2cl/commands.hpp"

using namespace l2cl;

int main(int argc, char** argv) {
    CLI::App app{"Graph collaborative filtering with layer-to-layer contrastive learning"};
    app.require_subcommand(1);

    // Global flags shared by the training-style commands.
    std::string config_path, out_dir;
    Overrides ov;
    uint64_t seed_flag = 0;
    int workers_flag = 0, precision_flag = 0;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", config_path, "flat key=value config file");
        if (needs_config) c->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed_flag, "override seed_init/seed_sample");
        sub->add_option("--workers", workers_flag, "worker threads (1 = reference mode)");
        sub->add_option("--precision", precision_flag, "numeric mode (32 or 64)")
            ->check(CLI::IsMember({32, 64}));
    };
    auto common_overrides = [&](CLI::App* sub) {
        if (sub->count("--seed")) ov.seed = seed_flag;
        if (sub->count("--workers")) ov.workers = workers_flag;
        if (sub->count("--precision")) ov.precision = precision_flag;
        return ov;
    };

    // prepare
    PrepareArgs prep;
    std::string delim = "tab";
    double theta_flag = 0.0;
    int kcore_flag = 0;
    auto* sp = app.add_subcommand("prepare", "filter, remap and split a raw interaction file");
    sp->add_option("--input", prep.input, "raw delimiter-separated file")->required();
    sp->add_option("--out", prep.out_dir, "output directory")->required();
    sp->add_option("--delimiter", delim, "tab or comma")->check(CLI::IsMember({"tab", "comma"}));
    sp->add_option("--user-col", prep.columns.user_col, "0-based user column");
    sp->add_option("--item-col", prep.columns.item_col, "0-based item column");
    sp->add_option("--rating-col", prep.columns.rating_col, "0-based rating column (-1: none)");
    sp->add_option("--time-col", prep.columns.time_col, "0-based timestamp column (-1: none)");
    sp->add_flag("--skip-header", prep.columns.skip_header, "ignore the first line");
    auto* theta_opt = sp->add_option("--theta", theta_flag, "implicit threshold (rating >= theta)");
    auto* kcore_opt = sp->add_option("--k-core", kcore_flag, "k applied to both sides");
    sp->add_option("--k-user", prep.k_user, "per-side override");
    sp->add_option("--k-item", prep.k_item, "per-side override");
    sp->add_option("--seed", prep.seed, "split seed");

    // synth
    SynthArgs synth;
    auto* sy = app.add_subcommand("synth", "generate the bundled synthetic dataset");
    sy->add_option("--out", synth.out_file, "output raw TSV")->required();
    sy->add_option("--users", synth.params.num_users, "user count");
    sy->add_option("--items", synth.params.num_items, "item count");
    sy->add_option("--interactions", synth.params.target_interactions, "target interaction count");
    sy->add_option("--clusters", synth.params.num_clusters, "planted preference clusters");
    sy->add_option("--in-cluster", synth.params.in_cluster_prob, "in-cluster draw probability");
    sy->add_option("--degree-sigma", synth.params.degree_sigma, "lognormal degree shape");
    sy->add_option("--min-degree", synth.params.min_degree, "minimum user degree");
    sy->add_option("--seed", synth.params.seed, "generator seed");

    // train
    TrainArgs tr;
    auto* st = app.add_subcommand("train", "train one configuration and report test metrics");
    st->add_option("--data", tr.data_dir, "prepared data directory")->required();
    st->add_option("--operator-cache", tr.operator_cache, "binary propagation-operator cache");
    add_common(st, /*needs_config=*/true);

    // eval
    EvalArgs ev;
    auto* se = app.add_subcommand("eval", "evaluate a checkpoint");
    se->add_option("--data", ev.data_dir, "prepared data directory")->required();
    se->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
    se->add_option("--phase", ev.phase, "val or test")->check(CLI::IsMember({"val", "test"}));
    se->add_flag("--groups", ev.sparsity_groups, "report sparsity-group metrics");
    add_common(se, true);

    // grid
    GridArgs gr;
    auto* sg = app.add_subcommand("grid", "run the 5 contrast variants plus the baseline");
    sg->add_option("--data", gr.data_dir, "prepared data directory")->required();
    add_common(sg, true);

    // sweep
    SweepArgs sw;
    auto* ss = app.add_subcommand("sweep", "sweep tau, alpha or lambda1");
    ss->add_option("--data", sw.data_dir, "prepared data directory")->required();
    ss->add_option("--parameter", sw.parameter, "tau | alpha | lambda1")->required();
    ss->add_option("--values", sw.values, "explicit values (default: built-in grid)");
    add_common(ss, true);

    // bench
    BenchArgs bn;
    auto* sb = app.add_subcommand("bench", "per-epoch wall-time comparison across schemes");
    sb->add_option("--data", bn.data_dir, "prepared data directory")->required();
    sb->add_option("--schemes", bn.schemes, "schemes to time (default u0_i1 lightgcn)");
    sb->add_option("--repetitions", bn.repetitions, "timed epochs per scheme");
    sb->add_option("--warmup", bn.warmup, "untimed warmup epochs");
    sb->add_flag("--full", bn.full_training, "full training mode (early stopping, totals)");
    add_common(sb, true);

    // export
    ExportArgs ex;
    auto* sx = app.add_subcommand("export", "export embeddings from a checkpoint");
    sx->add_option("--data", ex.data_dir, "prepared data directory (for readout export)");
    sx->add_option("--checkpoint", ex.checkpoint, "checkpoint file")->required();
    sx->add_option("--file", ex.out_file, "output file")->required();
    sx->add_option("--format", ex.format, "text or binary");
    sx->add_option("--what", ex.what, "readout or layer0");
    sx->add_option("--sample-users", ex.sample_users, "seeded user subsample (text only)");
    sx->add_option("--sample-seed", ex.sample_seed, "subsample seed");
    sx->add_option("--config", config_path, "flat key=value config file")->required();
    sx->add_option("--seed", seed_flag, "override seed_init/seed_sample");
    sx->add_option("--workers", workers_flag, "worker threads");
    sx->add_option("--precision", precision_flag, "numeric mode (32 or 64)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sp->parsed()) {
            prep.columns.delimiter = delim == "comma" ? ',' : '\t';
            if (theta_opt->count()) prep.theta = theta_flag;
            if (kcore_opt->count()) {
                if (!sp->count("--k-user")) prep.k_user = kcore_flag;
                if (!sp->count("--k-item")) prep.k_item = kcore_flag;
            }
            return cmd_prepare(prep);
        }
        if (sy->parsed()) return cmd_synth(synth);
        if (st->parsed()) {
            tr.config_path = config_path;
            tr.out_dir = out_dir;
            tr.overrides = common_overrides(st);
            return cmd_train(tr);
        }
        if (se->parsed()) {
            ev.config_path = config_path;
            ev.out_dir = out_dir;
            ev.overrides = common_overrides(se);
            return cmd_eval(ev);
        }
        if (sg->parsed()) {
            gr.config_path = config_path;
            gr.out_dir = out_dir;
            gr.overrides = common_overrides(sg);
            return cmd_grid(gr);
        }
        if (ss->parsed()) {
            sw.config_path = config_path;
            sw.out_dir = out_dir;
            sw.overrides = common_overrides(ss);
            return cmd_sweep(sw);
        }
        if (sb->parsed()) {
            bn.config_path = config_path;
            bn.out_dir = out_dir;
            bn.overrides = common_overrides(sb);
            return cmd_bench(bn);
        }
        if (sx->parsed()) {
            ex.config_path = config_path;
            if (sx->count("--seed")) ex.overrides.seed = seed_flag;
            if (sx->count("--workers")) ex.overrides.workers = workers_flag;
            if (sx->count("--precision")) ex.overrides.precision = precision_flag;
            return cmd_export(ex);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
