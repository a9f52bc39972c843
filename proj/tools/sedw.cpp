// sedw: sound event detection workbench
//
// Pipeline subcommands: synth-data, extract-dict, pseudo-label, train,
// infer, evaluate, report. Every stage reads and writes the documented
// artifacts only (see docs/formats.md).

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sedw/config.hpp"
#include "sedw/pipeline.hpp"
#include "sedw/report.hpp"
#include "sedw/toydata.hpp"

namespace fs = std::filesystem;
using namespace sedw;

namespace {

FrontendConfig frontend_from(const Config& c) {
    FrontendConfig f;
    f.window_size = static_cast<int>(c.get_long("frontend.window_size", f.window_size));
    f.hop_length = static_cast<int>(c.get_long("frontend.hop_length", f.hop_length));
    f.mel_bins = static_cast<int>(c.get_long("frontend.mel_bins", f.mel_bins));
    f.log_floor = c.get_double("frontend.log_floor", f.log_floor);
    return f;
}

CnmfConfig cnmf_from(const Config& c) {
    CnmfConfig k;
    k.components = static_cast<int>(c.get_long("cnmf.components", k.components));
    k.max_shift = static_cast<int>(c.get_long("cnmf.shifts", k.max_shift));
    k.iterations = static_cast<int>(c.get_long("cnmf.iterations", k.iterations));
    k.threshold = c.get_double("cnmf.threshold", k.threshold);
    k.epsilon = c.get_double("cnmf.epsilon", k.epsilon);
    k.recompute_between_shifts =
        c.get_bool("cnmf.recompute_between_shifts", k.recompute_between_shifts);
    k.seed = static_cast<std::uint64_t>(c.get_long("cnmf.seed", static_cast<long>(k.seed)));
    return k;
}

PostprocessConfig post_from(const Config& c) {
    PostprocessConfig p;
    p.clip_threshold = c.get_double("post.clip_threshold", p.clip_threshold);
    p.frame_threshold = c.get_double("post.frame_threshold", p.frame_threshold);
    p.median_window = static_cast<int>(c.get_long("post.median_window", p.median_window));
    p.min_duration = c.get_double("post.min_duration", p.min_duration);
    p.merge_gap = c.get_double("post.merge_gap", p.merge_gap);
    p.merge_before_drop = c.get_bool("post.merge_before_drop", p.merge_before_drop);
    return p;
}

TrainConfig train_from(const Config& c) {
    TrainConfig t;
    t.warmup_epochs = static_cast<int>(c.get_long("train.warmup_epochs", t.warmup_epochs));
    t.tuning_epochs = static_cast<int>(c.get_long("train.tuning_epochs", t.tuning_epochs));
    t.batch_warmup = static_cast<int>(c.get_long("train.batch_warmup", t.batch_warmup));
    t.batch_tuning = static_cast<int>(c.get_long("train.batch_tuning", t.batch_tuning));
    t.lr_max = c.get_double("train.lr_max", t.lr_max);
    t.lr_min = c.get_double("train.lr_min", t.lr_min);
    t.lookahead_alpha = c.get_double("train.lookahead_alpha", t.lookahead_alpha);
    t.lookahead_k = c.get_long("train.lookahead_k", t.lookahead_k);
    t.adam.beta1 = c.get_double("train.adam_beta1", t.adam.beta1);
    t.adam.beta2 = c.get_double("train.adam_beta2", t.adam.beta2);
    t.adam.epsilon = c.get_double("train.adam_epsilon", t.adam.epsilon);
    t.seed = static_cast<std::uint64_t>(c.get_long("train.seed", static_cast<long>(t.seed)));
    t.lambda_max = c.get_double("train.lambda_max", t.lambda_max);
    t.lambda_min = c.get_double("train.lambda_min", t.lambda_min);
    t.mixup_alpha = c.get_double("train.mixup_alpha", t.mixup_alpha);
    t.augment.noise_std_scale = c.get_double("train.noise_std_scale", t.augment.noise_std_scale);
    t.augment.time_mask_max =
        static_cast<int>(c.get_long("train.time_mask_max", t.augment.time_mask_max));
    t.augment.freq_mask_max =
        static_cast<int>(c.get_long("train.freq_mask_max", t.augment.freq_mask_max));
    t.iters_per_epoch = static_cast<int>(c.get_long("train.iters_per_epoch", t.iters_per_epoch));
    t.reset_optimizer_at_tuning =
        c.get_bool("train.reset_optimizer_at_tuning", t.reset_optimizer_at_tuning);
    t.use_consistency = c.get_bool("train.use_consistency", t.use_consistency);
    t.use_interpolated = c.get_bool("train.use_interpolated", t.use_interpolated);
    t.constant_lambda = c.get_bool("train.constant_lambda", t.constant_lambda);
    t.bidirectional_consistency =
        c.get_bool("train.bidirectional_consistency", t.bidirectional_consistency);
    t.threads = static_cast<int>(c.get_long("train.threads", t.threads));
    t.postprocess = post_from(c);
    return t;
}

std::vector<std::size_t> to_sizes(const std::vector<long>& v) {
    std::vector<std::size_t> out;
    for (long x : v) out.push_back(static_cast<std::size_t>(x));
    return out;
}

CmnConfig model_from(const Config& c, const std::string& which, std::size_t n_classes) {
    const bool flm = which == "flm";
    CmnConfig m = flm ? CmnConfig::flm_default() : CmnConfig::clm_default();
    const std::string prefix = "model." + which + ".";
    std::vector<long> def_filters(m.conv_filters.begin(), m.conv_filters.end());
    std::vector<long> def_pt, def_pf;
    for (const auto& [pt, pf] : m.conv_pools) {
        def_pt.push_back(static_cast<long>(pt));
        def_pf.push_back(static_cast<long>(pf));
    }
    const auto filters = to_sizes(c.get_long_list(prefix + "filters", def_filters));
    const auto pools_t = to_sizes(c.get_long_list(prefix + "pools_t", def_pt));
    const auto pools_f = to_sizes(c.get_long_list(prefix + "pools_f", def_pf));
    if (filters.size() != pools_t.size() || filters.size() != pools_f.size())
        throw std::runtime_error("config: " + prefix + "filters/pools_t/pools_f must align");
    m.conv_filters = filters;
    m.conv_pools.clear();
    for (std::size_t i = 0; i < filters.size(); ++i) m.conv_pools.emplace_back(pools_t[i], pools_f[i]);
    m.encoder_layers = static_cast<std::size_t>(c.get_long("model.encoder_layers", 1));
    m.heads = static_cast<std::size_t>(c.get_long("model.heads", 4));
    m.positional_encoding = c.get_bool("model.positional_encoding", true);
    m.macaron_half = c.get_double("model.macaron_half", 0.5);
    m.n_classes = n_classes;
    return m;
}

std::vector<std::string> read_class_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open class list: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sedw: sound event detection workbench"};
    app.require_subcommand(1);

    std::string config_path, cache_dir;
    app.add_option("--config", config_path, "key-value config file")->envname("SEDW_CONFIG");

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "generate the toy dataset");
    ToySpec toy;
    std::string synth_out = "data";
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--classes", toy.n_classes, "number of toy classes (1..10)");
    synth->add_option("--clips-strong", toy.clips_strong, "strongly labeled clips");
    synth->add_option("--clips-weak", toy.clips_weak, "weakly labeled clips");
    synth->add_option("--clips-unlabeled", toy.clips_unlabeled, "unlabeled clips");
    synth->add_option("--clips-val", toy.clips_validation, "held-out validation clips");
    synth->add_option("--seed", toy.seed, "generator seed");

    // extract-dict
    auto* extract = app.add_subcommand("extract-dict", "build per-class CNMF dictionaries");
    std::string ed_manifest, ed_audio, ed_out = "dicts";
    extract->add_option("--manifest", ed_manifest, "strong manifest TSV")->required();
    extract->add_option("--audio-dir", ed_audio, "audio directory")->required();
    extract->add_option("--out", ed_out, "dictionary output directory");
    extract->add_option("--cache-dir", cache_dir, "feature cache directory");

    // pseudo-label
    auto* pseudo = app.add_subcommand("pseudo-label", "approximate pseudo strong labels");
    std::string pl_manifest, pl_audio, pl_dicts = "dicts", pl_out = "pseudo";
    pseudo->add_option("--manifest", pl_manifest, "weak manifest TSV")->required();
    pseudo->add_option("--audio-dir", pl_audio, "audio directory")->required();
    pseudo->add_option("--dicts", pl_dicts, "dictionary directory");
    pseudo->add_option("--out", pl_out, "pseudo label output directory");
    pseudo->add_option("--cache-dir", cache_dir, "feature cache directory");

    // train
    auto* train = app.add_subcommand("train", "two-phase semi-supervised training");
    std::string tr_strong, tr_weak, tr_unlabeled, tr_pseudo = "pseudo", tr_audio,
                tr_val, tr_out = "run", tr_resume;
    long tr_seed = -1, tr_warm = -1, tr_tune = -1;
    train->add_option("--strong-manifest", tr_strong)->required();
    train->add_option("--weak-manifest", tr_weak)->required();
    train->add_option("--unlabeled-manifest", tr_unlabeled)->required();
    train->add_option("--pseudo-dir", tr_pseudo, "pseudo label directory");
    train->add_option("--audio-dir", tr_audio)->required();
    train->add_option("--val-manifest", tr_val, "strong manifest of the validation split");
    train->add_option("--out", tr_out, "run output directory");
    train->add_option("--seed", tr_seed, "override train.seed");
    train->add_option("--epochs-warmup", tr_warm, "override train.warmup_epochs");
    train->add_option("--epochs-tuning", tr_tune, "override train.tuning_epochs");
    train->add_option("--resume", tr_resume, "checkpoint directory to resume from");
    train->add_option("--cache-dir", cache_dir, "feature cache directory");

    // infer
    auto* infer = app.add_subcommand("infer", "decode events for a manifest of clips");
    std::string in_flm, in_clm, in_manifest, in_audio, in_classes, in_out = "predictions.tsv";
    infer->add_option("--flm", in_flm, "FLM checkpoint")->required();
    infer->add_option("--clm", in_clm, "CLM checkpoint")->required();
    infer->add_option("--manifest", in_manifest, "manifest naming the clips (any kind)")->required();
    infer->add_option("--audio-dir", in_audio)->required();
    infer->add_option("--classes", in_classes, "classes.txt with the label order")->required();
    infer->add_option("--out", in_out, "predictions TSV");
    infer->add_option("--cache-dir", cache_dir, "feature cache directory");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "event-based scoring of prediction TSVs");
    std::string ev_ref, ev_est, ev_out;
    evaluate->add_option("--ref", ev_ref, "reference TSV")->required();
    evaluate->add_option("--est", ev_est, "estimated TSV")->required();
    evaluate->add_option("--out", ev_out, "scores CSV path");

    // report
    auto* report = app.add_subcommand("report", "summarize a training run");
    std::string rp_log, rp_scores, rp_out = "report";
    report->add_option("--log", rp_log, "training log CSV")->required();
    report->add_option("--scores", rp_scores, "scores CSV from evaluate");
    report->add_option("--out", rp_out, "report output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        const Config cfg = config_path.empty() ? Config() : Config::from_file(config_path);
        const FrontendConfig frontend = frontend_from(cfg);

        if (synth->parsed()) {
            const ToyDataset ds = synth_toy_dataset(toy, synth_out);
            std::ofstream os(fs::path(synth_out) / "classes.txt");
            for (const std::string& c : ds.class_list) os << c << '\n';
            std::cout << "wrote " << ds.files_written << " clips under " << synth_out << '\n';
            return 0;
        }

        if (extract->parsed()) {
            const std::string cache = resolve_cache_dir(cache_dir, ed_out + "/cache");
            const Manifest strong = read_manifest(ed_manifest, ManifestKind::kStrong);
            const auto classes = extract_dictionaries(strong, ed_audio, cache, cnmf_from(cfg), ed_out);
            std::cout << "extracted dictionaries for " << classes.size() << " classes into "
                      << ed_out << '\n';
            return 0;
        }

        if (pseudo->parsed()) {
            const std::string cache = resolve_cache_dir(cache_dir, pl_out + "/cache");
            const Manifest weak = read_manifest(pl_manifest, ManifestKind::kWeak);
            build_pseudo_labels(weak, pl_audio, cache, pl_dicts, cnmf_from(cfg), pl_out);
            std::cout << "pseudo labels written to " << pl_out << '\n';
            return 0;
        }

        if (train->parsed()) {
            TrainConfig tc = train_from(cfg);
            if (tr_seed >= 0) tc.seed = static_cast<std::uint64_t>(tr_seed);
            if (tr_warm >= 0) tc.warmup_epochs = static_cast<int>(tr_warm);
            if (tr_tune >= 0) tc.tuning_epochs = static_cast<int>(tr_tune);
            tc.resume_dir = tr_resume;

            PoolPaths paths;
            paths.audio_dir = tr_audio;
            paths.cache_dir = resolve_cache_dir(cache_dir, tr_out + "/cache");
            paths.strong_manifest = tr_strong;
            paths.weak_manifest = tr_weak;
            paths.pseudo_dir = tr_pseudo;
            paths.unlabeled_manifest = tr_unlabeled;
            paths.validation_manifest = tr_val;
            const DataPools pools = assemble_pools(paths, frontend);

            CmnParameters flm = init_params(model_from(cfg, "flm", pools.class_list.size()),
                                            tc.seed * 2 + 1);
            CmnParameters clm = init_params(model_from(cfg, "clm", pools.class_list.size()),
                                            tc.seed * 2 + 2);

            fs::create_directories(tr_out);
            {
                std::ofstream os(fs::path(tr_out) / "classes.txt");
                for (const std::string& c : pools.class_list) os << c << '\n';
            }
            const TrainResult result = run_training(
                tc, pools, flm, clm, tr_out, [](int epoch, TrainPhase phase, double f1) {
                    std::cout << "epoch " << epoch << " ("
                              << (phase == TrainPhase::kWarmup ? "warmup" : "tuning") << ")";
                    if (f1 >= 0.0) std::cout << " val F1 " << f1;
                    std::cout << '\n';
                });
            write_train_log((fs::path(tr_out) / "train_log.csv").string(), result.log);
            if (result.aborted_on_nan) {
                std::cerr << "training aborted on non-finite loss; last checkpoints kept\n";
                return 2;
            }
            std::cout << "training done; best val F1 " << result.best_validation_f1 << " (epoch "
                      << result.best_epoch << ")\n";
            return 0;
        }

        if (infer->parsed()) {
            const std::string cache = resolve_cache_dir(cache_dir, "cache");
            const CmnParameters flm = load_checkpoint(in_flm);
            const CmnParameters clm = load_checkpoint(in_clm);
            const std::vector<std::string> class_list = read_class_file(in_classes);
            // accept any manifest kind; only the filenames matter
            Manifest m;
            try {
                m = read_manifest(in_manifest, ManifestKind::kStrong);
            } catch (const std::exception&) {
                try {
                    m = read_manifest(in_manifest, ManifestKind::kWeak);
                } catch (const std::exception&) {
                    m = read_manifest(in_manifest, ManifestKind::kUnlabeled);
                }
            }
            std::map<std::string, EventList> predictions;
            for (const std::string& clip : m.filenames()) {
                const MelSpectrogram mel =
                    model_features((fs::path(in_audio) / clip).string(), cache, frontend);
                predictions[clip] = infer_events(mel, flm, clm, class_list, post_from(cfg));
            }
            write_event_tsv(in_out, predictions);
            std::cout << "wrote " << in_out << '\n';
            return 0;
        }

        if (evaluate->parsed()) {
            const auto ref = read_event_tsv(ev_ref);
            const auto est = read_event_tsv(ev_est);
            const EventScores scores = event_based_scores(ref, est);
            std::cout << format_scores_table(scores);
            if (!ev_out.empty()) write_scores_csv(ev_out, scores);
            return 0;
        }

        if (report->parsed()) {
            write_report(rp_log, rp_scores, rp_out);
            std::cout << "report written to " << rp_out << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
