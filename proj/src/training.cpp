#include "sedw/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "sedw/tensor_io.hpp"

namespace fs = std::filesystem;

namespace sedw {

namespace {

// Per-job slots keep the reduction order fixed regardless of scheduling.
template <typename Fn>
void parallel_jobs(std::size_t count, int threads, const Fn& fn) {
    const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (n_threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= count) return;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double feature_std(const Matrix& m) {
    double mean = 0.0;
    for (double x : m.values()) mean += x;
    mean /= static_cast<double>(m.size());
    double var = 0.0;
    for (double x : m.values()) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(m.size()));
}

void accumulate(CmnParameters& into, const CmnParameters& grads) {
    std::vector<std::pair<const double*, std::size_t>> spans;
    visit_params(grads, [&](const std::string&, const double* d, std::size_t n) {
        spans.emplace_back(d, n);
    });
    std::size_t block = 0;
    visit_params(into, [&](const std::string&, double* d, std::size_t n) {
        const auto [src, len] = spans[block++];
        for (std::size_t i = 0; i < n; ++i) d[i] += src[i];
    });
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

int resolve_threads(int configured) {
    if (configured > 0) return configured;
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

} // namespace

MelSpectrogram augment(const MelSpectrogram& m, const std::vector<AugmentKind>& kinds,
                       const AugmentConfig& cfg, Rng& rng) {
    MelSpectrogram out = m;
    for (AugmentKind kind : kinds) {
        switch (kind) {
        case AugmentKind::kNoise: {
            const double std = cfg.noise_std_scale * feature_std(out.values);
            for (double& x : out.values.values()) x += std * rng.normal();
            break;
        }
        case AugmentKind::kTimeMask: {
            if (cfg.time_mask_max <= 0) break;
            const std::size_t cap =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.time_mask_max), out.values.rows());
            const std::size_t span = 1 + rng.index(cap);
            const std::size_t start = rng.index(out.values.rows() - span + 1);
            for (std::size_t t = start; t < start + span; ++t)
                for (std::size_t f = 0; f < out.values.cols(); ++f) out.values(t, f) = 0.0;
            break;
        }
        case AugmentKind::kFreqMask: {
            if (cfg.freq_mask_max <= 0) break;
            const std::size_t cap =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.freq_mask_max), out.values.cols());
            const std::size_t span = 1 + rng.index(cap);
            const std::size_t start = rng.index(out.values.cols() - span + 1);
            for (std::size_t t = 0; t < out.values.rows(); ++t)
                for (std::size_t f = start; f < start + span; ++f) out.values(t, f) = 0.0;
            break;
        }
        }
    }
    return out;
}

BatchComposer::BatchComposer(const DataPools& pools, std::uint64_t seed)
    : pools_(pools), rng_(seed) {}

std::size_t BatchComposer::draw(std::vector<std::size_t>& queue, std::size_t pool_size) {
    if (queue.empty()) {
        queue.resize(pool_size);
        for (std::size_t i = 0; i < pool_size; ++i) queue[i] = i;
        rng_.shuffle(queue);
    }
    const std::size_t idx = queue.back();
    queue.pop_back();
    return idx;
}

Batch BatchComposer::compose_batch(TrainPhase phase, int batch_size) {
    Batch b;
    const std::size_t half = static_cast<std::size_t>(batch_size) / 2;
    if (phase == TrainPhase::kWarmup) {
        if (pools_.synthetic.empty() || pools_.pseudo.empty())
            throw std::runtime_error("compose_batch: warmup needs synthetic and pseudo pools");
        for (std::size_t i = 0; i < half; ++i)
            b.synthetic_idx.push_back(draw(syn_queue_, pools_.synthetic.size()));
        for (std::size_t i = 0; i < half; ++i)
            b.pseudo_idx.push_back(draw(pseudo_queue_, pools_.pseudo.size()));
    } else {
        if ((pools_.synthetic.empty() && pools_.pseudo.empty()) || pools_.unlabeled.empty())
            throw std::runtime_error("compose_batch: tuning needs labeled and unlabeled pools");
        const std::size_t n_labeled = pools_.synthetic.size() + pools_.pseudo.size();
        for (std::size_t i = 0; i < half; ++i) {
            const std::size_t j = draw(labeled_queue_, n_labeled);
            if (j < pools_.synthetic.size())
                b.synthetic_idx.push_back(j);
            else
                b.pseudo_idx.push_back(j - pools_.synthetic.size());
        }
        for (std::size_t i = 0; i < half; ++i)
            b.unlabeled_idx.push_back(draw(unlabeled_queue_, pools_.unlabeled.size()));
    }
    return b;
}

namespace {

struct StepContext {
    const TrainConfig& cfg;
    const DataPools& pools;
    TrainPhase phase;
    long t_curr;   // phase-local iteration
    long t_i;      // phase-local total iterations
    double lr;
    CmnParameters& flm;
    CmnParameters& clm;
    OptimizerState& flm_state;
    OptimizerState& clm_state;
    Rng& rng;
    int threads;
};

LossBreakdown train_step(StepContext& ctx, const Batch& batch) {
    const std::size_t n_classes = ctx.pools.class_list.size();
    const double lambda = (ctx.phase == TrainPhase::kWarmup || ctx.cfg.constant_lambda)
                              ? ctx.cfg.lambda_max
                              : lambda_curr(ctx.t_curr, {ctx.cfg.lambda_max, ctx.cfg.lambda_min,
                                                         ctx.t_i});
    const double w =
        ctx.phase == TrainPhase::kTuning ? ramp_weight(ctx.t_curr, ctx.t_i) : 0.0;

    // gather labeled clips (synthetic first, then pseudo) and augment them;
    // augmentation draws stay on the step RNG so runs are reproducible
    struct LabeledItem {
        const TrainingClip* clip;
        MelSpectrogram aug;
    };
    std::vector<LabeledItem> labeled;
    for (std::size_t idx : batch.synthetic_idx) labeled.push_back({&ctx.pools.synthetic[idx], {}});
    for (std::size_t idx : batch.pseudo_idx) labeled.push_back({&ctx.pools.pseudo[idx], {}});
    const std::vector<AugmentKind> labeled_kinds = {AugmentKind::kNoise, AugmentKind::kTimeMask,
                                                    AugmentKind::kFreqMask};
    for (LabeledItem& item : labeled)
        item.aug = augment(item.clip->features, labeled_kinds, ctx.cfg.augment, ctx.rng);

    struct PairItem {
        MelSpectrogram a1, a2, mixed;
        double lam = 1.0;
    };
    std::vector<PairItem> pairs;
    if (ctx.phase == TrainPhase::kTuning) {
        for (std::size_t i = 0; i + 1 < batch.unlabeled_idx.size(); i += 2) {
            PairItem p;
            p.a1 = augment(ctx.pools.unlabeled[batch.unlabeled_idx[i]].features,
                           {AugmentKind::kNoise}, ctx.cfg.augment, ctx.rng);
            p.a2 = augment(ctx.pools.unlabeled[batch.unlabeled_idx[i + 1]].features,
                           {AugmentKind::kNoise}, ctx.cfg.augment, ctx.rng);
            p.lam = ctx.rng.beta(ctx.cfg.mixup_alpha, ctx.cfg.mixup_alpha);
            p.mixed.is_log = p.a1.is_log;
            p.mixed.values = mixup_with(p.a1.values, p.a2.values, p.lam);
            pairs.push_back(std::move(p));
        }
    }

    const std::size_t n_labeled = labeled.size();
    const double inv_labeled = n_labeled > 0 ? 1.0 / static_cast<double>(n_labeled) : 0.0;

    // CLM over labeled clips: BCE toward the audio tags
    std::vector<std::vector<double>> clm_probs(n_labeled);
    std::vector<CmnParameters> clm_grads(n_labeled);
    std::vector<ForwardTrace> clm_traces;
    const bool keep_clm_traces = ctx.cfg.bidirectional_consistency;
    if (keep_clm_traces) clm_traces.resize(n_labeled);
    parallel_jobs(n_labeled, ctx.threads, [&](std::size_t i) {
        ForwardTrace local;
        ForwardTrace& tr = keep_clm_traces ? clm_traces[i] : local;
        clm_probs[i] = clm_forward(labeled[i].aug, ctx.clm, &tr);
        if (!keep_clm_traces) {
            Matrix p(1, n_classes);
            p.values() = clm_probs[i];
            Matrix y(1, n_classes);
            y.values() = labeled[i].clip->clip_targets;
            const Matrix dp = bce_grad(p, y, inv_labeled);
            clm_grads[i] = backward(dp, tr, ctx.clm);
        }
    });

    // consistency gates depend only on the CLM confidence
    std::vector<bool> con_gate(n_labeled, false);
    int n_gated_con = 0;
    if (ctx.cfg.use_consistency) {
        for (std::size_t i = 0; i < n_labeled; ++i) {
            double peak = 0.0;
            for (double p : clm_probs[i]) peak = std::max(peak, p);
            if (peak > lambda) {
                con_gate[i] = true;
                ++n_gated_con;
            }
        }
    }

    // FLM over labeled clips: BCE toward frame labels plus the gated
    // consistency pull toward the CLM prediction
    std::vector<Matrix> flm_probs(n_labeled);
    std::vector<std::vector<double>> flm_clip(n_labeled);
    std::vector<CmnParameters> flm_grads(n_labeled);
    parallel_jobs(n_labeled, ctx.threads, [&](std::size_t i) {
        ForwardTrace tr;
        flm_probs[i] = flm_forward(labeled[i].aug, ctx.flm, &tr);
        std::vector<std::size_t> argmax;
        flm_clip[i] = temporal_max_pool(flm_probs[i], &argmax);
        Matrix dp = bce_grad(flm_probs[i], labeled[i].clip->frame_targets, inv_labeled);
        if (con_gate[i]) {
            const double scale = 2.0 / (static_cast<double>(n_classes) * n_gated_con);
            for (std::size_t k = 0; k < n_classes; ++k)
                dp(argmax[k], k) += scale * (flm_clip[i][k] - clm_probs[i][k]);
        }
        flm_grads[i] = backward(dp, tr, ctx.flm);
    });

    // CLM over the unlabeled halves (forward only when unidirectional)
    std::vector<std::vector<double>> clm_uc(pairs.size());
    std::vector<std::vector<double>> clm_u1(pairs.size()), clm_u2(pairs.size());
    parallel_jobs(pairs.size(), ctx.threads, [&](std::size_t j) {
        clm_u1[j] = clm_forward(pairs[j].a1, ctx.clm, nullptr);
        clm_u2[j] = clm_forward(pairs[j].a2, ctx.clm, nullptr);
        clm_uc[j] = mixup_with(clm_u1[j], clm_u2[j], pairs[j].lam);
    });

    std::vector<bool> inter_gate(pairs.size(), false);
    int n_gated_inter = 0;
    if (ctx.cfg.use_interpolated) {
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            double peak = 0.0;
            for (double p : clm_uc[j]) peak = std::max(peak, p);
            if (peak > lambda) {
                inter_gate[j] = true;
                ++n_gated_inter;
            }
        }
    }

    // FLM over the mixed inputs, only where the gate fired
    std::vector<std::vector<double>> flm_uc(pairs.size(), std::vector<double>(n_classes, 0.0));
    std::vector<CmnParameters> pair_grads(pairs.size());
    std::vector<char> pair_has_grad(pairs.size(), 0);
    parallel_jobs(pairs.size(), ctx.threads, [&](std::size_t j) {
        if (!inter_gate[j]) return;
        ForwardTrace tr;
        const Matrix probs = flm_forward(pairs[j].mixed, ctx.flm, &tr);
        std::vector<std::size_t> argmax;
        flm_uc[j] = temporal_max_pool(probs, &argmax);
        Matrix dp(probs.rows(), probs.cols());
        const double scale = w * 2.0 / (static_cast<double>(n_classes) * n_gated_inter);
        for (std::size_t k = 0; k < n_classes; ++k)
            dp(argmax[k], k) = scale * (flm_uc[j][k] - clm_uc[j][k]);
        pair_grads[j] = backward(dp, tr, ctx.flm);
        pair_has_grad[j] = 1;
    });

    // optional reverse flow: the CLM also learns from the consistency terms
    if (ctx.cfg.bidirectional_consistency) {
        parallel_jobs(n_labeled, ctx.threads, [&](std::size_t i) {
            Matrix p(1, n_classes);
            p.values() = clm_probs[i];
            Matrix y(1, n_classes);
            y.values() = labeled[i].clip->clip_targets;
            Matrix dp = bce_grad(p, y, inv_labeled);
            if (con_gate[i]) {
                const double scale = 2.0 / (static_cast<double>(n_classes) * n_gated_con);
                for (std::size_t k = 0; k < n_classes; ++k)
                    dp(0, k) -= scale * (flm_clip[i][k] - clm_probs[i][k]);
            }
            clm_grads[i] = backward(dp, clm_traces[i], ctx.clm);
        });
    }

    // deterministic reduction in index order
    CmnParameters flm_total = zeros_like(ctx.flm);
    for (const CmnParameters& g : flm_grads) accumulate(flm_total, g);
    for (std::size_t j = 0; j < pairs.size(); ++j)
        if (pair_has_grad[j]) accumulate(flm_total, pair_grads[j]);
    CmnParameters clm_total = zeros_like(ctx.clm);
    for (const CmnParameters& g : clm_grads) accumulate(clm_total, g);

    // loss bookkeeping via the shared pure function
    LossBatch lb;
    for (std::size_t i = 0; i < n_labeled; ++i) {
        lb.flm_frames.push_back(flm_probs[i]);
        lb.frame_targets.push_back(labeled[i].clip->frame_targets);
        lb.clm_clip.push_back(clm_probs[i]);
        lb.clip_targets.push_back(labeled[i].clip->clip_targets);
    }
    if (ctx.cfg.use_interpolated) {
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            lb.flm_uc.push_back(flm_uc[j]);
            lb.clm_uc.push_back(clm_uc[j]);
        }
    }
    CurriculumConfig cc{ctx.cfg.lambda_max,
                        ctx.cfg.constant_lambda ? ctx.cfg.lambda_max : ctx.cfg.lambda_min,
                        ctx.t_i};
    LossBreakdown breakdown = total_loss(lb, ctx.phase, ctx.t_curr, cc, ctx.t_i);
    if (!ctx.cfg.use_consistency) {
        // total_loss gates on the CLM confidence alone; drop the ablated term
        int would_fire = 0;
        for (std::size_t i = 0; i < n_labeled; ++i) {
            double peak = 0.0;
            for (double p : clm_probs[i]) peak = std::max(peak, p);
            if (peak > lambda) ++would_fire;
        }
        breakdown.total -= breakdown.l_con;
        breakdown.l_con = 0.0;
        breakdown.gates_fired -= would_fire;
    }

    adam_step(ctx.flm, flm_total, ctx.flm_state, ctx.lr, ctx.cfg.adam);
    lookahead_sync(ctx.flm, ctx.flm_state, ctx.cfg.lookahead_alpha, ctx.cfg.lookahead_k);
    adam_step(ctx.clm, clm_total, ctx.clm_state, ctx.lr, ctx.cfg.adam);
    lookahead_sync(ctx.clm, ctx.clm_state, ctx.cfg.lookahead_alpha, ctx.cfg.lookahead_k);
    return breakdown;
}

void save_state_checkpoint(const std::string& path, const CmnParameters& p,
                           const OptimizerState& st,
                           const std::map<std::string, std::string>& attrs) {
    save_checkpoint(path, p, attrs);
    TensorArchive a = TensorArchive::load(path);
    Tensor m{{st.m.size()}, st.m}, v{{st.v.size()}, st.v}, slow{{st.slow.size()}, st.slow};
    a.put("opt.m", std::move(m));
    a.put("opt.v", std::move(v));
    a.put("opt.slow", std::move(slow));
    a.attrs["opt.step"] = std::to_string(st.step);
    a.save(path);
}

} // namespace

EventList infer_events(const MelSpectrogram& features, const CmnParameters& flm,
                       const CmnParameters& clm, const std::vector<std::string>& class_list,
                       const PostprocessConfig& cfg) {
    const std::vector<double> clip_probs = clm_forward(features, clm, nullptr);
    const std::set<std::string> tags = clip_tags(clip_probs, class_list, cfg.clip_threshold);
    if (tags.empty()) return {};
    const Matrix frame_probs = flm_forward(features, flm, nullptr);
    return frames_to_events(frame_probs, tags, class_list, cfg);
}

double validation_macro_f1(const DataPools& pools, const CmnParameters& flm,
                           const CmnParameters& clm, const PostprocessConfig& cfg) {
    if (pools.validation.empty()) return -1.0;
    std::map<std::string, EventList> est;
    for (const TrainingClip& clip : pools.validation)
        est[clip.id] = infer_events(clip.features, flm, clm, pools.class_list, cfg);
    return event_based_scores(pools.validation_ref, est).macro_f1;
}

TrainResult run_training(const TrainConfig& cfg, const DataPools& pools, CmnParameters& flm,
                         CmnParameters& clm, const std::string& out_dir,
                         const EpochCallback& on_epoch) {
    if (pools.synthetic.empty() || pools.pseudo.empty())
        throw std::invalid_argument("run_training: synthetic and pseudo pools are required");
    if (cfg.tuning_epochs > 0 && pools.unlabeled.empty())
        throw std::invalid_argument("run_training: tuning phase needs unlabeled clips");
    if (!(cfg.lr_min < cfg.lr_max))
        throw std::invalid_argument("run_training: lr_min must be below lr_max");
    if (cfg.lookahead_alpha <= 0.0 || cfg.lookahead_alpha > 1.0 || cfg.lookahead_k < 1)
        throw std::invalid_argument("run_training: lookahead_alpha in (0,1] and k >= 1 required");
    if (cfg.batch_warmup < 2 || cfg.batch_tuning < 2)
        throw std::invalid_argument("run_training: batch sizes must be at least 2");
    fs::create_directories(out_dir);

    const std::size_t half_warm = static_cast<std::size_t>(cfg.batch_warmup) / 2;
    const std::size_t half_tune = static_cast<std::size_t>(cfg.batch_tuning) / 2;
    const long iters_warm =
        cfg.iters_per_epoch > 0
            ? cfg.iters_per_epoch
            : static_cast<long>(std::max(ceil_div(pools.synthetic.size(), half_warm),
                                         ceil_div(pools.pseudo.size(), half_warm)));
    const long iters_tune =
        cfg.iters_per_epoch > 0
            ? cfg.iters_per_epoch
            : static_cast<long>(std::max(
                  ceil_div(pools.synthetic.size() + pools.pseudo.size(), half_tune),
                  ceil_div(pools.unlabeled.size(), half_tune)));

    const long t_i_warm = std::max(1L, cfg.warmup_epochs * iters_warm);
    const long t_i_tune = std::max(1L, cfg.tuning_epochs * iters_tune);

    BatchComposer composer(pools, cfg.seed);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    OptimizerState flm_state = OptimizerState::init(flm);
    OptimizerState clm_state = OptimizerState::init(clm);
    const int threads = resolve_threads(cfg.threads);

    int start_epoch_global = 0;
    if (!cfg.resume_dir.empty()) {
        // accept either the run directory or one of its checkpoint files
        fs::path resume_root(cfg.resume_dir);
        if (fs::is_regular_file(resume_root)) resume_root = resume_root.parent_path();
        auto load_one = [](const std::string& path, CmnParameters& params, OptimizerState& st) {
            params = load_checkpoint(path);
            TensorArchive a = TensorArchive::load(path);
            st.m = a.get("opt.m").data;
            st.v = a.get("opt.v").data;
            st.slow = a.get("opt.slow").data;
            st.step = std::stol(a.attrs.at("opt.step"));
            return std::stoi(a.attrs.at("epoch")) + 1;
        };
        start_epoch_global =
            load_one((resume_root / "flm_last.ckpt").string(), flm, flm_state);
        load_one((resume_root / "clm_last.ckpt").string(), clm, clm_state);
    }

    TrainResult result;
    result.flm_last = (fs::path(out_dir) / "flm_last.ckpt").string();
    result.clm_last = (fs::path(out_dir) / "clm_last.ckpt").string();
    result.flm_best = (fs::path(out_dir) / "flm_best.ckpt").string();
    result.clm_best = (fs::path(out_dir) / "clm_best.ckpt").string();

    long global_iter = 0;
    for (int phase_idx = 0; phase_idx < 2; ++phase_idx) {
        const TrainPhase phase = phase_idx == 0 ? TrainPhase::kWarmup : TrainPhase::kTuning;
        const int epochs = phase == TrainPhase::kWarmup ? cfg.warmup_epochs : cfg.tuning_epochs;
        const long iters = phase == TrainPhase::kWarmup ? iters_warm : iters_tune;
        const long t_i = phase == TrainPhase::kWarmup ? t_i_warm : t_i_tune;
        const int batch_size = phase == TrainPhase::kWarmup ? cfg.batch_warmup : cfg.batch_tuning;

        if (phase == TrainPhase::kTuning && cfg.reset_optimizer_at_tuning) {
            flm_state = OptimizerState::init(flm);
            clm_state = OptimizerState::init(clm);
        }

        for (int epoch = 0; epoch < epochs; ++epoch) {
            const int this_epoch_global =
                phase == TrainPhase::kWarmup ? epoch : cfg.warmup_epochs + epoch;
            if (this_epoch_global < start_epoch_global) {
                global_iter += iters;
                continue;
            }
            for (long it = 0; it < iters; ++it) {
                const long t_curr = static_cast<long>(epoch) * iters + it;
                const double lr = phase == TrainPhase::kWarmup
                                      ? lr_warmup(t_curr, t_i_warm, cfg.lr_min, cfg.lr_max)
                                      : lr_decay(t_curr, t_i_tune, cfg.lr_min, cfg.lr_max);
                const Batch batch = composer.compose_batch(phase, batch_size);
                StepContext ctx{cfg, pools, phase, t_curr, t_i, lr,
                                flm, clm, flm_state, clm_state, rng, threads};
                LossBreakdown breakdown;
                bool nan_abort = false;
                try {
                    breakdown = train_step(ctx, batch);
                } catch (const std::runtime_error&) {
                    nan_abort = true;
                }
                if (nan_abort || !std::isfinite(breakdown.total)) {
                    result.aborted_on_nan = true; // last-good checkpoints stay on disk
                    return result;
                }
                LogRow row;
                row.iteration = global_iter++;
                row.lr = lr;
                row.lambda = (phase == TrainPhase::kWarmup || cfg.constant_lambda)
                                 ? cfg.lambda_max
                                 : lambda_curr(t_curr, {cfg.lambda_max, cfg.lambda_min, t_i});
                row.w = phase == TrainPhase::kTuning ? ramp_weight(t_curr, t_i) : 0.0;
                row.loss = breakdown;
                result.log.push_back(row);
            }

            const int epoch_global = this_epoch_global;
            std::map<std::string, std::string> attrs{
                {"epoch", std::to_string(epoch_global)},
                {"phase", phase == TrainPhase::kWarmup ? "warmup" : "tuning"},
                {"global_iter", std::to_string(global_iter)}};
            char name[64];
            std::snprintf(name, sizeof(name), "flm_epoch%04d.ckpt", epoch_global);
            save_checkpoint((fs::path(out_dir) / name).string(), flm, attrs);
            std::snprintf(name, sizeof(name), "clm_epoch%04d.ckpt", epoch_global);
            save_checkpoint((fs::path(out_dir) / name).string(), clm, attrs);
            save_state_checkpoint(result.flm_last, flm, flm_state, attrs);
            save_state_checkpoint(result.clm_last, clm, clm_state, attrs);

            double val_f1 = -1.0;
            if (!pools.validation.empty()) {
                val_f1 = validation_macro_f1(pools, flm, clm, cfg.postprocess);
                if (val_f1 > result.best_validation_f1) {
                    result.best_validation_f1 = val_f1;
                    result.best_epoch = epoch_global;
                    save_checkpoint(result.flm_best, flm, attrs);
                    save_checkpoint(result.clm_best, clm, attrs);
                }
            }
            if (on_epoch) on_epoch(epoch_global, phase, val_f1);
        }
    }

    if (pools.validation.empty()) {
        // no validation split: best = final
        save_checkpoint(result.flm_best, flm, {});
        save_checkpoint(result.clm_best, clm, {});
    }
    return result;
}

void write_train_log(const std::string& path, const std::vector<LogRow>& log) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "iteration,lr,lambda,w,l_f,l_c,l_con,l_inter,gates_fired\n";
    char buf[256];
    for (const LogRow& r : log) {
        std::snprintf(buf, sizeof(buf), "%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n",
                      r.iteration, r.lr, r.lambda, r.w, r.loss.l_f, r.loss.l_c, r.loss.l_con,
                      r.loss.l_inter, r.loss.gates_fired);
        os << buf;
    }
}

} // namespace sedw
