#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sedw/eval.hpp"
#include "sedw/losses.hpp"
#include "sedw/model.hpp"
#include "sedw/optimizer.hpp"
#include "sedw/postprocess.hpp"

namespace sedw {

enum class AugmentKind { kNoise, kTimeMask, kFreqMask };

struct AugmentConfig {
    double noise_std_scale = 0.1; // times the feature std
    int time_mask_max = 20;       // frames
    int freq_mask_max = 8;        // bins
};

// Labels are never touched; the feature copy is modified.
MelSpectrogram augment(const MelSpectrogram& m, const std::vector<AugmentKind>& kinds,
                       const AugmentConfig& cfg, Rng& rng);

struct TrainingClip {
    std::string id;
    MelSpectrogram features;          // log-mel
    Matrix frame_targets;             // [frames x K]; empty for unlabeled clips
    std::vector<double> clip_targets; // [K]; empty for unlabeled clips
};

struct DataPools {
    std::vector<std::string> class_list;
    std::vector<TrainingClip> synthetic; // strong labels
    std::vector<TrainingClip> pseudo;    // CNMF pseudo strong labels
    std::vector<TrainingClip> unlabeled;
    std::vector<TrainingClip> validation;
    std::map<std::string, EventList> validation_ref;
};

struct Batch {
    std::vector<std::size_t> synthetic_idx;
    std::vector<std::size_t> pseudo_idx;
    std::vector<std::size_t> unlabeled_idx; // paired in order (0,1), (2,3), ...
};

// Draws seeded shuffled batches without replacement, reshuffling each pool
// when it runs out.
class BatchComposer {
public:
    BatchComposer(const DataPools& pools, std::uint64_t seed);

    // warmup: half synthetic + half pseudo; tuning: half labeled
    // (synthetic+pseudo mixed) + half unlabeled
    Batch compose_batch(TrainPhase phase, int batch_size);

private:
    std::size_t draw(std::vector<std::size_t>& queue, std::size_t pool_size);

    const DataPools& pools_;
    Rng rng_;
    std::vector<std::size_t> syn_queue_, pseudo_queue_, labeled_queue_, unlabeled_queue_;
};

struct TrainConfig {
    int warmup_epochs = 10;
    int tuning_epochs = 100;
    int batch_warmup = 32;
    int batch_tuning = 64;
    double lr_max = 0.0014;
    double lr_min = 1e-6;
    double lookahead_alpha = 0.5;
    long lookahead_k = 20;
    AdamConfig adam;
    std::uint64_t seed = 42;

    double lambda_max = 0.9;
    double lambda_min = 0.6;
    double mixup_alpha = 1.0;
    AugmentConfig augment;

    // 0 = derive from pool sizes (ceil of the largest per-batch requirement)
    int iters_per_epoch = 0;
    bool reset_optimizer_at_tuning = true;
    // ablations
    bool use_consistency = true;        // L_con
    bool use_interpolated = true;       // L_inter
    bool constant_lambda = false;       // keep lambda at lambda_max in phase 2
    bool bidirectional_consistency = false;
    // worker threads for the per-clip forward/backward jobs; 0 = one per
    // hardware thread (capped at 8). Results are bitwise identical for any
    // thread count: each job owns a slot and the reduction order is fixed.
    int threads = 0;

    // Directory holding flm_last/clm_last checkpoints (with optimizer state)
    // to continue from. Batch and RNG streams restart; determinism guarantees
    // apply to uninterrupted runs.
    std::string resume_dir;

    PostprocessConfig postprocess;
};

struct LogRow {
    long iteration = 0;
    double lr = 0.0, lambda = 0.0, w = 0.0;
    LossBreakdown loss;
};

struct TrainResult {
    std::vector<LogRow> log;
    double best_validation_f1 = -1.0;
    int best_epoch = -1;
    std::string flm_best, clm_best; // checkpoint paths
    std::string flm_last, clm_last;
    bool aborted_on_nan = false;
};

using EpochCallback = std::function<void(int epoch, TrainPhase, double val_f1)>;

// Two-phase loop: warm-up with rising LR and fixed lambda, then tuning with
// cosine-decaying LR, curriculum lambda and the ramped interpolated loss.
// Both models step synchronously; checkpoints land in out_dir.
TrainResult run_training(const TrainConfig& cfg, const DataPools& pools, CmnParameters& flm,
                         CmnParameters& clm, const std::string& out_dir,
                         const EpochCallback& on_epoch = nullptr);

void write_train_log(const std::string& path, const std::vector<LogRow>& log);

// Decodes events for one clip: CLM tags gate the FLM frame probabilities.
EventList infer_events(const MelSpectrogram& features, const CmnParameters& flm,
                       const CmnParameters& clm, const std::vector<std::string>& class_list,
                       const PostprocessConfig& cfg);

double validation_macro_f1(const DataPools& pools, const CmnParameters& flm,
                           const CmnParameters& clm, const PostprocessConfig& cfg);

} // namespace sedw
