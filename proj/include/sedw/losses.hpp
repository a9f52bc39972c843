#pragma once

#include <cstdint>
#include <vector>

#include "sedw/matrix.hpp"
#include "sedw/rng.hpp"

namespace sedw {

inline constexpr double kBceClamp = 1e-7;

struct LossBreakdown {
    double l_f = 0.0, l_c = 0.0, l_con = 0.0, l_inter = 0.0, total = 0.0;
    int gates_fired = 0;
};

struct CurriculumConfig {
    double lambda_max = 0.9;
    double lambda_min = 0.6;
    long total_iterations = 1; // T_i
};

enum class TrainPhase { kWarmup, kTuning };

// mean over all elements of -[y ln p + (1-y) ln(1-p)], p clamped to
// [1e-7, 1-1e-7]
double bce(const Matrix& p, const Matrix& y);
double bce(const std::vector<double>& p, const std::vector<double>& y);

// dL/dp of the clamped BCE mean; extra_scale rescales the 1/N normalizer
// when the mean runs over more matrices than this one.
Matrix bce_grad(const Matrix& p, const Matrix& y, double extra_scale = 1.0);

double mse(const std::vector<double>& a, const std::vector<double>& b);

// cosine from lambda_max down to lambda_min over total_iterations
double lambda_curr(long t_curr, const CurriculumConfig& cfg);

// exp(-5 (1 - t/T)) ramp for the interpolated consistency weight
double ramp_weight(long t_curr, long t_i);

// MSE(flm_c, clm_c) when max(clm_c) > lambda, else 0 (single sample)
double curriculum_consistency(const std::vector<double>& flm_c, const std::vector<double>& clm_c,
                              double lambda);

// w * MSE(flm_uc, clm_uc) when max(clm_uc) > lambda, else 0, where flm_uc is
// the max-pooled FLM prediction on the mixed pair and clm_uc the mixup of the
// CLM predictions on its halves (single pair)
double interpolated_consistency(const std::vector<double>& flm_uc,
                                const std::vector<double>& clm_uc, double lambda, double w);

struct MixupResult {
    Matrix mixed;
    double lambda_mix = 1.0;
};

MixupResult mixup(const Matrix& u1, const Matrix& u2, double alpha, Rng& rng);
Matrix mixup_with(const Matrix& u1, const Matrix& u2, double lambda_mix);
std::vector<double> mixup_with(const std::vector<double>& a, const std::vector<double>& b,
                               double lambda_mix);

// Pre-computed batch predictions; total_loss is a pure function of these.
struct LossBatch {
    // labeled clips
    std::vector<Matrix> flm_frames;                 // per clip [frames x K]
    std::vector<Matrix> frame_targets;              // strong or pseudo strong labels
    std::vector<std::vector<double>> clm_clip;      // per clip [K]
    std::vector<std::vector<double>> clip_targets;  // audio tags
    // unlabeled pairs (tuning phase)
    std::vector<std::vector<double>> flm_uc; // M(FLM(mixup(u1,u2)))
    std::vector<std::vector<double>> clm_uc; // mixup(CLM(u1), CLM(u2))
};

// Warmup: L_F + L_C + L_con at fixed lambda_max; tuning adds L_inter with
// the cosine lambda and the ramp weight. Gates are applied per sample and
// gated losses average over passing samples only.
LossBreakdown total_loss(const LossBatch& batch, TrainPhase phase, long t_curr,
                         const CurriculumConfig& cfg, long ramp_total_iterations);

} // namespace sedw
