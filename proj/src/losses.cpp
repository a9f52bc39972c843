#include "sedw/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sedw {

namespace {

double clamp_p(double p) { return std::clamp(p, kBceClamp, 1.0 - kBceClamp); }

double bce_sum(const double* p, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pc = clamp_p(p[i]);
        acc -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
    }
    return acc;
}

double max_of(const std::vector<double>& v) {
    double best = -std::numeric_limits<double>::infinity();
    for (double x : v) best = std::max(best, x);
    return best;
}

} // namespace

double bce(const Matrix& p, const Matrix& y) {
    if (!p.same_shape(y)) throw std::invalid_argument("bce: shape mismatch");
    if (p.size() == 0) throw std::invalid_argument("bce: empty input");
    return bce_sum(p.data(), y.data(), p.size()) / static_cast<double>(p.size());
}

double bce(const std::vector<double>& p, const std::vector<double>& y) {
    if (p.size() != y.size()) throw std::invalid_argument("bce: shape mismatch");
    if (p.empty()) throw std::invalid_argument("bce: empty input");
    return bce_sum(p.data(), y.data(), p.size()) / static_cast<double>(p.size());
}

Matrix bce_grad(const Matrix& p, const Matrix& y, double extra_scale) {
    if (!p.same_shape(y)) throw std::invalid_argument("bce_grad: shape mismatch");
    Matrix g(p.rows(), p.cols());
    const double inv_n = extra_scale / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pv = p.values()[i];
        if (pv <= kBceClamp || pv >= 1.0 - kBceClamp) {
            g.values()[i] = 0.0; // clamp region is flat
            continue;
        }
        g.values()[i] = inv_n * (pv - y.values()[i]) / (pv * (1.0 - pv));
    }
    return g;
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("mse: shape mismatch");
    if (a.empty()) throw std::invalid_argument("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double lambda_curr(long t_curr, const CurriculumConfig& cfg) {
    if (t_curr < 0 || t_curr > cfg.total_iterations)
        throw std::invalid_argument("lambda_curr: t_curr out of range");
    const double phase = M_PI * static_cast<double>(t_curr) / static_cast<double>(cfg.total_iterations);
    return cfg.lambda_min + 0.5 * (cfg.lambda_max - cfg.lambda_min) * (1.0 + std::cos(phase));
}

double ramp_weight(long t_curr, long t_i) {
    if (t_curr < 0 || t_curr > t_i) throw std::invalid_argument("ramp_weight: t_curr out of range");
    return std::exp(-5.0 * (1.0 - static_cast<double>(t_curr) / static_cast<double>(t_i)));
}

double curriculum_consistency(const std::vector<double>& flm_c, const std::vector<double>& clm_c,
                              double lambda) {
    if (max_of(clm_c) > lambda) return mse(flm_c, clm_c);
    return 0.0;
}

double interpolated_consistency(const std::vector<double>& flm_uc,
                                const std::vector<double>& clm_uc, double lambda, double w) {
    if (max_of(clm_uc) > lambda) return w * mse(flm_uc, clm_uc);
    return 0.0;
}

MixupResult mixup(const Matrix& u1, const Matrix& u2, double alpha, Rng& rng) {
    const double lam = rng.beta(alpha, alpha);
    return {mixup_with(u1, u2, lam), lam};
}

Matrix mixup_with(const Matrix& u1, const Matrix& u2, double lambda_mix) {
    if (!u1.same_shape(u2)) throw std::invalid_argument("mixup: shape mismatch");
    Matrix out(u1.rows(), u1.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values()[i] = lambda_mix * u1.values()[i] + (1.0 - lambda_mix) * u2.values()[i];
    return out;
}

std::vector<double> mixup_with(const std::vector<double>& a, const std::vector<double>& b,
                               double lambda_mix) {
    if (a.size() != b.size()) throw std::invalid_argument("mixup: shape mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = lambda_mix * a[i] + (1.0 - lambda_mix) * b[i];
    return out;
}

LossBreakdown total_loss(const LossBatch& batch, TrainPhase phase, long t_curr,
                         const CurriculumConfig& cfg, long ramp_total_iterations) {
    if (phase == TrainPhase::kWarmup && (!batch.flm_uc.empty() || !batch.clm_uc.empty()))
        throw std::invalid_argument("total_loss: unlabeled data is not used in the warmup phase");
    if (batch.flm_frames.size() != batch.frame_targets.size() ||
        batch.clm_clip.size() != batch.clip_targets.size() ||
        batch.flm_uc.size() != batch.clm_uc.size())
        throw std::invalid_argument("total_loss: prediction/target count mismatch");

    LossBreakdown out;

    // L_F over all frame elements of the labeled clips
    if (!batch.flm_frames.empty()) {
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < batch.flm_frames.size(); ++i) {
            if (!batch.flm_frames[i].same_shape(batch.frame_targets[i]))
                throw std::invalid_argument("total_loss: frame target shape mismatch");
            acc += bce_sum(batch.flm_frames[i].data(), batch.frame_targets[i].data(),
                           batch.flm_frames[i].size());
            count += batch.flm_frames[i].size();
        }
        out.l_f = acc / static_cast<double>(count);
    }

    // L_C over the clip tags
    if (!batch.clm_clip.empty()) {
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < batch.clm_clip.size(); ++i) {
            acc += bce_sum(batch.clm_clip[i].data(), batch.clip_targets[i].data(),
                           batch.clm_clip[i].size());
            count += batch.clm_clip[i].size();
        }
        out.l_c = acc / static_cast<double>(count);
    }

    const double lambda =
        phase == TrainPhase::kWarmup ? cfg.lambda_max : lambda_curr(t_curr, cfg);

    // L_con: FLM clip prediction (temporal max pool of the frames) vs CLM
    if (!batch.flm_frames.empty()) {
        double acc = 0.0;
        int fired = 0;
        for (std::size_t i = 0; i < batch.flm_frames.size(); ++i) {
            const Matrix& fp = batch.flm_frames[i];
            std::vector<double> flm_c(fp.cols(), 0.0);
            for (std::size_t c = 0; c < fp.cols(); ++c)
                for (std::size_t t = 0; t < fp.rows(); ++t) flm_c[c] = std::max(flm_c[c], fp(t, c));
            if (max_of(batch.clm_clip[i]) > lambda) {
                acc += mse(flm_c, batch.clm_clip[i]);
                ++fired;
            }
        }
        out.l_con = fired > 0 ? acc / fired : 0.0;
        out.gates_fired += fired;
    }

    // L_inter on the mixed unlabeled pairs
    if (phase == TrainPhase::kTuning && !batch.flm_uc.empty()) {
        const double w = ramp_weight(t_curr, ramp_total_iterations);
        double acc = 0.0;
        int fired = 0;
        for (std::size_t i = 0; i < batch.flm_uc.size(); ++i) {
            if (max_of(batch.clm_uc[i]) > lambda) {
                acc += interpolated_consistency(batch.flm_uc[i], batch.clm_uc[i], lambda, w);
                ++fired;
            }
        }
        out.l_inter = fired > 0 ? acc / fired : 0.0;
        out.gates_fired += fired;
    }

    out.total = out.l_f + out.l_c + out.l_con + out.l_inter;
    return out;
}

} // namespace sedw
