#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sedw/model.hpp"

namespace sedw {

// Cosine warm-up: lr_min at t=0, rising to lr_max at t=T.
double lr_warmup(long t_curr, long t_i, double lr_min, double lr_max);
// Cosine decay: lr_max at t=0, falling to lr_min at t=T.
double lr_decay(long t_curr, long t_i, double lr_min, double lr_max);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam moments plus the Lookahead slow weights, flattened in the canonical
// visit_params order.
struct OptimizerState {
    std::vector<double> m, v, slow;
    long step = 0;

    static OptimizerState init(const CmnParameters& p);
    void reset_moments();
};

// Bias-corrected Adam update; throws on non-finite gradients, naming the
// offending block.
void adam_step(CmnParameters& params, const CmnParameters& grads, OptimizerState& state,
               double lr, const AdamConfig& cfg = {});

// Every k-th step: slow += alpha (fast - slow); fast = slow.
void lookahead_sync(CmnParameters& fast, OptimizerState& state, double alpha, long k);

} // namespace sedw
