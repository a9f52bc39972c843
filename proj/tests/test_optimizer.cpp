#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sedw/optimizer.hpp"
#include "sedw/training.hpp"

using namespace sedw;

namespace {

CmnConfig micro_config() {
    CmnConfig c;
    c.variant = CmnVariant::kFlm;
    c.input_frames = 8;
    c.input_bins = 4;
    c.conv_filters = {2};
    c.conv_pools = {{1, 4}};
    c.encoder_layers = 1;
    c.heads = 1;
    c.n_classes = 2;
    return c;
}

CmnParameters grads_like(const CmnParameters& p, double value) {
    CmnParameters g = zeros_like(p);
    visit_params(g, [&](const std::string&, double* d, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) d[i] = value;
    });
    return g;
}

std::vector<double> flatten(const CmnParameters& p) {
    std::vector<double> out;
    visit_params(p, [&](const std::string&, const double* d, std::size_t n) {
        out.insert(out.end(), d, d + n);
    });
    return out;
}

} // namespace

TEST_CASE("cosine learning rate schedules hit the exact endpoints") {
    const double lr_min = 1e-6, lr_max = 0.0014;
    CHECK(std::fabs(lr_warmup(0, 1000, lr_min, lr_max) - lr_min) < 1e-12);
    CHECK(std::fabs(lr_warmup(1000, 1000, lr_min, lr_max) - lr_max) < 1e-12);
    CHECK(std::fabs(lr_warmup(500, 1000, lr_min, lr_max) - 0.0007005) < 1e-12);
    CHECK(std::fabs(lr_decay(0, 1000, lr_min, lr_max) - lr_max) < 1e-12);
    CHECK(std::fabs(lr_decay(1000, 1000, lr_min, lr_max) - lr_min) < 1e-12);

    double prev = lr_warmup(0, 200, lr_min, lr_max);
    for (long t = 1; t <= 200; ++t) {
        const double v = lr_warmup(t, 200, lr_min, lr_max);
        CHECK(v >= prev);
        prev = v;
    }
    prev = lr_decay(0, 200, lr_min, lr_max);
    for (long t = 1; t <= 200; ++t) {
        const double v = lr_decay(t, 200, lr_min, lr_max);
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    CmnParameters p = init_params(micro_config(), 3);
    const std::vector<double> before = flatten(p);
    OptimizerState st = OptimizerState::init(p);
    adam_step(p, zeros_like(p), st, 0.01);
    CHECK(flatten(p) == before);
}

TEST_CASE("adam first step has the closed form -lr * g / (|g| + eps)") {
    CmnParameters p = init_params(micro_config(), 5);
    const std::vector<double> before = flatten(p);
    OptimizerState st = OptimizerState::init(p);
    const double g = 0.37, lr = 0.01;
    AdamConfig cfg;
    adam_step(p, grads_like(p, g), st, lr, cfg);
    const std::vector<double> after = flatten(p);
    const double expected_delta = -lr * g / (std::fabs(g) + cfg.epsilon);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(after[i] - before[i] == doctest::Approx(expected_delta).epsilon(1e-9));
}

TEST_CASE("adam trajectories are reproducible and reject non-finite gradients") {
    CmnParameters a = init_params(micro_config(), 7);
    CmnParameters b = init_params(micro_config(), 7);
    OptimizerState sa = OptimizerState::init(a), sb = OptimizerState::init(b);
    for (int i = 0; i < 5; ++i) {
        adam_step(a, grads_like(a, 0.1 * (i + 1)), sa, 0.003);
        adam_step(b, grads_like(b, 0.1 * (i + 1)), sb, 0.003);
    }
    CHECK(flatten(a) == flatten(b));

    CmnParameters bad_g = grads_like(a, 0.0);
    bad_g.classifier.w(0, 0) = std::nan("");
    CHECK_THROWS_WITH_AS(adam_step(a, bad_g, sa, 0.01), doctest::Contains("classifier.w"),
                         std::runtime_error);
}

TEST_CASE("lookahead sync interpolates the slow weights every k steps") {
    CmnParameters p = init_params(micro_config(), 9);
    OptimizerState st = OptimizerState::init(p);

    // fast == slow: nothing changes at sync
    st.step = 20;
    const std::vector<double> before = flatten(p);
    lookahead_sync(p, st, 0.5, 20);
    CHECK(flatten(p) == before);

    // alpha 0.5, slow 0, fast 2 -> both 1
    visit_params(p, [&](const std::string&, double* d, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) d[i] = 2.0;
    });
    std::fill(st.slow.begin(), st.slow.end(), 0.0);
    st.step = 40;
    lookahead_sync(p, st, 0.5, 20);
    for (double v : flatten(p)) CHECK(v == 1.0);
    for (double v : st.slow) CHECK(v == 1.0);

    // off-cadence steps leave everything alone
    visit_params(p, [&](const std::string&, double* d, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) d[i] = 5.0;
    });
    st.step = 41;
    lookahead_sync(p, st, 0.5, 20);
    for (double v : flatten(p)) CHECK(v == 5.0);

    // alpha 1 adopts the fast weights outright
    st.step = 60;
    lookahead_sync(p, st, 1.0, 20);
    for (double v : st.slow) CHECK(v == 5.0);
}

TEST_CASE("lookahead with alpha=1, k=1 is numerically plain adam") {
    CmnParameters plain = init_params(micro_config(), 11);
    CmnParameters wrapped = init_params(micro_config(), 11);
    OptimizerState sp = OptimizerState::init(plain), sw = OptimizerState::init(wrapped);
    for (int i = 0; i < 7; ++i) {
        const double g = 0.05 * (i + 1);
        adam_step(plain, grads_like(plain, g), sp, 0.002);
        adam_step(wrapped, grads_like(wrapped, g), sw, 0.002);
        lookahead_sync(wrapped, sw, 1.0, 1);
    }
    CHECK(flatten(plain) == flatten(wrapped));
}

TEST_CASE("augmentation kinds") {
    Rng rng(3);
    MelSpectrogram m;
    m.values = Matrix(32, 16);
    for (double& v : m.values.values()) v = rng.uniform(-1, 1);
    AugmentConfig cfg;

    // empty kind set: identity
    Rng r0(5);
    const MelSpectrogram same = augment(m, {}, cfg, r0);
    CHECK(max_abs_diff(same.values, m.values) == 0.0);

    // time mask zeroes a full span of frames and nothing else
    Rng r1(7);
    const MelSpectrogram masked = augment(m, {AugmentKind::kTimeMask}, cfg, r1);
    int masked_rows = 0;
    for (std::size_t t = 0; t < 32; ++t) {
        bool all_zero = true, any_changed = false;
        for (std::size_t f = 0; f < 16; ++f) {
            all_zero &= masked.values(t, f) == 0.0;
            any_changed |= masked.values(t, f) != m.values(t, f);
        }
        if (any_changed) {
            CHECK(all_zero);
            ++masked_rows;
        }
    }
    CHECK(masked_rows >= 1);
    CHECK(masked_rows <= cfg.time_mask_max);

    // frequency mask zeroes a band of bins
    Rng r2(9);
    const MelSpectrogram fmasked = augment(m, {AugmentKind::kFreqMask}, cfg, r2);
    int masked_cols = 0;
    for (std::size_t f = 0; f < 16; ++f) {
        bool all_zero = true;
        for (std::size_t t = 0; t < 32; ++t) all_zero &= fmasked.values(t, f) == 0.0;
        if (all_zero) ++masked_cols;
    }
    CHECK(masked_cols >= 1);
    CHECK(masked_cols <= cfg.freq_mask_max);

    // seeded noise is reproducible and roughly 0.1 x feature std
    Rng r3(11), r4(11);
    const MelSpectrogram n1 = augment(m, {AugmentKind::kNoise}, cfg, r3);
    const MelSpectrogram n2 = augment(m, {AugmentKind::kNoise}, cfg, r4);
    CHECK(max_abs_diff(n1.values, n2.values) == 0.0);
    CHECK(max_abs_diff(n1.values, m.values) > 0.0);
}

namespace {

DataPools tiny_pools(std::size_t n_syn, std::size_t n_pseudo, std::size_t n_unlabeled) {
    DataPools pools;
    pools.class_list = {"a", "b"};
    auto make_clip = [&](const std::string& id) {
        TrainingClip c;
        c.id = id;
        c.features.values = Matrix(8, 4, 0.1);
        c.frame_targets = Matrix(8, 2);
        c.clip_targets = {1.0, 0.0};
        return c;
    };
    for (std::size_t i = 0; i < n_syn; ++i) pools.synthetic.push_back(make_clip("s" + std::to_string(i)));
    for (std::size_t i = 0; i < n_pseudo; ++i) pools.pseudo.push_back(make_clip("p" + std::to_string(i)));
    for (std::size_t i = 0; i < n_unlabeled; ++i) {
        TrainingClip c;
        c.id = "u" + std::to_string(i);
        c.features.values = Matrix(8, 4, 0.2);
        pools.unlabeled.push_back(c);
    }
    return pools;
}

} // namespace

TEST_CASE("batch composition splits and reproducibility") {
    const DataPools pools = tiny_pools(32, 32, 64);

    BatchComposer a(pools, 42);
    const Batch warm = a.compose_batch(TrainPhase::kWarmup, 32);
    CHECK(warm.synthetic_idx.size() == 16);
    CHECK(warm.pseudo_idx.size() == 16);
    CHECK(warm.unlabeled_idx.empty());

    const Batch tune = a.compose_batch(TrainPhase::kTuning, 64);
    CHECK(tune.synthetic_idx.size() + tune.pseudo_idx.size() == 32);
    CHECK(tune.unlabeled_idx.size() == 32);

    // identical seeds give identical sequences
    BatchComposer b1(pools, 7), b2(pools, 7);
    for (int i = 0; i < 6; ++i) {
        const Batch x = b1.compose_batch(TrainPhase::kWarmup, 32);
        const Batch y = b2.compose_batch(TrainPhase::kWarmup, 32);
        CHECK(x.synthetic_idx == y.synthetic_idx);
        CHECK(x.pseudo_idx == y.pseudo_idx);
    }

    // without replacement: two warmup batches exhaust a pool of 32 exactly
    BatchComposer c(pools, 13);
    std::set<std::size_t> seen;
    for (int i = 0; i < 2; ++i)
        for (std::size_t idx : c.compose_batch(TrainPhase::kWarmup, 32).synthetic_idx)
            CHECK(seen.insert(idx).second);
    CHECK(seen.size() == 32);

    DataPools empty;
    empty.class_list = {"a"};
    BatchComposer d(empty, 1);
    CHECK_THROWS(d.compose_batch(TrainPhase::kWarmup, 32));
}
