#include "sedw/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace sedw {

double lr_warmup(long t_curr, long t_i, double lr_min, double lr_max) {
    if (t_curr < 0 || t_curr > t_i) throw std::invalid_argument("lr_warmup: t_curr out of range");
    const double phase =
        M_PI * static_cast<double>(t_i - t_curr) / static_cast<double>(t_i);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

double lr_decay(long t_curr, long t_i, double lr_min, double lr_max) {
    if (t_curr < 0 || t_curr > t_i) throw std::invalid_argument("lr_decay: t_curr out of range");
    const double phase = M_PI * static_cast<double>(t_curr) / static_cast<double>(t_i);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

OptimizerState OptimizerState::init(const CmnParameters& p) {
    OptimizerState s;
    const std::size_t n = param_count(p);
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.slow.reserve(n);
    visit_params(p, [&](const std::string&, const double* data, std::size_t len) {
        s.slow.insert(s.slow.end(), data, data + len);
    });
    s.step = 0;
    return s;
}

void OptimizerState::reset_moments() {
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    step = 0;
}

void adam_step(CmnParameters& params, const CmnParameters& grads, OptimizerState& state,
               double lr, const AdamConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    // gather gradient spans in the same canonical order as the parameters
    std::vector<std::pair<const double*, std::size_t>> gspans;
    std::vector<std::string> gnames;
    visit_params(grads, [&](const std::string& name, const double* data, std::size_t len) {
        gspans.emplace_back(data, len);
        gnames.push_back(name);
    });

    std::size_t block = 0, offset = 0;
    visit_params(params, [&](const std::string& name, double* data, std::size_t len) {
        const auto [gdata, glen] = gspans[block];
        if (glen != len || gnames[block] != name)
            throw std::invalid_argument("adam_step: gradient structure mismatch at " + name);
        for (std::size_t i = 0; i < len; ++i) {
            const double g = gdata[i];
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in block " + name);
            const std::size_t j = offset + i;
            state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g;
            state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g * g;
            const double mhat = state.m[j] / bc1;
            const double vhat = state.v[j] / bc2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
        offset += len;
        ++block;
    });
}

void lookahead_sync(CmnParameters& fast, OptimizerState& state, double alpha, long k) {
    if (k < 1) throw std::invalid_argument("lookahead_sync: k must be >= 1");
    if (state.step % k != 0 || state.step == 0) return;
    std::size_t offset = 0;
    visit_params(fast, [&](const std::string&, double* data, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t j = offset + i;
            state.slow[j] += alpha * (data[i] - state.slow[j]);
            data[i] = state.slow[j];
        }
        offset += len;
    });
}

} // namespace sedw
