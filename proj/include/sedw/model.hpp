#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sedw/frontend.hpp"
#include "sedw/matrix.hpp"

namespace sedw {

// [channels x time x freq]
struct Tensor3 {
    std::size_t c = 0, t = 0, f = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(std::size_t c_, std::size_t t_, std::size_t f_, double fill = 0.0)
        : c(c_), t(t_), f(f_), v(c_ * t_ * f_, fill) {}

    double& at(std::size_t ci, std::size_t ti, std::size_t fi) { return v[(ci * t + ti) * f + fi]; }
    double at(std::size_t ci, std::size_t ti, std::size_t fi) const { return v[(ci * t + ti) * f + fi]; }
    std::size_t size() const { return v.size(); }
};

// 3x3 kernel, stride 1, padding 1, followed by Mish and average pooling
struct ConvBlockParams {
    std::size_t in_ch = 0, out_ch = 0;
    std::vector<double> kernel; // [out][in][3][3]
    std::vector<double> bias;   // [out]
    std::size_t pool_t = 1, pool_f = 1;

    double& k(std::size_t o, std::size_t i, std::size_t u, std::size_t v_) {
        return kernel[((o * in_ch + i) * 3 + u) * 3 + v_];
    }
    double k(std::size_t o, std::size_t i, std::size_t u, std::size_t v_) const {
        return kernel[((o * in_ch + i) * 3 + u) * 3 + v_];
    }
};

// y = x * w + b with w [in x out]
struct DenseParams {
    Matrix w;
    std::vector<double> b;
};

struct LayerNormParams {
    std::vector<double> gain, bias;
};

struct PffParams {
    DenseParams fc1, fc2; // d_model -> d_ff -> d_model, Mish in between
};

struct AttentionParams {
    std::vector<Matrix> w_q, w_k, w_v; // per head, [d_model x d_k]
    Matrix w_o;                        // [d_model x d_model]

    std::size_t heads() const { return w_q.size(); }
};

struct MacaronLayerParams {
    PffParams pff1, pff2;
    AttentionParams att;
    LayerNormParams ln1, ln2, ln3;
};

enum class CmnVariant { kFlm, kClm };

struct CmnConfig {
    CmnVariant variant = CmnVariant::kFlm;
    std::size_t input_frames = 640;
    std::size_t input_bins = 64;
    std::vector<std::size_t> conv_filters;
    std::vector<std::pair<std::size_t, std::size_t>> conv_pools; // (time, freq)
    std::size_t encoder_layers = 1;
    std::size_t heads = 4;
    std::size_t n_classes = 10;
    bool positional_encoding = true;
    double macaron_half = 0.5;

    std::size_t seq_len() const;
    std::size_t freq_out() const;
    std::size_t d_model() const { return conv_filters.back() * freq_out(); }
    std::size_t d_ff() const { return conv_filters.back(); }
    void validate() const;

    // FLM: frequency-only pooling keeps all 640 frames.
    static CmnConfig flm_default();
    // CLM: deeper stack with time compression 640 -> 8.
    static CmnConfig clm_default();
};

struct CmnParameters {
    CmnConfig config;
    std::vector<ConvBlockParams> conv;
    std::vector<MacaronLayerParams> encoder;
    DenseParams classifier;
};

// Seeded fan-in-scaled uniform weights, zero biases, LN gain 1 / bias 0.
CmnParameters init_params(const CmnConfig& cfg, std::uint64_t seed);
CmnParameters zeros_like(const CmnParameters& p);

// Canonical enumeration of every trainable block, shared by the optimizer,
// checkpoints and the finite-difference checks.
void visit_params(CmnParameters& p,
                  const std::function<void(const std::string&, double*, std::size_t)>& fn);
void visit_params(const CmnParameters& p,
                  const std::function<void(const std::string&, const double*, std::size_t)>& fn);
std::size_t param_count(const CmnParameters& p);

double mish(double x);
double mish_grad(double x);
double stable_sigmoid(double x);

Matrix positional_encoding(std::size_t n, std::size_t d_model);

// Elementary forward ops, also used directly by the test oracles.
Matrix layer_norm(const Matrix& x, const LayerNormParams& p);
Matrix pff(const Matrix& x, const PffParams& p);
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v);
Matrix multi_head_attention(const Matrix& x, const AttentionParams& p);
Matrix macaron_layer(const Matrix& x, const MacaronLayerParams& p, double half = 0.5);
Tensor3 conv_block_forward(const Tensor3& x, const ConvBlockParams& p);

struct LayerNormTrace {
    Matrix x, xhat;
    std::vector<double> inv_std;
};

struct PffTrace {
    Matrix x, hidden_pre, hidden;
};

struct AttentionTrace {
    Matrix x;
    std::vector<Matrix> q, k, v, a; // per head
    Matrix concat;
};

struct MacaronTrace {
    PffTrace pff1, pff2;
    AttentionTrace att;
    LayerNormTrace ln1, ln2, ln3;
};

struct ConvBlockTrace {
    Tensor3 input, preact; // pooled output becomes the next input
    Tensor3 activated;
};

struct ForwardTrace {
    std::vector<ConvBlockTrace> conv;
    Matrix seq_in; // after flatten and positional encoding
    std::vector<MacaronTrace> layers;
    Matrix encoded;
    std::vector<double> pooled_mean; // CLM only
    Matrix classifier_in;            // [n x d_model] (FLM) or [1 x d_model] (CLM)
    Matrix probs;
};

// Frame probabilities [640 x K], all strictly in (0,1).
Matrix flm_forward(const MelSpectrogram& m, const CmnParameters& p, ForwardTrace* trace = nullptr);
// Clip probabilities [K].
std::vector<double> clm_forward(const MelSpectrogram& m, const CmnParameters& p,
                                ForwardTrace* trace = nullptr);

// Reverse-mode gradients for every parameter tensor. prob_grad is dL/dP with
// the same shape as the forward output ([frames x K] or [1 x K]).
CmnParameters backward(const Matrix& prob_grad, const ForwardTrace& trace, const CmnParameters& p);

std::vector<double> temporal_max_pool(const Matrix& frame_probs,
                                      std::vector<std::size_t>* argmax = nullptr);

void save_checkpoint(const std::string& path, const CmnParameters& p,
                     const std::map<std::string, std::string>& extra_attrs = {});
CmnParameters load_checkpoint(const std::string& path);

} // namespace sedw
