#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sedw/model.hpp"

namespace sedw {

namespace {

Matrix dense_fwd(const Matrix& x, const DenseParams& p) {
    Matrix y = matmul(x, p.w);
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += p.b[c];
    return y;
}

void softmax_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double* row = m.row(r);
        double peak = row[0];
        for (std::size_t c = 1; c < m.cols(); ++c) peak = std::max(peak, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            row[c] = std::exp(row[c] - peak);
            sum += row[c];
        }
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] /= sum;
    }
}

constexpr double kLnEpsilon = 1e-5;

Matrix layer_norm_fwd(const Matrix& x, const LayerNormParams& p, LayerNormTrace* tr) {
    if (x.cols() != p.gain.size()) throw std::invalid_argument("layer_norm: width mismatch");
    Matrix y(x.rows(), x.cols());
    std::vector<double> inv_std(x.rows());
    Matrix xhat(x.rows(), x.cols());
    const double d = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* row = x.row(r);
        double mean = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) mean += row[c];
        mean /= d;
        double var = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double dx = row[c] - mean;
            var += dx * dx;
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + kLnEpsilon);
        inv_std[r] = is;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double xh = (row[c] - mean) * is;
            xhat(r, c) = xh;
            y(r, c) = xh * p.gain[c] + p.bias[c];
        }
    }
    if (tr) {
        tr->x = x;
        tr->xhat = std::move(xhat);
        tr->inv_std = std::move(inv_std);
    }
    return y;
}

Matrix layer_norm_bwd(const Matrix& dy, const LayerNormTrace& tr, const LayerNormParams& p,
                      LayerNormParams& gp) {
    const std::size_t n = dy.rows(), d = dy.cols();
    Matrix dx(n, d);
    const double dd = static_cast<double>(d);
    for (std::size_t r = 0; r < n; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double g = dy(r, c);
            gp.gain[c] += g * tr.xhat(r, c);
            gp.bias[c] += g;
            const double dxh = g * p.gain[c];
            m1 += dxh;
            m2 += dxh * tr.xhat(r, c);
        }
        m1 /= dd;
        m2 /= dd;
        for (std::size_t c = 0; c < d; ++c) {
            const double dxh = dy(r, c) * p.gain[c];
            dx(r, c) = tr.inv_std[r] * (dxh - m1 - tr.xhat(r, c) * m2);
        }
    }
    return dx;
}

Matrix pff_fwd(const Matrix& x, const PffParams& p, PffTrace* tr) {
    Matrix hidden_pre = dense_fwd(x, p.fc1);
    Matrix hidden = hidden_pre;
    for (double& v : hidden.values()) v = mish(v);
    Matrix y = dense_fwd(hidden, p.fc2);
    if (tr) {
        tr->x = x;
        tr->hidden_pre = std::move(hidden_pre);
        tr->hidden = std::move(hidden);
    }
    return y;
}

Matrix pff_bwd(const Matrix& dy, const PffTrace& tr, const PffParams& p, PffParams& gp) {
    add_inplace(gp.fc2.w, matmul_at_b(tr.hidden, dy));
    for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t c = 0; c < dy.cols(); ++c) gp.fc2.b[c] += dy(r, c);
    Matrix dh = matmul_a_bt(dy, p.fc2.w);
    for (std::size_t i = 0; i < dh.size(); ++i)
        dh.values()[i] *= mish_grad(tr.hidden_pre.values()[i]);
    add_inplace(gp.fc1.w, matmul_at_b(tr.x, dh));
    for (std::size_t r = 0; r < dh.rows(); ++r)
        for (std::size_t c = 0; c < dh.cols(); ++c) gp.fc1.b[c] += dh(r, c);
    return matmul_a_bt(dh, p.fc1.w);
}

Matrix mha_fwd(const Matrix& x, const AttentionParams& p, AttentionTrace* tr) {
    const std::size_t n = x.rows();
    const std::size_t h = p.heads();
    const std::size_t d_k = p.w_q[0].cols();
    Matrix concat(n, h * d_k);
    if (tr) {
        tr->x = x;
        tr->q.resize(h);
        tr->k.resize(h);
        tr->v.resize(h);
        tr->a.resize(h);
    }
    for (std::size_t i = 0; i < h; ++i) {
        Matrix q = matmul(x, p.w_q[i]);
        Matrix k = matmul(x, p.w_k[i]);
        Matrix v = matmul(x, p.w_v[i]);
        Matrix a = matmul_a_bt(q, k);
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_k));
        for (double& s : a.values()) s *= inv_scale;
        softmax_rows(a);
        Matrix ho = matmul(a, v);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d_k; ++c) concat(r, i * d_k + c) = ho(r, c);
        if (tr) {
            tr->q[i] = std::move(q);
            tr->k[i] = std::move(k);
            tr->v[i] = std::move(v);
            tr->a[i] = std::move(a);
        }
    }
    Matrix out = matmul(concat, p.w_o);
    if (tr) tr->concat = std::move(concat);
    return out;
}

Matrix softmax_rows_bwd(const Matrix& a, const Matrix& da) {
    Matrix ds(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) dot += da(r, c) * a(r, c);
        for (std::size_t c = 0; c < a.cols(); ++c) ds(r, c) = a(r, c) * (da(r, c) - dot);
    }
    return ds;
}

Matrix mha_bwd(const Matrix& dy, const AttentionTrace& tr, const AttentionParams& p,
               AttentionParams& gp) {
    const std::size_t n = dy.rows();
    const std::size_t h = p.heads();
    const std::size_t d_k = p.w_q[0].cols();
    add_inplace(gp.w_o, matmul_at_b(tr.concat, dy));
    Matrix dconcat = matmul_a_bt(dy, p.w_o);
    Matrix dx(n, tr.x.cols());
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    for (std::size_t i = 0; i < h; ++i) {
        Matrix dho(n, d_k);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d_k; ++c) dho(r, c) = dconcat(r, i * d_k + c);
        Matrix da = matmul_a_bt(dho, tr.v[i]);
        Matrix dv = matmul_at_b(tr.a[i], dho);
        Matrix ds = softmax_rows_bwd(tr.a[i], da);
        for (double& s : ds.values()) s *= inv_scale;
        Matrix dq = matmul(ds, tr.k[i]);
        Matrix dk = matmul_at_b(ds, tr.q[i]);
        add_inplace(gp.w_q[i], matmul_at_b(tr.x, dq));
        add_inplace(gp.w_k[i], matmul_at_b(tr.x, dk));
        add_inplace(gp.w_v[i], matmul_at_b(tr.x, dv));
        add_inplace(dx, matmul_a_bt(dq, p.w_q[i]));
        add_inplace(dx, matmul_a_bt(dk, p.w_k[i]));
        add_inplace(dx, matmul_a_bt(dv, p.w_v[i]));
    }
    return dx;
}

Matrix macaron_fwd(const Matrix& x, const MacaronLayerParams& p, double half, MacaronTrace* tr) {
    Matrix p1 = pff_fwd(x, p.pff1, tr ? &tr->pff1 : nullptr);
    Matrix s1 = add(x, scale(p1, half));
    Matrix xp = layer_norm_fwd(s1, p.ln1, tr ? &tr->ln1 : nullptr);
    Matrix att = mha_fwd(xp, p.att, tr ? &tr->att : nullptr);
    Matrix s2 = add(xp, att);
    Matrix xt = layer_norm_fwd(s2, p.ln2, tr ? &tr->ln2 : nullptr);
    Matrix p2 = pff_fwd(xt, p.pff2, tr ? &tr->pff2 : nullptr);
    Matrix s3 = add(xt, scale(p2, half));
    return layer_norm_fwd(s3, p.ln3, tr ? &tr->ln3 : nullptr);
}

Matrix macaron_bwd(const Matrix& dy, const MacaronTrace& tr, const MacaronLayerParams& p,
                   double half, MacaronLayerParams& gp) {
    Matrix ds3 = layer_norm_bwd(dy, tr.ln3, p.ln3, gp.ln3);
    Matrix dxt = add(ds3, pff_bwd(scale(ds3, half), tr.pff2, p.pff2, gp.pff2));
    Matrix ds2 = layer_norm_bwd(dxt, tr.ln2, p.ln2, gp.ln2);
    Matrix dxp = add(ds2, mha_bwd(ds2, tr.att, p.att, gp.att));
    Matrix ds1 = layer_norm_bwd(dxp, tr.ln1, p.ln1, gp.ln1);
    return add(ds1, pff_bwd(scale(ds1, half), tr.pff1, p.pff1, gp.pff1));
}

// shifted-plane accumulation keeps the inner loop contiguous
Tensor3 conv_fwd_raw(const Tensor3& x, const ConvBlockParams& p) {
    if (x.c != p.in_ch) throw std::invalid_argument("conv: channel mismatch");
    const std::size_t T = x.t, F = x.f;
    Tensor3 z(p.out_ch, T, F);
    for (std::size_t o = 0; o < p.out_ch; ++o) {
        double* zo = z.v.data() + o * T * F;
        std::fill(zo, zo + T * F, p.bias[o]);
        for (std::size_t i = 0; i < p.in_ch; ++i) {
            const double* xi = x.v.data() + i * T * F;
            for (std::size_t u = 0; u < 3; ++u) {
                const long dt = static_cast<long>(u) - 1;
                for (std::size_t v = 0; v < 3; ++v) {
                    const long df = static_cast<long>(v) - 1;
                    const double k = p.k(o, i, u, v);
                    if (k == 0.0) continue;
                    const std::size_t t_lo = dt < 0 ? 1 : 0;
                    const std::size_t t_hi = dt > 0 ? T - 1 : T;
                    const std::size_t f_lo = df < 0 ? 1 : 0;
                    const std::size_t f_hi = df > 0 ? F - 1 : F;
                    for (std::size_t t = t_lo; t < t_hi; ++t) {
                        double* zrow = zo + t * F;
                        const double* xrow = xi + (static_cast<long>(t) + dt) * static_cast<long>(F) + df;
                        for (std::size_t f = f_lo; f < f_hi; ++f) zrow[f] += k * xrow[f];
                    }
                }
            }
        }
    }
    return z;
}

Tensor3 avg_pool(const Tensor3& x, std::size_t pt, std::size_t pf) {
    if (pt == 0 || pf == 0 || x.t % pt != 0 || x.f % pf != 0)
        throw std::invalid_argument("pool factors must divide the spatial dims");
    Tensor3 y(x.c, x.t / pt, x.f / pf);
    const double inv_area = 1.0 / static_cast<double>(pt * pf);
    for (std::size_t c = 0; c < x.c; ++c)
        for (std::size_t t = 0; t < y.t; ++t)
            for (std::size_t f = 0; f < y.f; ++f) {
                double acc = 0.0;
                for (std::size_t dt = 0; dt < pt; ++dt)
                    for (std::size_t df = 0; df < pf; ++df) acc += x.at(c, t * pt + dt, f * pf + df);
                y.at(c, t, f) = acc * inv_area;
            }
    return y;
}

Tensor3 conv_block_fwd(const Tensor3& x, const ConvBlockParams& p, ConvBlockTrace* tr) {
    Tensor3 z = conv_fwd_raw(x, p);
    Tensor3 act = z;
    for (double& v : act.v) v = mish(v);
    Tensor3 pooled = avg_pool(act, p.pool_t, p.pool_f);
    if (tr) {
        tr->input = x;
        tr->preact = std::move(z);
    }
    return pooled;
}

Tensor3 conv_block_bwd(const Tensor3& dpooled, const ConvBlockTrace& tr, const ConvBlockParams& p,
                       ConvBlockParams& gp) {
    const Tensor3& x = tr.input;
    // unpool and chain through Mish
    Tensor3 dz(p.out_ch, x.t, x.f);
    const double inv_area = 1.0 / static_cast<double>(p.pool_t * p.pool_f);
    for (std::size_t c = 0; c < p.out_ch; ++c)
        for (std::size_t t = 0; t < x.t; ++t)
            for (std::size_t f = 0; f < x.f; ++f) {
                const double g = dpooled.at(c, t / p.pool_t, f / p.pool_f) * inv_area;
                dz.at(c, t, f) = g * mish_grad(tr.preact.at(c, t, f));
            }

    for (std::size_t o = 0; o < p.out_ch; ++o) {
        double db = 0.0;
        for (std::size_t t = 0; t < x.t; ++t)
            for (std::size_t f = 0; f < x.f; ++f) db += dz.at(o, t, f);
        gp.bias[o] += db;
    }

    const std::size_t T = x.t, F = x.f;
    for (std::size_t o = 0; o < p.out_ch; ++o) {
        const double* dzo = dz.v.data() + o * T * F;
        for (std::size_t i = 0; i < p.in_ch; ++i) {
            const double* xi = x.v.data() + i * T * F;
            for (std::size_t u = 0; u < 3; ++u) {
                const long dt = static_cast<long>(u) - 1;
                for (std::size_t v = 0; v < 3; ++v) {
                    const long df = static_cast<long>(v) - 1;
                    const std::size_t t_lo = dt < 0 ? 1 : 0;
                    const std::size_t t_hi = dt > 0 ? T - 1 : T;
                    const std::size_t f_lo = df < 0 ? 1 : 0;
                    const std::size_t f_hi = df > 0 ? F - 1 : F;
                    double acc = 0.0;
                    for (std::size_t t = t_lo; t < t_hi; ++t) {
                        const double* dzrow = dzo + t * F;
                        const double* xrow =
                            xi + (static_cast<long>(t) + dt) * static_cast<long>(F) + df;
                        for (std::size_t f = f_lo; f < f_hi; ++f) acc += dzrow[f] * xrow[f];
                    }
                    gp.k(o, i, u, v) += acc;
                }
            }
        }
    }

    Tensor3 dx(x.c, T, F);
    for (std::size_t o = 0; o < p.out_ch; ++o) {
        const double* dzo = dz.v.data() + o * T * F;
        for (std::size_t i = 0; i < p.in_ch; ++i) {
            double* dxi = dx.v.data() + i * T * F;
            for (std::size_t u = 0; u < 3; ++u) {
                const long dt = static_cast<long>(u) - 1;
                for (std::size_t v = 0; v < 3; ++v) {
                    const long df = static_cast<long>(v) - 1;
                    const double k = p.k(o, i, u, v);
                    if (k == 0.0) continue;
                    // dx[t + dt][f + df] += k * dz[t][f] over the valid range
                    const std::size_t t_lo = dt < 0 ? 1 : 0;
                    const std::size_t t_hi = dt > 0 ? T - 1 : T;
                    const std::size_t f_lo = df < 0 ? 1 : 0;
                    const std::size_t f_hi = df > 0 ? F - 1 : F;
                    for (std::size_t t = t_lo; t < t_hi; ++t) {
                        double* dxrow =
                            dxi + (static_cast<long>(t) + dt) * static_cast<long>(F) + df;
                        const double* dzrow = dzo + t * F;
                        for (std::size_t f = f_lo; f < f_hi; ++f) dxrow[f] += k * dzrow[f];
                    }
                }
            }
        }
    }
    return dx;
}

// shared conv + encoder pipeline
Matrix encode(const MelSpectrogram& m, const CmnParameters& p, ForwardTrace* tr) {
    const CmnConfig& cfg = p.config;
    if (m.values.rows() != cfg.input_frames || m.values.cols() != cfg.input_bins)
        throw std::invalid_argument("model input shape mismatch");

    Tensor3 x(1, cfg.input_frames, cfg.input_bins);
    std::copy(m.values.values().begin(), m.values.values().end(), x.v.begin());

    if (tr) tr->conv.resize(p.conv.size());
    for (std::size_t b = 0; b < p.conv.size(); ++b)
        x = conv_block_fwd(x, p.conv[b], tr ? &tr->conv[b] : nullptr);

    const std::size_t n = x.t;
    const std::size_t d_model = x.c * x.f;
    Matrix seq(n, d_model);
    for (std::size_t c = 0; c < x.c; ++c)
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t f = 0; f < x.f; ++f) seq(t, c * x.f + f) = x.at(c, t, f);

    if (cfg.positional_encoding) add_inplace(seq, positional_encoding(n, d_model));
    if (tr) tr->seq_in = seq;

    if (tr) tr->layers.resize(p.encoder.size());
    for (std::size_t l = 0; l < p.encoder.size(); ++l)
        seq = macaron_fwd(seq, p.encoder[l], cfg.macaron_half, tr ? &tr->layers[l] : nullptr);
    if (tr) tr->encoded = seq;
    return seq;
}

Matrix apply_sigmoid(Matrix logits) {
    for (double& v : logits.values()) v = stable_sigmoid(v);
    return logits;
}

} // namespace

Matrix layer_norm(const Matrix& x, const LayerNormParams& p) { return layer_norm_fwd(x, p, nullptr); }

Matrix pff(const Matrix& x, const PffParams& p) { return pff_fwd(x, p, nullptr); }

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (q.cols() != k.cols() || k.rows() != v.rows())
        throw std::invalid_argument("attention: shape mismatch");
    Matrix a = matmul_a_bt(q, k);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    for (double& s : a.values()) s *= inv_scale;
    softmax_rows(a);
    return matmul(a, v);
}

Matrix multi_head_attention(const Matrix& x, const AttentionParams& p) {
    return mha_fwd(x, p, nullptr);
}

Matrix macaron_layer(const Matrix& x, const MacaronLayerParams& p, double half) {
    return macaron_fwd(x, p, half, nullptr);
}

Tensor3 conv_block_forward(const Tensor3& x, const ConvBlockParams& p) {
    return conv_block_fwd(x, p, nullptr);
}

Matrix flm_forward(const MelSpectrogram& m, const CmnParameters& p, ForwardTrace* trace) {
    if (p.config.variant != CmnVariant::kFlm) throw std::invalid_argument("flm_forward: wrong variant");
    Matrix seq = encode(m, p, trace);
    if (trace) trace->classifier_in = seq;
    Matrix probs = apply_sigmoid(dense_fwd(seq, p.classifier));
    if (trace) trace->probs = probs;
    return probs;
}

std::vector<double> clm_forward(const MelSpectrogram& m, const CmnParameters& p,
                                ForwardTrace* trace) {
    if (p.config.variant != CmnVariant::kClm) throw std::invalid_argument("clm_forward: wrong variant");
    Matrix seq = encode(m, p, trace);
    const std::size_t n = seq.rows(), d = seq.cols();
    Matrix pooled(1, d);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < d; ++c) pooled(0, c) += seq(t, c);
    for (double& v : pooled.values()) v /= static_cast<double>(n);
    if (trace) {
        trace->pooled_mean.assign(pooled.values().begin(), pooled.values().end());
        trace->classifier_in = pooled;
    }
    Matrix probs = apply_sigmoid(dense_fwd(pooled, p.classifier));
    if (trace) trace->probs = probs;
    return probs.values();
}

CmnParameters backward(const Matrix& prob_grad, const ForwardTrace& trace, const CmnParameters& p) {
    if (trace.probs.empty() || trace.classifier_in.empty())
        throw std::invalid_argument("backward: forward trace missing");
    if (!prob_grad.same_shape(trace.probs))
        throw std::invalid_argument("backward: gradient shape mismatch");

    CmnParameters g = zeros_like(p);

    Matrix dlogits = prob_grad;
    for (std::size_t i = 0; i < dlogits.size(); ++i) {
        const double pr = trace.probs.values()[i];
        dlogits.values()[i] *= pr * (1.0 - pr);
    }

    add_inplace(g.classifier.w, matmul_at_b(trace.classifier_in, dlogits));
    for (std::size_t r = 0; r < dlogits.rows(); ++r)
        for (std::size_t c = 0; c < dlogits.cols(); ++c) g.classifier.b[c] += dlogits(r, c);
    Matrix dcin = matmul_a_bt(dlogits, p.classifier.w);

    Matrix dseq;
    if (p.config.variant == CmnVariant::kClm) {
        const std::size_t n = trace.encoded.rows();
        dseq = Matrix(n, trace.encoded.cols());
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t c = 0; c < dseq.cols(); ++c)
                dseq(t, c) = dcin(0, c) / static_cast<double>(n);
    } else {
        dseq = std::move(dcin);
    }

    for (std::size_t l = p.encoder.size(); l-- > 0;)
        dseq = macaron_bwd(dseq, trace.layers[l], p.encoder[l], p.config.macaron_half, g.encoder[l]);

    // positional encoding is an additive constant: gradient passes through
    const std::size_t f_out = p.config.freq_out();
    const std::size_t c_out = p.config.conv_filters.back();
    Tensor3 dx(c_out, dseq.rows(), f_out);
    for (std::size_t c = 0; c < c_out; ++c)
        for (std::size_t t = 0; t < dseq.rows(); ++t)
            for (std::size_t f = 0; f < f_out; ++f) dx.at(c, t, f) = dseq(t, c * f_out + f);

    for (std::size_t b = p.conv.size(); b-- > 0;)
        dx = conv_block_bwd(dx, trace.conv[b], p.conv[b], g.conv[b]);

    return g;
}

std::vector<double> temporal_max_pool(const Matrix& frame_probs, std::vector<std::size_t>* argmax) {
    std::vector<double> out(frame_probs.cols(), -std::numeric_limits<double>::infinity());
    if (argmax) argmax->assign(frame_probs.cols(), 0);
    for (std::size_t c = 0; c < frame_probs.cols(); ++c) {
        for (std::size_t t = 0; t < frame_probs.rows(); ++t) {
            if (frame_probs(t, c) > out[c]) {
                out[c] = frame_probs(t, c);
                if (argmax) (*argmax)[c] = t;
            }
        }
    }
    return out;
}

} // namespace sedw
