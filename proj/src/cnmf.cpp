#include "sedw/cnmf.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "sedw/rng.hpp"
#include "sedw/tensor_io.hpp"

namespace sedw {

namespace {

// elementwise (a + eps) / (b + eps); 0/0 resolves to 1 so exact
// factorizations are fixed points of the updates
Matrix guarded_ratio(const Matrix& a, const Matrix& b, double eps) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i)
        out.values()[i] = (a.values()[i] + eps) / (b.values()[i] + eps);
    return out;
}

void check_nonnegative(const Matrix& v, const char* what) {
    for (double x : v.values())
        if (x < 0.0 || !std::isfinite(x))
            throw std::invalid_argument(std::string(what) + ": entries must be nonnegative and finite");
}

// V transposed into CNMF orientation [bins x frames], scaled by 1/max so the
// fixed activation threshold is scale-meaningful
Matrix mel_to_v(const MelSpectrogram& mel) {
    if (mel.is_log) throw std::invalid_argument("cnmf expects pre-log mel input");
    Matrix v = transpose(mel.values);
    const double peak = max_entry(v);
    if (peak > 0.0)
        for (double& x : v.values()) x /= peak;
    return v;
}

Matrix seeded_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& x : m.values()) x = rng.uniform_pos();
    return m;
}

} // namespace

std::size_t FrameMask::count_kept() const {
    std::size_t n = 0;
    for (std::uint8_t k : keep)
        if (k) ++n;
    return n;
}

Matrix shift_columns(const Matrix& m, long t) {
    Matrix out(m.rows(), m.cols());
    const long n = static_cast<long>(m.cols());
    if (std::labs(t) >= n) return out; // all zero
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (long c = 0; c < n; ++c) {
            const long src = c - t;
            if (src >= 0 && src < n) out(r, static_cast<std::size_t>(c)) = m(r, static_cast<std::size_t>(src));
        }
    }
    return out;
}

Matrix reconstruct(const ConvolutiveBasis& b, const Activation& h) {
    if (b.w.empty()) throw std::invalid_argument("reconstruct: empty basis");
    if (b.components() != h.h.rows())
        throw std::invalid_argument("reconstruct: component count mismatch");
    Matrix out(b.bins(), h.h.cols());
    for (std::size_t t = 0; t < b.shifts(); ++t)
        add_inplace(out, matmul(b.w[t], shift_columns(h.h, static_cast<long>(t))));
    return out;
}

double kl_divergence(const Matrix& v, const Matrix& v_hat) {
    if (!v.same_shape(v_hat)) throw std::invalid_argument("kl_divergence: shape mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = v.values()[i];
        const double b = v_hat.values()[i];
        if (a > 0.0) d += a * std::log(a / std::max(b, 1e-300)) - a + b;
        else d += b;
    }
    return d;
}

ConvolutiveBasis update_w(const ConvolutiveBasis& b, const Activation& h, const Matrix& v,
                          double epsilon) {
    const Matrix v_hat = reconstruct(b, h);
    const Matrix ratio = guarded_ratio(v, v_hat, epsilon);
    ConvolutiveBasis out = b;
    Matrix ones(v.rows(), v.cols(), 1.0);
    for (std::size_t t = 0; t < b.shifts(); ++t) {
        const Matrix h_shift = shift_columns(h.h, static_cast<long>(t));
        const Matrix num = matmul_a_bt(ratio, h_shift);
        const Matrix den = matmul_a_bt(ones, h_shift);
        const Matrix factor = guarded_ratio(num, den, epsilon);
        out.w[t] = hadamard(b.w[t], factor);
    }
    return out;
}

Activation update_h(const ConvolutiveBasis& b, const Activation& h, const Matrix& v,
                    double epsilon, bool recompute_between_shifts) {
    Activation cur = h;
    Matrix v_hat = reconstruct(b, cur);
    for (std::size_t t = 0; t < b.shifts(); ++t) {
        const long shift = static_cast<long>(t);
        const Matrix v_left = shift_columns(v, -shift);
        const Matrix vhat_left = shift_columns(v_hat, -shift);
        const Matrix ratio = guarded_ratio(v_left, vhat_left, epsilon);
        const Matrix num = matmul_at_b(b.w[t], ratio);
        Matrix den(cur.h.rows(), cur.h.cols());
        for (std::size_t k = 0; k < b.w[t].cols(); ++k) {
            double colsum = 0.0;
            for (std::size_t i = 0; i < b.w[t].rows(); ++i) colsum += b.w[t](i, k);
            for (std::size_t n = 0; n < den.cols(); ++n) den(k, n) = colsum;
        }
        const Matrix factor = guarded_ratio(num, den, epsilon);
        cur.h = hadamard(cur.h, factor);
        if (recompute_between_shifts && t + 1 < b.shifts()) v_hat = reconstruct(b, cur);
    }
    return cur;
}

std::pair<ConvolutiveBasis, Activation> fit(const Matrix& v, const CnmfConfig& cfg) {
    check_nonnegative(v, "fit");
    if (cfg.iterations < 1) throw std::invalid_argument("fit: iterations must be >= 1");
    if (cfg.components < 1 || cfg.max_shift < 1)
        throw std::invalid_argument("fit: components and max_shift must be >= 1");

    Rng rng(cfg.seed);
    ConvolutiveBasis basis;
    basis.w.resize(static_cast<std::size_t>(cfg.max_shift));
    for (auto& wt : basis.w)
        wt = seeded_uniform(v.rows(), static_cast<std::size_t>(cfg.components), rng);
    Activation act{seeded_uniform(static_cast<std::size_t>(cfg.components), v.cols(), rng)};

    for (int it = 0; it < cfg.iterations; ++it) {
        act = update_h(basis, act, v, cfg.epsilon, cfg.recompute_between_shifts);
        basis = update_w(basis, act, v, cfg.epsilon);
    }
    return {std::move(basis), std::move(act)};
}

EventDictionary extract_event_dictionary(const std::string& class_label,
                                         const std::vector<std::pair<MelSpectrogram, FrameMask>>& clips,
                                         const CnmfConfig& cfg) {
    EventDictionary dict;
    dict.class_label = class_label;
    dict.bases.w.assign(static_cast<std::size_t>(cfg.max_shift), Matrix());

    std::uint64_t clip_index = 0;
    for (const auto& [mel, mask] : clips) {
        ++clip_index;
        if (mask.keep.size() != mel.values.rows())
            throw std::invalid_argument("extract_event_dictionary: mask length mismatch");
        if (mask.count_kept() == 0) {
            std::cerr << "warning: skipping clip " << clip_index << " for class '" << class_label
                      << "' (empty mask)\n";
            continue;
        }
        const Matrix v_full = mel_to_v(mel);
        Matrix v(v_full.rows(), mask.count_kept());
        std::size_t out_col = 0;
        for (std::size_t c = 0; c < v_full.cols(); ++c) {
            if (!mask.keep[c]) continue;
            for (std::size_t r = 0; r < v_full.rows(); ++r) v(r, out_col) = v_full(r, c);
            ++out_col;
        }

        CnmfConfig clip_cfg = cfg;
        clip_cfg.seed = cfg.seed + clip_index; // distinct init per clip, still deterministic
        auto [basis, act] = fit(v, clip_cfg);

        // L1-normalize each component across its shifts
        for (std::size_t j = 0; j < basis.components(); ++j) {
            double l1 = 0.0;
            for (const Matrix& wt : basis.w)
                for (std::size_t i = 0; i < wt.rows(); ++i) l1 += wt(i, j);
            if (l1 > 0.0)
                for (Matrix& wt : basis.w)
                    for (std::size_t i = 0; i < wt.rows(); ++i) wt(i, j) /= l1;
        }

        for (std::size_t t = 0; t < basis.w.size(); ++t) {
            Matrix& acc = dict.bases.w[t];
            const Matrix& wt = basis.w[t];
            if (acc.empty()) {
                acc = wt;
            } else {
                if (acc.rows() != wt.rows())
                    throw std::invalid_argument("extract_event_dictionary: inconsistent bin count");
                Matrix merged(acc.rows(), acc.cols() + wt.cols());
                for (std::size_t r = 0; r < acc.rows(); ++r) {
                    for (std::size_t c = 0; c < acc.cols(); ++c) merged(r, c) = acc(r, c);
                    for (std::size_t c = 0; c < wt.cols(); ++c) merged(r, acc.cols() + c) = wt(r, c);
                }
                acc = std::move(merged);
            }
        }
    }
    if (dict.bases.w.empty() || dict.bases.w[0].empty())
        throw std::runtime_error("extract_event_dictionary: no usable clips for class '" + class_label + "'");
    return dict;
}

Activation infer_activation(const MelSpectrogram& mel, const EventDictionary& dict,
                            const CnmfConfig& cfg) {
    const Matrix v = mel_to_v(mel);
    if (dict.bases.bins() != v.rows())
        throw std::invalid_argument("infer_activation: bin count mismatch");
    Rng rng(cfg.seed);
    Activation act{seeded_uniform(dict.bases.components(), v.cols(), rng)};
    for (int it = 0; it < cfg.iterations; ++it)
        act = update_h(dict.bases, act, v, cfg.epsilon, cfg.recompute_between_shifts);
    return act;
}

std::vector<std::uint8_t> binarize_activation(const Activation& h, double threshold) {
    std::vector<std::uint8_t> out(h.h.cols(), 0);
    for (std::size_t n = 0; n < h.h.cols(); ++n) {
        double peak = 0.0;
        for (std::size_t k = 0; k < h.h.rows(); ++k) peak = std::max(peak, h.h(k, n));
        out[n] = peak > threshold ? 1 : 0;
    }
    return out;
}

PseudoStrongLabel build_pseudo_label(const MelSpectrogram& clip,
                                     const std::set<std::string>& weak_tags,
                                     const std::map<std::string, EventDictionary>& dicts,
                                     const std::vector<std::string>& class_list,
                                     const CnmfConfig& cfg) {
    if (weak_tags.empty()) throw std::invalid_argument("build_pseudo_label: no weak tags");
    PseudoStrongLabel out;
    out.labels = Matrix(clip.values.rows(), class_list.size());
    for (std::size_t c = 0; c < class_list.size(); ++c) {
        const std::string& cls = class_list[c];
        if (!weak_tags.count(cls)) continue;
        auto it = dicts.find(cls);
        if (it == dicts.end())
            throw std::runtime_error("build_pseudo_label: no dictionary for class '" + cls + "'");
        const Activation act = infer_activation(clip, it->second, cfg);
        const std::vector<std::uint8_t> active = binarize_activation(act, cfg.threshold);
        for (std::size_t f = 0; f < active.size(); ++f) out.labels(f, c) = active[f] ? 1.0 : 0.0;
    }
    return out;
}

void save_dictionary(const std::string& path, const EventDictionary& d) {
    TensorArchive a;
    a.attrs["kind"] = "dictionary";
    a.attrs["class_label"] = d.class_label;
    a.attrs["bins"] = std::to_string(d.bases.bins());
    a.attrs["components"] = std::to_string(d.bases.components());
    a.attrs["shifts"] = std::to_string(d.bases.shifts());
    for (std::size_t t = 0; t < d.bases.shifts(); ++t)
        a.put("w" + std::to_string(t), d.bases.w[t]);
    a.save(path);
}

EventDictionary load_dictionary(const std::string& path) {
    TensorArchive a = TensorArchive::load(path);
    EventDictionary d;
    d.class_label = a.attrs.at("class_label");
    const std::size_t shifts = std::stoul(a.attrs.at("shifts"));
    d.bases.w.resize(shifts);
    for (std::size_t t = 0; t < shifts; ++t)
        d.bases.w[t] = a.get("w" + std::to_string(t)).to_matrix();
    return d;
}

} // namespace sedw
