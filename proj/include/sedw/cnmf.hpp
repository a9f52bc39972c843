#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sedw/frontend.hpp"
#include "sedw/matrix.hpp"

namespace sedw {

struct CnmfConfig {
    int components = 4;  // r extracted per clip
    int max_shift = 4;   // T
    int iterations = 100;
    double epsilon = 1e-12;
    double threshold = 0.1; // activation binarization
    // recompute the approximation between the per-shift H updates
    bool recompute_between_shifts = true;
    std::uint64_t seed = 1;
};

// W(t), t = 0..T-1, each [m bins x r components], all entries >= 0
struct ConvolutiveBasis {
    std::vector<Matrix> w;

    std::size_t shifts() const { return w.size(); }
    std::size_t bins() const { return w.empty() ? 0 : w[0].rows(); }
    std::size_t components() const { return w.empty() ? 0 : w[0].cols(); }
};

// H, [r components x n frames], all entries >= 0
struct Activation {
    Matrix h;
};

struct FrameMask {
    std::vector<std::uint8_t> keep; // length n frames, at least one nonzero

    std::size_t count_kept() const;
};

struct EventDictionary {
    std::string class_label;
    ConvolutiveBasis bases; // per-clip extractions concatenated along components
};

// Binary frame/class matrix; columns for classes absent from the clip's weak
// tag stay zero.
struct PseudoStrongLabel {
    Matrix labels; // [frames x classes], entries in {0,1}
};

// Columns move right for t > 0 (left edge zero-filled) and left for t < 0.
// |t| >= column count yields an all-zero matrix.
Matrix shift_columns(const Matrix& m, long t);

// V~ = sum_t W(t) * shift(H, +t)
Matrix reconstruct(const ConvolutiveBasis& b, const Activation& h);

// D(V || V~) = sum V log(V/V~) - V + V~, with 0 log 0 = 0
double kl_divergence(const Matrix& v, const Matrix& v_hat);

// One multiplicative update of every W(t) against a common reconstruction.
ConvolutiveBasis update_w(const ConvolutiveBasis& b, const Activation& h, const Matrix& v,
                          double epsilon = 1e-12);

// Per-shift multiplicative updates of H, in order t = 0..T-1. When
// recompute_between_shifts is set the reconstruction is refreshed after
// every shift.
Activation update_h(const ConvolutiveBasis& b, const Activation& h, const Matrix& v,
                    double epsilon = 1e-12, bool recompute_between_shifts = true);

// Seeded alternating factorization: update_h then update_w per iteration.
std::pair<ConvolutiveBasis, Activation> fit(const Matrix& v, const CnmfConfig& cfg);

// Masked frames are removed (matrix compacted) before fitting; per-clip
// basis stacks are concatenated along the component axis and every basis
// column is L1-normalized across its shifts.
EventDictionary extract_event_dictionary(const std::string& class_label,
                                         const std::vector<std::pair<MelSpectrogram, FrameMask>>& clips,
                                         const CnmfConfig& cfg);

// Fixed dictionary; only H is iterated.
Activation infer_activation(const MelSpectrogram& mel, const EventDictionary& dict,
                            const CnmfConfig& cfg);

// Frame n is active iff max over components of H[:, n] exceeds the threshold.
std::vector<std::uint8_t> binarize_activation(const Activation& h, double threshold = 0.1);

PseudoStrongLabel build_pseudo_label(const MelSpectrogram& clip,
                                     const std::set<std::string>& weak_tags,
                                     const std::map<std::string, EventDictionary>& dicts,
                                     const std::vector<std::string>& class_list,
                                     const CnmfConfig& cfg);

void save_dictionary(const std::string& path, const EventDictionary& d);
EventDictionary load_dictionary(const std::string& path);

} // namespace sedw
