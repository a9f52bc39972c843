#pragma once

#include <complex>
#include <string>
#include <vector>

#include "sedw/audio.hpp"
#include "sedw/matrix.hpp"

namespace sedw {

struct FrontendConfig {
    int window_size = 2048;
    int hop_length = 345;
    int mel_bins = 64;
    double log_floor = 1e-10;
};

// [frames x mel bins]; 640 x 64 for a normalized 10 s clip with defaults
struct MelSpectrogram {
    Matrix values;
    bool is_log = false;
};

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

std::vector<double> hann_window(int n);

// Triangular filters on the mel scale, each normalized to unit area,
// spanning 0 Hz .. sample_rate/2. Shape [n_mels x (n_fft/2 + 1)].
Matrix mel_filterbank(int n_fft, int sample_rate, int n_mels);

// Power spectrogram with center-reflection padding, projected onto the mel
// filterbank. A normalized clip yields exactly floor(n/hop)+1 = 640 frames.
MelSpectrogram compute_mel(const Waveform& w, const FrontendConfig& cfg = {});

MelSpectrogram log_scale(const MelSpectrogram& m, double floor);

// Feature cache entries reuse the tensor archive format (docs/formats.md).
void save_mel(const std::string& path, const MelSpectrogram& m);
MelSpectrogram load_mel(const std::string& path);

} // namespace sedw
