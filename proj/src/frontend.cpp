#include "sedw/frontend.hpp"

#include <cmath>
#include <stdexcept>

#include "sedw/tensor_io.hpp"

namespace sedw {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// reflection index for center padding, librosa-style
std::size_t reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * (n - 1);
    long j = i % period;
    if (j < 0) j += period;
    if (j >= n) j = period - j;
    return static_cast<std::size_t>(j);
}

} // namespace

void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("fft size must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
    return w;
}

Matrix mel_filterbank(int n_fft, int sample_rate, int n_mels) {
    if (n_mels < 1) throw std::invalid_argument("mel_filterbank: n_mels must be >= 1");
    const int n_bins = n_fft / 2 + 1;
    const double fmax = sample_rate / 2.0;
    const double mel_min = hz_to_mel(0.0);
    const double mel_max = hz_to_mel(fmax);

    std::vector<double> centers(static_cast<std::size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        centers[static_cast<std::size_t>(i)] =
            mel_to_hz(mel_min + (mel_max - mel_min) * i / (n_mels + 1));

    Matrix fb(static_cast<std::size_t>(n_mels), static_cast<std::size_t>(n_bins));
    for (int m = 0; m < n_mels; ++m) {
        const double f_lo = centers[static_cast<std::size_t>(m)];
        const double f_c = centers[static_cast<std::size_t>(m) + 1];
        const double f_hi = centers[static_cast<std::size_t>(m) + 2];
        double area = 0.0;
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / n_fft;
            double wgt = 0.0;
            if (f >= f_lo && f <= f_c && f_c > f_lo)
                wgt = (f - f_lo) / (f_c - f_lo);
            else if (f > f_c && f <= f_hi && f_hi > f_c)
                wgt = (f_hi - f) / (f_hi - f_c);
            fb(static_cast<std::size_t>(m), static_cast<std::size_t>(k)) = wgt;
            area += wgt;
        }
        if (area > 0.0)
            for (int k = 0; k < n_bins; ++k)
                fb(static_cast<std::size_t>(m), static_cast<std::size_t>(k)) /= area;
    }
    return fb;
}

MelSpectrogram compute_mel(const Waveform& w, const FrontendConfig& cfg) {
    if (w.samples.empty()) throw std::invalid_argument("compute_mel: empty waveform");
    if (cfg.window_size <= cfg.hop_length || cfg.hop_length <= 0)
        throw std::invalid_argument("compute_mel: window_size > hop_length > 0 required");
    const long n = static_cast<long>(w.samples.size());
    const int win = cfg.window_size;
    const int hop = cfg.hop_length;
    const int n_bins = win / 2 + 1;
    const std::size_t n_frames = static_cast<std::size_t>(n / hop) + 1;

    const std::vector<double> window = hann_window(win);
    const Matrix fb = mel_filterbank(win, w.sample_rate, cfg.mel_bins);

    MelSpectrogram out;
    out.is_log = false;
    out.values = Matrix(n_frames, static_cast<std::size_t>(cfg.mel_bins));

    std::vector<std::complex<double>> buf(static_cast<std::size_t>(win));
    std::vector<double> power(static_cast<std::size_t>(n_bins));
    for (std::size_t f = 0; f < n_frames; ++f) {
        const long center = static_cast<long>(f) * hop;
        const long start = center - win / 2;
        for (int i = 0; i < win; ++i) {
            const std::size_t src = reflect_index(start + i, n);
            buf[static_cast<std::size_t>(i)] = w.samples[src] * window[static_cast<std::size_t>(i)];
        }
        fft_radix2(buf);
        for (int k = 0; k < n_bins; ++k)
            power[static_cast<std::size_t>(k)] = std::norm(buf[static_cast<std::size_t>(k)]);
        for (int m = 0; m < cfg.mel_bins; ++m) {
            double acc = 0.0;
            const double* frow = fb.row(static_cast<std::size_t>(m));
            for (int k = 0; k < n_bins; ++k) acc += frow[k] * power[static_cast<std::size_t>(k)];
            out.values(f, static_cast<std::size_t>(m)) = acc;
        }
    }
    return out;
}

MelSpectrogram log_scale(const MelSpectrogram& m, double floor) {
    if (m.is_log) throw std::invalid_argument("log_scale: input is already log-scaled");
    if (floor <= 0.0) throw std::invalid_argument("log_scale: floor must be positive");
    MelSpectrogram out = m;
    out.is_log = true;
    for (double& x : out.values.values()) x = std::log(std::max(x, floor));
    return out;
}

void save_mel(const std::string& path, const MelSpectrogram& m) {
    TensorArchive a;
    a.attrs["kind"] = "mel";
    a.attrs["is_log"] = m.is_log ? "1" : "0";
    a.put("mel", m.values);
    a.save(path);
}

MelSpectrogram load_mel(const std::string& path) {
    TensorArchive a = TensorArchive::load(path);
    MelSpectrogram m;
    m.values = a.get("mel").to_matrix();
    auto it = a.attrs.find("is_log");
    m.is_log = it != a.attrs.end() && it->second == "1";
    return m;
}

} // namespace sedw
