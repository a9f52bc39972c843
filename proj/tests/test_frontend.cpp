#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sedw/audio.hpp"
#include "sedw/frontend.hpp"
#include "sedw/rng.hpp"

using namespace sedw;

namespace {

Waveform make_wave(std::size_t n, double value = 0.0) {
    Waveform w;
    w.sample_rate = kSampleRate;
    w.samples.assign(n, value);
    return w;
}

Waveform tone(double freq, std::size_t n = kClipSamples, double amp = 0.5) {
    Waveform w = make_wave(n);
    for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = amp * std::sin(2.0 * M_PI * freq * i / kSampleRate);
    return w;
}

// naive O(n^2) DFT power spectrum of one centered frame, used as the oracle
std::vector<double> frame_power_oracle(const Waveform& w, int frame, const FrontendConfig& cfg) {
    const long n = static_cast<long>(w.samples.size());
    const int win = cfg.window_size;
    const std::vector<double> window = hann_window(win);
    std::vector<double> seg(static_cast<std::size_t>(win));
    const long start = static_cast<long>(frame) * cfg.hop_length - win / 2;
    for (int i = 0; i < win; ++i) {
        long j = start + i;
        const long period = 2 * (n - 1);
        j %= period;
        if (j < 0) j += period;
        if (j >= n) j = period - j;
        seg[static_cast<std::size_t>(i)] =
            w.samples[static_cast<std::size_t>(j)] * window[static_cast<std::size_t>(i)];
    }
    const int n_bins = win / 2 + 1;
    std::vector<double> power(static_cast<std::size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (int i = 0; i < win; ++i) {
            const double ang = -2.0 * M_PI * k * i / win;
            acc += seg[static_cast<std::size_t>(i)] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        power[static_cast<std::size_t>(k)] = std::norm(acc);
    }
    return power;
}

} // namespace

TEST_CASE("normalize_duration truncates and pads at the clip end") {
    Waveform exact = make_wave(kClipSamples, 0.25);
    CHECK(normalize_duration(exact).samples.size() == kClipSamples);
    CHECK(normalize_duration(exact).samples == exact.samples);

    Waveform longer = make_wave(264600); // 12 s
    for (std::size_t i = 0; i < longer.samples.size(); ++i)
        longer.samples[i] = static_cast<double>(i % 97) / 97.0;
    const Waveform cut = normalize_duration(longer);
    REQUIRE(cut.samples.size() == kClipSamples);
    for (std::size_t i : {std::size_t(0), std::size_t(1000), std::size_t(kClipSamples - 1)})
        CHECK(cut.samples[i] == longer.samples[i]);

    Waveform shorter = make_wave(110250, 0.5); // 5 s
    const Waveform padded = normalize_duration(shorter);
    REQUIRE(padded.samples.size() == kClipSamples);
    CHECK(padded.samples[110249] == 0.5);
    for (std::size_t i = 110250; i < kClipSamples; i += 9999) CHECK(padded.samples[i] == 0.0);

    CHECK_THROWS(normalize_duration(make_wave(0)));
}

TEST_CASE("fft matches a naive DFT") {
    Rng rng(7);
    std::vector<std::complex<double>> a(16);
    for (auto& x : a) x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<std::complex<double>> expected(16);
    for (int k = 0; k < 16; ++k) {
        std::complex<double> acc(0, 0);
        for (int i = 0; i < 16; ++i) {
            const double ang = -2.0 * M_PI * k * i / 16.0;
            acc += a[static_cast<std::size_t>(i)] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        expected[static_cast<std::size_t>(k)] = acc;
    }
    fft_radix2(a);
    for (int k = 0; k < 16; ++k)
        CHECK(std::abs(a[static_cast<std::size_t>(k)] - expected[static_cast<std::size_t>(k)]) <
              1e-12);
    std::vector<std::complex<double>> bad(12);
    CHECK_THROWS(fft_radix2(bad));
}

TEST_CASE("compute_mel yields the 640 x 64 nonnegative matrix") {
    const FrontendConfig cfg;
    const MelSpectrogram mel = compute_mel(normalize_duration(tone(440.0)), cfg);
    CHECK(mel.values.rows() == 640);
    CHECK(mel.values.cols() == 64);
    CHECK_FALSE(mel.is_log);
    for (double v : mel.values.values()) CHECK(v >= 0.0);

    const MelSpectrogram zeros = compute_mel(make_wave(kClipSamples), cfg);
    CHECK(max_entry(zeros.values) == 0.0);
}

TEST_CASE("shape invariance holds for random content") {
    Rng rng(21);
    for (int rep = 0; rep < 3; ++rep) {
        Waveform w = make_wave(kClipSamples);
        for (double& s : w.samples) s = rng.uniform(-1, 1);
        const MelSpectrogram mel = compute_mel(w);
        CHECK(mel.values.rows() == 640);
        CHECK(mel.values.cols() == 64);
    }
}

TEST_CASE("a 1 kHz tone lands in the right mel bins, frame checked against a DFT oracle") {
    const FrontendConfig cfg;
    const Waveform w = normalize_duration(tone(1000.0));
    const MelSpectrogram mel = compute_mel(w, cfg);

    // independent single-frame oracle: naive DFT + the same filterbank
    const int frame = 320;
    const std::vector<double> power = frame_power_oracle(w, frame, cfg);
    const Matrix fb = mel_filterbank(cfg.window_size, kSampleRate, cfg.mel_bins);
    for (int m = 0; m < cfg.mel_bins; ++m) {
        double expected = 0.0;
        for (std::size_t k = 0; k < fb.cols(); ++k)
            expected += fb(static_cast<std::size_t>(m), k) * power[k];
        const double got = mel.values(static_cast<std::size_t>(frame), static_cast<std::size_t>(m));
        CHECK(std::fabs(got - expected) <= 1e-9 * std::max(1.0, std::fabs(expected)));
    }

    // energy concentrates where the filterbank weights 1 kHz
    double on_band = 0.0, total = 0.0;
    for (int m = 0; m < cfg.mel_bins; ++m) {
        double fb_at_1k = 0.0;
        for (std::size_t k = 0; k < fb.cols(); ++k) {
            const double f = static_cast<double>(k) * kSampleRate / cfg.window_size;
            if (std::fabs(f - 1000.0) < kSampleRate / double(cfg.window_size))
                fb_at_1k += fb(static_cast<std::size_t>(m), k);
        }
        const double e = mel.values(static_cast<std::size_t>(frame), static_cast<std::size_t>(m));
        total += e;
        if (fb_at_1k > 0.0) on_band += e;
    }
    CHECK(on_band / total > 0.9);
}

TEST_CASE("scaling the waveform by c scales the power mel by c^2") {
    Rng rng(3);
    Waveform w = make_wave(kClipSamples);
    for (double& s : w.samples) s = rng.uniform(-0.5, 0.5);
    const double c = 3.0;
    Waveform scaled = w;
    for (double& s : scaled.samples) s *= c;
    const MelSpectrogram a = compute_mel(w);
    const MelSpectrogram b = compute_mel(scaled);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double expected = c * c * a.values.values()[i];
        const double got = b.values.values()[i];
        CHECK(std::fabs(got - expected) <= 1e-9 * std::max(1e-30, std::fabs(expected)));
    }
}

TEST_CASE("log_scale applies ln(max(x, floor))") {
    MelSpectrogram m;
    m.values = Matrix(1, 3);
    m.values(0, 0) = std::exp(1.0);
    m.values(0, 1) = 0.0;
    m.values(0, 2) = 1.0;
    const MelSpectrogram logged = log_scale(m, 1e-10);
    CHECK(logged.is_log);
    CHECK(logged.values(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(logged.values(0, 1) == doctest::Approx(std::log(1e-10)).epsilon(1e-12));
    CHECK(logged.values(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS(log_scale(m, 0.0));
    CHECK_THROWS(log_scale(m, -1.0));
    CHECK_THROWS(log_scale(logged, 1e-10)); // already log
}

TEST_CASE("mel filterbank rows are area-normalized triangles") {
    const Matrix fb = mel_filterbank(2048, kSampleRate, 64);
    CHECK(fb.rows() == 64);
    CHECK(fb.cols() == 1025);
    for (std::size_t m = 0; m < fb.rows(); ++m) {
        double sum = 0.0;
        for (std::size_t k = 0; k < fb.cols(); ++k) {
            CHECK(fb(m, k) >= 0.0);
            sum += fb(m, k);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("wav io round trip within PCM16 quantization") {
    const std::string path = "test_roundtrip.wav";
    const Waveform w = tone(440.0, 22050, 0.7);
    write_wav(path, w);
    const Waveform r = read_wav(path);
    REQUIRE(r.samples.size() == w.samples.size());
    CHECK(r.sample_rate == kSampleRate);
    for (std::size_t i = 0; i < w.samples.size(); i += 777)
        CHECK(std::fabs(r.samples[i] - w.samples[i]) < 1.0 / 32000.0);
    std::filesystem::remove(path);
}

TEST_CASE("multi-channel wav is averaged to mono") {
    const std::string path = "test_stereo.wav";
    {
        std::ofstream os(path, std::ios::binary);
        auto u32 = [&](std::uint32_t x) { os.write(reinterpret_cast<const char*>(&x), 4); };
        auto u16 = [&](std::uint16_t x) { os.write(reinterpret_cast<const char*>(&x), 2); };
        const std::uint32_t frames = 4;
        os.write("RIFF", 4);
        u32(36 + frames * 4);
        os.write("WAVE", 4);
        os.write("fmt ", 4);
        u32(16);
        u16(1);
        u16(2); // stereo
        u32(22050);
        u32(22050 * 4);
        u16(4);
        u16(16);
        os.write("data", 4);
        u32(frames * 4);
        const std::int16_t interleaved[8] = {1000, 3000, -2000, 2000, 0, 0, 32000, -32000};
        os.write(reinterpret_cast<const char*>(interleaved), sizeof(interleaved));
    }
    const Waveform r = read_wav(path);
    REQUIRE(r.samples.size() == 4);
    CHECK(r.samples[0] == doctest::Approx(2000.0 / 32768.0));
    CHECK(r.samples[1] == doctest::Approx(0.0));
    CHECK(r.samples[2] == doctest::Approx(0.0));
    CHECK(r.samples[3] == doctest::Approx(0.0));
    std::filesystem::remove(path);
}

TEST_CASE("resampling preserves the tone frequency") {
    Waveform w44;
    w44.sample_rate = 44100;
    w44.samples.resize(44100);
    for (std::size_t i = 0; i < w44.samples.size(); ++i)
        w44.samples[i] = 0.5 * std::sin(2.0 * M_PI * 440.0 * i / 44100.0);
    const Waveform r = resample(w44, kSampleRate);
    CHECK(r.sample_rate == kSampleRate);
    CHECK(static_cast<double>(r.samples.size()) == doctest::Approx(22050).epsilon(0.01));
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 2000; i < 20000; ++i) {
        const double ideal = 0.5 * std::sin(2.0 * M_PI * 440.0 * i / kSampleRate);
        err += (r.samples[i] - ideal) * (r.samples[i] - ideal);
        ref += ideal * ideal;
    }
    CHECK(err / ref < 1e-3);
}

TEST_CASE("mel cache round trip") {
    MelSpectrogram m;
    m.values = Matrix(4, 3);
    Rng rng(5);
    for (double& v : m.values.values()) v = rng.uniform();
    m.is_log = true;
    save_mel("test_cache.sedw", m);
    const MelSpectrogram r = load_mel("test_cache.sedw");
    CHECK(r.is_log);
    CHECK(max_abs_diff(r.values, m.values) == 0.0);
    std::filesystem::remove("test_cache.sedw");
}
