#include "sedw/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace sedw {

namespace {

struct RiffHeader {
    char riff[4];
    std::uint32_t size;
    char wave[4];
};

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24));
}

} // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open wav: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error("not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t len = read_u32_le(bytes.data() + pos + 4);
        const unsigned char* body = bytes.data() + pos + 8;
        if (pos + 8 + len > bytes.size()) throw std::runtime_error("truncated wav chunk in " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) throw std::runtime_error("bad fmt chunk in " + path);
            format = read_u16(body);
            channels = read_u16(body + 2);
            rate = read_u32_le(body + 4);
            bits = read_u16(body + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = body;
            data_len = len;
        }
        pos += 8 + len + (len & 1);
    }
    if (format != 1 || bits != 16)
        throw std::runtime_error("unsupported wav encoding (PCM16 required): " + path);
    if (channels == 0 || !data) throw std::runtime_error("malformed wav: " + path);

    const std::size_t n_frames = data_len / (2 * channels);
    Waveform w;
    w.sample_rate = static_cast<int>(rate);
    w.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + 2 * (i * channels + c);
            std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
            acc += static_cast<double>(s) / 32768.0;
        }
        w.samples[i] = acc / channels;
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
    const std::uint32_t data_len = n * 2;
    const std::uint32_t rate = static_cast<std::uint32_t>(w.sample_rate);
    const std::uint32_t byte_rate = rate * 2;

    auto u32 = [&](std::uint32_t x) { os.write(reinterpret_cast<const char*>(&x), 4); };
    auto u16 = [&](std::uint16_t x) { os.write(reinterpret_cast<const char*>(&x), 2); };

    os.write("RIFF", 4);
    u32(36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    u32(16);
    u16(1); // PCM
    u16(1); // mono
    u32(rate);
    u32(byte_rate);
    u16(2);  // block align
    u16(16); // bits
    os.write("data", 4);
    u32(data_len);
    for (double x : w.samples) {
        double clipped = std::clamp(x, -1.0, 1.0);
        std::int16_t s = static_cast<std::int16_t>(std::lrint(clipped * 32767.0));
        os.write(reinterpret_cast<const char*>(&s), 2);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

Waveform resample(const Waveform& w, int target_rate) {
    if (w.sample_rate <= 0 || target_rate <= 0)
        throw std::invalid_argument("resample: rates must be positive");
    if (w.sample_rate == target_rate) return w;

    const int g = std::gcd(w.sample_rate, target_rate);
    const int up = target_rate / g;
    const int down = w.sample_rate / g;

    // windowed-sinc low-pass at the smaller Nyquist, 16 zero crossings
    const double cutoff = 0.95 * 0.5 * std::min(1.0, double(up) / double(down));
    const int half_width = 16 * std::max(1, down / std::max(1, std::min(up, down)));
    const std::size_t n_out =
        static_cast<std::size_t>((static_cast<std::uint64_t>(w.samples.size()) * up + down - 1) / down);

    Waveform out;
    out.sample_rate = target_rate;
    out.samples.resize(n_out, 0.0);
    const auto& x = w.samples;
    const double n_in = static_cast<double>(x.size());

    for (std::size_t j = 0; j < n_out; ++j) {
        // position of output sample j on the input time axis
        const double center = static_cast<double>(j) * down / up;
        const int lo = static_cast<int>(std::ceil(center - half_width));
        const int hi = static_cast<int>(std::floor(center + half_width));
        double acc = 0.0;
        for (int i = std::max(lo, 0); i <= std::min<int>(hi, static_cast<int>(n_in) - 1); ++i) {
            const double d = (static_cast<double>(i) - center);
            double sinc;
            if (std::fabs(d) < 1e-12) {
                sinc = 2.0 * cutoff;
            } else {
                sinc = std::sin(2.0 * M_PI * cutoff * d) / (M_PI * d);
            }
            // Hann window over the kernel support
            const double win = 0.5 * (1.0 + std::cos(M_PI * d / (half_width + 1)));
            acc += x[static_cast<std::size_t>(i)] * sinc * win;
        }
        out.samples[j] = acc;
    }
    return out;
}

Waveform normalize_duration(const Waveform& w) {
    if (w.samples.empty()) throw std::invalid_argument("normalize_duration: empty waveform");
    if (w.sample_rate != kSampleRate)
        throw std::invalid_argument("normalize_duration: expected 22050 Hz input");
    Waveform out = w;
    out.samples.resize(kClipSamples, 0.0); // truncates or zero-pads at the end
    return out;
}

Waveform load_clip(const std::string& path) {
    Waveform w = read_wav(path);
    if (w.sample_rate != kSampleRate) w = resample(w, kSampleRate);
    return normalize_duration(w);
}

} // namespace sedw
