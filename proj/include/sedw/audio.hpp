#pragma once

#include <string>
#include <vector>

namespace sedw {

inline constexpr int kSampleRate = 22050;
inline constexpr int kClipSeconds = 10;
inline constexpr int kClipSamples = kSampleRate * kClipSeconds; // 220500

struct Waveform {
    std::vector<double> samples; // amplitude, dimensionless
    int sample_rate = kSampleRate;
};

// PCM 16-bit WAV. Multi-channel files are averaged to mono on read.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// Band-limited polyphase (windowed-sinc) resampling.
Waveform resample(const Waveform& w, int target_rate);

// Truncate or zero-pad at the end so the clip is exactly 10 s at 22050 Hz.
Waveform normalize_duration(const Waveform& w);

// read_wav + resample to 22050 Hz + normalize_duration
Waveform load_clip(const std::string& path);

} // namespace sedw
