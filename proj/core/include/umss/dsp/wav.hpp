#pragma once

#include <string>
#include <vector>

#include "umss/common.hpp"

namespace umss::dsp {

// Mono audio. Samples are doubles in [-1, 1] after normalization; the
// training pipeline runs at 16 kHz.
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 0;

    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

enum class WavFormat { Pcm16, Float32 };

// Reads 16-bit PCM or 32-bit float WAV. Multi-channel input is averaged
// down to mono.
Waveform read_wav(const std::string& path);

void write_wav(const std::string& path, const Waveform& w,
               WavFormat format = WavFormat::Pcm16);

double peak_abs(const Waveform& w);
double rms(const std::vector<double>& samples, size_t begin, size_t count);

} // namespace umss::dsp
