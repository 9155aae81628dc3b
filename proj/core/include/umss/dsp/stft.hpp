#pragma once

#include <complex>
#include <vector>

#include "umss/dsp/wav.hpp"

namespace umss::dsp {

enum class WindowKind { Hann };

struct StftConfig {
    int n_fft = 2048;
    int win_length = 1024;
    int hop_length = 160;
    WindowKind window = WindowKind::Hann;
    bool center_pad = true;

    int freq_bins() const { return n_fft / 2 + 1; }
    bool operator==(const StftConfig&) const = default;
};

void validate(const StftConfig& cfg);

// Row-major [frames x bins].
struct ComplexSpectrogram {
    int frames = 0;
    int bins = 0;
    std::vector<std::complex<double>> values;
    StftConfig config;
    int length_hint = 0; // source sample count, when known

    std::complex<double>& at(int t, int f) { return values[static_cast<size_t>(t) * bins + f]; }
    std::complex<double> at(int t, int f) const { return values[static_cast<size_t>(t) * bins + f]; }
};

struct MagSpectrogram {
    int frames = 0;
    int bins = 0;
    std::vector<double> values;
    StftConfig config;
    int length_hint = 0;

    double& at(int t, int f) { return values[static_cast<size_t>(t) * bins + f]; }
    double at(int t, int f) const { return values[static_cast<size_t>(t) * bins + f]; }
    double max_value() const;
};

// Periodic Hann taper.
std::vector<double> make_window(WindowKind kind, int length);

// With center padding, frames = 1 + floor(len / hop) and frame t is centered
// on sample t*hop. Without it, frames = 1 + floor((len - win) / hop).
ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

// Least-squares overlap-add inverse; exact on the interior for any
// window/hop with full squared-window coverage.
Waveform istft(const ComplexSpectrogram& s, int sample_rate);

MagSpectrogram magnitude(const ComplexSpectrogram& s);
// Pairs a magnitude with the phase of `reference` (mixture-phase synthesis).
ComplexSpectrogram with_phase_of(const MagSpectrogram& mag, const ComplexSpectrogram& reference);

} // namespace umss::dsp
