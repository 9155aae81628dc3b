#include "umss/dsp/pitch_shift.hpp"

#include <cmath>
#include <complex>

#include "umss/dsp/resample.hpp"
#include "umss/dsp/stft.hpp"

namespace umss::dsp {

namespace {

double wrap_pi(double x) {
    x = std::fmod(x + M_PI, 2.0 * M_PI);
    if (x < 0.0) x += 2.0 * M_PI;
    return x - M_PI;
}

StftConfig vocoder_config(size_t n_samples) {
    int win = 1024;
    // Shrink for very short inputs so at least a few frames overlap.
    while (win > 64 && static_cast<size_t>(win) * 2 > n_samples) win /= 2;
    StftConfig cfg;
    cfg.n_fft = win;
    cfg.win_length = win;
    cfg.hop_length = win / 4;
    cfg.center_pad = true;
    return cfg;
}

} // namespace

Waveform time_stretch(const Waveform& w, double factor) {
    require(!w.samples.empty(), "empty waveform");
    require(factor > 0.0, "time_stretch: factor must be positive");
    if (factor == 1.0) return w;

    const StftConfig cfg = vocoder_config(w.samples.size());
    ComplexSpectrogram d = stft(w, cfg);
    const int bins = d.bins;

    // One extra column so the interpolation grid can reach the last frame.
    ComplexSpectrogram padded = d;
    padded.frames += 1;
    padded.values.resize(static_cast<size_t>(padded.frames) * bins);
    for (int f = 0; f < bins; ++f)
        padded.at(padded.frames - 1, f) = d.at(d.frames - 1, f);

    const double step = 1.0 / factor;
    const int out_frames = std::max(1, static_cast<int>(std::ceil(d.frames * factor)));

    std::vector<double> omega(static_cast<size_t>(bins));
    for (int f = 0; f < bins; ++f)
        omega[static_cast<size_t>(f)] =
            2.0 * M_PI * f * cfg.hop_length / static_cast<double>(cfg.n_fft);

    ComplexSpectrogram out;
    out.frames = out_frames;
    out.bins = bins;
    out.config = cfg;
    out.values.resize(static_cast<size_t>(out_frames) * bins);

    std::vector<double> phase(static_cast<size_t>(bins));
    for (int f = 0; f < bins; ++f) phase[static_cast<size_t>(f)] = std::arg(d.at(0, f));

    for (int j = 0; j < out_frames; ++j) {
        const double pos = j * step;
        const int i = std::min(static_cast<int>(pos), padded.frames - 2);
        const double frac = pos - i;
        for (int f = 0; f < bins; ++f) {
            const std::complex<double> c0 = padded.at(i, f);
            const std::complex<double> c1 = padded.at(i + 1, f);
            const double mag = (1.0 - frac) * std::abs(c0) + frac * std::abs(c1);
            out.at(j, f) = std::polar(mag, phase[static_cast<size_t>(f)]);
            // Instantaneous-frequency phase propagation.
            const double dphi =
                wrap_pi(std::arg(c1) - std::arg(c0) - omega[static_cast<size_t>(f)]);
            phase[static_cast<size_t>(f)] += omega[static_cast<size_t>(f)] + dphi;
        }
    }

    Waveform stretched = istft(out, w.sample_rate);
    const int64_t want = std::llround(static_cast<double>(w.samples.size()) * factor);
    stretched.samples.resize(static_cast<size_t>(std::max<int64_t>(want, 1)), 0.0);
    return stretched;
}

Waveform pitch_shift(const Waveform& w, double semitones) {
    require(!w.samples.empty(), "empty waveform");
    require(std::fabs(semitones) <= 12.0, "pitch_shift: |semitones| must be <= 12");
    if (semitones == 0.0) return w;

    const double rate = std::exp2(semitones / 12.0);
    Waveform stretched = time_stretch(w, rate);
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples = resample_to_length(stretched.samples, static_cast<int64_t>(w.samples.size()));
    return out;
}

} // namespace umss::dsp
