#include "umss/dsp/griffin_lim.hpp"

#include <cmath>

#include "umss/rng.hpp"

namespace umss::dsp {

Waveform griffin_lim(const MagSpectrogram& m, int n_iters, int sample_rate) {
    require(n_iters >= 1, "griffin_lim: n_iters must be >= 1");
    validate(m.config);
    for (double v : m.values) require(v >= 0.0, "griffin_lim: magnitude must be nonnegative");

    ComplexSpectrogram s;
    s.frames = m.frames;
    s.bins = m.bins;
    s.config = m.config;
    s.length_hint = m.length_hint;
    s.values.resize(m.values.size());
    // Random initial phase with a fixed seed: deterministic, and it avoids
    // the symmetric stationary points a zero-phase start falls into.
    Rng rng(0x6c1f57d4u);
    for (size_t i = 0; i < m.values.size(); ++i) {
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        s.values[i] = std::polar(m.values[i], phi);
    }

    Waveform x;
    for (int it = 0; it < n_iters; ++it) {
        x = istft(s, sample_rate);
        ComplexSpectrogram estimate = stft(x, m.config);
        for (size_t i = 0; i < s.values.size(); ++i) {
            const double a = std::abs(estimate.values[i]);
            s.values[i] = a > 1e-300 ? estimate.values[i] * (m.values[i] / a)
                                     : std::complex<double>(m.values[i], 0.0);
        }
    }
    return x;
}

double spectral_convergence(const MagSpectrogram& target, const Waveform& w) {
    MagSpectrogram est = magnitude(stft(w, target.config));
    require(est.frames == target.frames && est.bins == target.bins,
            "spectral_convergence: frame mismatch");
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < target.values.size(); ++i) {
        const double d = est.values[i] - target.values[i];
        num += d * d;
        den += target.values[i] * target.values[i];
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

} // namespace umss::dsp
