#include "umss/dsp/resample.hpp"

#include <cmath>

namespace umss::dsp {

namespace {

double sinc(double x) {
    if (std::fabs(x) < 1e-12) return 1.0;
    const double px = M_PI * x;
    return std::sin(px) / px;
}

// Hann-windowed sinc interpolation at fractional positions step*n.
// cutoff <= 1 relative to input Nyquist; wider support when decimating.
std::vector<double> sinc_resample(const std::vector<double>& x, int64_t out_len, double step) {
    const double cutoff = std::min(1.0, 1.0 / step);
    const double half_width = 32.0 * std::max(1.0, step);
    const int64_t n_in = static_cast<int64_t>(x.size());

    std::vector<double> out(static_cast<size_t>(out_len), 0.0);
    for (int64_t n = 0; n < out_len; ++n) {
        const double pos = static_cast<double>(n) * step;
        const int64_t k0 = static_cast<int64_t>(std::ceil(pos - half_width));
        const int64_t k1 = static_cast<int64_t>(std::floor(pos + half_width));
        double acc = 0.0, norm = 0.0;
        for (int64_t k = k0; k <= k1; ++k) {
            const double d = pos - static_cast<double>(k);
            const double taper = 0.5 * (1.0 + std::cos(M_PI * d / half_width));
            const double kernel = cutoff * sinc(cutoff * d) * taper;
            norm += kernel;
            if (k >= 0 && k < n_in) acc += x[static_cast<size_t>(k)] * kernel;
        }
        out[static_cast<size_t>(n)] = norm != 0.0 ? acc / norm : 0.0;
    }
    return out;
}

} // namespace

Waveform resample(const Waveform& w, int target_rate) {
    require(!w.samples.empty(), "empty waveform");
    require(target_rate > 0, "resample: target rate must be positive");
    require(w.sample_rate > 0, "resample: source rate must be positive");
    if (target_rate == w.sample_rate) return w;

    const int64_t n_in = static_cast<int64_t>(w.samples.size());
    const int64_t n_out = std::llround(static_cast<double>(n_in) * target_rate / w.sample_rate);
    const double step = static_cast<double>(w.sample_rate) / target_rate;

    Waveform out;
    out.sample_rate = target_rate;
    out.samples = sinc_resample(w.samples, std::max<int64_t>(n_out, 1), step);
    return out;
}

std::vector<double> resample_to_length(const std::vector<double>& x, int64_t new_len) {
    require(!x.empty(), "empty waveform");
    require(new_len > 0, "resample_to_length: length must be positive");
    if (new_len == static_cast<int64_t>(x.size())) return x;
    const double step = static_cast<double>(x.size()) / static_cast<double>(new_len);
    return sinc_resample(x, new_len, step);
}

} // namespace umss::dsp
