#include "umss/dsp/stft.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>

#include <fftw3.h>

namespace umss::dsp {

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Real FFT of a fixed size; owns aligned buffers. Planning is serialized
// (FFTW's planner is not thread-safe); execution is reentrant per instance.
class RealFft {
public:
    explicit RealFft(int n) : n_(n) {
        real_ = fftw_alloc_real(static_cast<size_t>(n));
        cplx_ = fftw_alloc_complex(static_cast<size_t>(n / 2 + 1));
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(n, real_, cplx_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(n, cplx_, real_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(real_);
        fftw_free(cplx_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    void forward(const double* in, std::complex<double>* out) {
        std::memcpy(real_, in, static_cast<size_t>(n_) * sizeof(double));
        fftw_execute(fwd_);
        // std::complex<double> is layout-compatible with fftw_complex.
        std::memcpy(static_cast<void*>(out), cplx_,
                    static_cast<size_t>(n_ / 2 + 1) * sizeof(std::complex<double>));
    }

    // Unnormalized inverse; caller divides by n.
    void inverse(const std::complex<double>* in, double* out) {
        std::memcpy(static_cast<void*>(cplx_), in,
                    static_cast<size_t>(n_ / 2 + 1) * sizeof(std::complex<double>));
        fftw_execute(inv_);
        std::memcpy(out, real_, static_cast<size_t>(n_) * sizeof(double));
    }

private:
    int n_;
    double* real_;
    fftw_complex* cplx_;
    fftw_plan fwd_;
    fftw_plan inv_;
};

// Analysis window embedded centered in an n_fft buffer.
std::vector<double> padded_window(const StftConfig& cfg) {
    std::vector<double> w = make_window(cfg.window, cfg.win_length);
    std::vector<double> padded(static_cast<size_t>(cfg.n_fft), 0.0);
    const int offset = (cfg.n_fft - cfg.win_length) / 2;
    std::copy(w.begin(), w.end(), padded.begin() + offset);
    return padded;
}

std::vector<double> reflect_pad(const std::vector<double>& x, int pad) {
    const int64_t n = static_cast<int64_t>(x.size());
    require(n > pad, "waveform too short for centered framing");
    std::vector<double> out(static_cast<size_t>(n + 2 * pad));
    for (int i = 0; i < pad; ++i) out[static_cast<size_t>(i)] = x[static_cast<size_t>(pad - i)];
    std::copy(x.begin(), x.end(), out.begin() + pad);
    for (int i = 0; i < pad; ++i)
        out[static_cast<size_t>(n + pad + i)] = x[static_cast<size_t>(n - 2 - i)];
    return out;
}

} // namespace

void validate(const StftConfig& cfg) {
    require(cfg.n_fft > 0 && cfg.win_length > 0 && cfg.hop_length > 0,
            "stft config: sizes must be positive");
    require(cfg.hop_length <= cfg.win_length, "stft config: hop_length > win_length");
    require(cfg.win_length <= cfg.n_fft, "stft config: win_length > n_fft");
    require((cfg.n_fft - cfg.win_length) % 2 == 0,
            "stft config: n_fft - win_length must be even for centered windows");
}

std::vector<double> make_window(WindowKind kind, int length) {
    require(kind == WindowKind::Hann, "unsupported window kind");
    std::vector<double> w(static_cast<size_t>(length));
    const double step = 2.0 * M_PI / static_cast<double>(length);
    for (int i = 0; i < length; ++i)
        w[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(step * i));
    return w;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
    validate(cfg);
    const int64_t len = static_cast<int64_t>(w.samples.size());
    require(len > 0, "empty waveform");

    std::vector<double> signal;
    int frames = 0;
    if (cfg.center_pad) {
        const int pad = cfg.n_fft / 2;
        signal = reflect_pad(w.samples, pad);
        frames = 1 + static_cast<int>(len / cfg.hop_length);
    } else {
        require(len >= cfg.win_length, "waveform shorter than the analysis window");
        signal = w.samples;
        frames = 1 + static_cast<int>((len - cfg.win_length) / cfg.hop_length);
    }

    const std::vector<double> window = padded_window(cfg);
    // Without center padding frames start at the window, not the fft buffer.
    const int frame_offset = cfg.center_pad ? 0 : (cfg.n_fft - cfg.win_length) / 2;

    ComplexSpectrogram out;
    out.frames = frames;
    out.bins = cfg.freq_bins();
    out.values.resize(static_cast<size_t>(frames) * out.bins);
    out.config = cfg;
    out.length_hint = static_cast<int>(len);

    RealFft fft(cfg.n_fft);
    std::vector<double> frame(static_cast<size_t>(cfg.n_fft));
    for (int t = 0; t < frames; ++t) {
        const int64_t start = static_cast<int64_t>(t) * cfg.hop_length - frame_offset;
        for (int k = 0; k < cfg.n_fft; ++k) {
            const int64_t idx = start + k;
            const double s =
                (idx >= 0 && idx < static_cast<int64_t>(signal.size())) ? signal[static_cast<size_t>(idx)] : 0.0;
            frame[static_cast<size_t>(k)] = s * window[static_cast<size_t>(k)];
        }
        fft.forward(frame.data(), &out.values[static_cast<size_t>(t) * out.bins]);
    }
    return out;
}

Waveform istft(const ComplexSpectrogram& s, int sample_rate) {
    const StftConfig& cfg = s.config;
    validate(cfg);
    require(s.frames > 0 && s.bins == cfg.freq_bins(), "spectrogram/config mismatch");

    const int pad = cfg.center_pad ? cfg.n_fft / 2 : 0;
    const int64_t out_len = s.length_hint > 0
                                ? s.length_hint
                                : static_cast<int64_t>(s.frames - 1) * cfg.hop_length +
                                      (cfg.center_pad ? 0 : cfg.win_length);
    const int64_t padded_len = static_cast<int64_t>(s.frames - 1) * cfg.hop_length + cfg.n_fft;

    const std::vector<double> window = padded_window(cfg);
    std::vector<double> acc(static_cast<size_t>(padded_len), 0.0);
    std::vector<double> den(static_cast<size_t>(padded_len), 0.0);

    RealFft fft(cfg.n_fft);
    std::vector<double> frame(static_cast<size_t>(cfg.n_fft));
    const double inv_n = 1.0 / static_cast<double>(cfg.n_fft);
    for (int t = 0; t < s.frames; ++t) {
        fft.inverse(&s.values[static_cast<size_t>(t) * s.bins], frame.data());
        const int64_t start = static_cast<int64_t>(t) * cfg.hop_length;
        for (int k = 0; k < cfg.n_fft; ++k) {
            const double win = window[static_cast<size_t>(k)];
            acc[static_cast<size_t>(start + k)] += frame[static_cast<size_t>(k)] * inv_n * win;
            den[static_cast<size_t>(start + k)] += win * win;
        }
    }

    // Maps output sample index to the overlap-add buffer; the non-centered
    // path must undo the window's offset inside the fft frame.
    const int frame_offset = cfg.center_pad ? 0 : (cfg.n_fft - cfg.win_length) / 2;
    // Without center padding the first/last window of samples only sees the
    // window taper; those are zero-filled. A vanishing denominator in the
    // interior means the window/hop combination genuinely leaves gaps.
    const int64_t interior_lo = cfg.center_pad ? 0 : cfg.win_length;
    const int64_t interior_hi = cfg.center_pad ? out_len : out_len - cfg.win_length;
    Waveform out;
    out.sample_rate = sample_rate;
    out.samples.resize(static_cast<size_t>(out_len));
    for (int64_t i = 0; i < out_len; ++i) {
        const int64_t j = i + pad + frame_offset;
        if (j < 0 || j >= padded_len) {
            out.samples[static_cast<size_t>(i)] = 0.0;
            continue;
        }
        const double d = den[static_cast<size_t>(j)];
        if (d <= 1e-8) {
            require(i < interior_lo || i >= interior_hi,
                    "window/hop combination leaves gaps; overlap-add is not invertible");
            out.samples[static_cast<size_t>(i)] = 0.0;
            continue;
        }
        out.samples[static_cast<size_t>(i)] = acc[static_cast<size_t>(j)] / d;
    }
    return out;
}

MagSpectrogram magnitude(const ComplexSpectrogram& s) {
    MagSpectrogram m;
    m.frames = s.frames;
    m.bins = s.bins;
    m.config = s.config;
    m.length_hint = s.length_hint;
    m.values.resize(s.values.size());
    for (size_t i = 0; i < s.values.size(); ++i) m.values[i] = std::abs(s.values[i]);
    return m;
}

ComplexSpectrogram with_phase_of(const MagSpectrogram& mag, const ComplexSpectrogram& reference) {
    require(mag.frames == reference.frames && mag.bins == reference.bins,
            "with_phase_of: shape mismatch");
    ComplexSpectrogram out = reference;
    for (size_t i = 0; i < out.values.size(); ++i) {
        const double a = std::abs(reference.values[i]);
        if (a > 1e-300) {
            out.values[i] *= mag.values[i] / a;
        } else {
            out.values[i] = std::complex<double>(mag.values[i], 0.0);
        }
    }
    return out;
}

double MagSpectrogram::max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
}

} // namespace umss::dsp
