#include <benchmark/benchmark.h>

#include <cmath>

#include "umss/dsp/griffin_lim.hpp"
#include "umss/dsp/pitch_shift.hpp"
#include "umss/dsp/resample.hpp"
#include "umss/dsp/stft.hpp"
#include "umss/rng.hpp"

using namespace umss;

namespace {

dsp::Waveform noise_wave(size_t n, int sr) {
    Rng rng(7);
    dsp::Waveform w;
    w.sample_rate = sr;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) w.samples[i] = 0.3 * rng.normal();
    return w;
}

dsp::StftConfig full_scale_cfg() {
    dsp::StftConfig cfg;
    cfg.n_fft = 2048;
    cfg.win_length = 1024;
    cfg.hop_length = 160;
    return cfg;
}

} // namespace

static void BM_StftFullScale4s(benchmark::State& state) {
    dsp::Waveform w = noise_wave(64000, 16000);
    dsp::StftConfig cfg = full_scale_cfg();
    for (auto _ : state) {
        auto s = dsp::stft(w, cfg);
        benchmark::DoNotOptimize(s.values.data());
    }
}
BENCHMARK(BM_StftFullScale4s);

static void BM_IstftFullScale4s(benchmark::State& state) {
    dsp::Waveform w = noise_wave(64000, 16000);
    dsp::ComplexSpectrogram s = dsp::stft(w, full_scale_cfg());
    for (auto _ : state) {
        auto back = dsp::istft(s, 16000);
        benchmark::DoNotOptimize(back.samples.data());
    }
}
BENCHMARK(BM_IstftFullScale4s);

static void BM_GriffinLim(benchmark::State& state) {
    dsp::Waveform w = noise_wave(16000, 16000);
    dsp::StftConfig cfg;
    cfg.n_fft = 256;
    cfg.win_length = 256;
    cfg.hop_length = 64;
    dsp::MagSpectrogram m = dsp::magnitude(dsp::stft(w, cfg));
    const int iters = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto out = dsp::griffin_lim(m, iters, 16000);
        benchmark::DoNotOptimize(out.samples.data());
    }
}
BENCHMARK(BM_GriffinLim)->Arg(1)->Arg(10)->Arg(60);

static void BM_Resample48kTo16k(benchmark::State& state) {
    dsp::Waveform w = noise_wave(48000, 48000);
    for (auto _ : state) {
        auto out = dsp::resample(w, 16000);
        benchmark::DoNotOptimize(out.samples.data());
    }
}
BENCHMARK(BM_Resample48kTo16k);

static void BM_PitchShift1s(benchmark::State& state) {
    dsp::Waveform w = noise_wave(16000, 16000);
    for (auto _ : state) {
        auto out = dsp::pitch_shift(w, 3.0);
        benchmark::DoNotOptimize(out.samples.data());
    }
}
BENCHMARK(BM_PitchShift1s);

BENCHMARK_MAIN();
