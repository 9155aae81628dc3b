#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "oracles.hpp"
#include "umss/dsp/griffin_lim.hpp"
#include "umss/dsp/pitch.hpp"
#include "umss/dsp/pitch_shift.hpp"
#include "umss/dsp/resample.hpp"
#include "umss/dsp/stft.hpp"
#include "umss/dsp/wav.hpp"

using namespace umss;

namespace {

dsp::Waveform make_wave(std::vector<double> samples, int sr) {
    dsp::Waveform w;
    w.samples = std::move(samples);
    w.sample_rate = sr;
    return w;
}

dsp::StftConfig full_scale_config() {
    dsp::StftConfig cfg;
    cfg.n_fft = 2048;
    cfg.win_length = 1024;
    cfg.hop_length = 160;
    return cfg;
}

dsp::StftConfig small_config() {
    dsp::StftConfig cfg;
    cfg.n_fft = 256;
    cfg.win_length = 256;
    cfg.hop_length = 64;
    return cfg;
}

} // namespace

TEST_CASE("resample: silence stays silence with exact length") {
    dsp::Waveform w = make_wave(std::vector<double>(48000, 0.0), 48000);
    dsp::Waveform out = dsp::resample(w, 16000);
    CHECK(out.sample_rate == 16000);
    CHECK(out.samples.size() == 16000);
    for (double v : out.samples) CHECK(v == 0.0);
}

TEST_CASE("resample: 440 Hz sine keeps its dominant frequency across rates") {
    dsp::Waveform w = make_wave(oracle::sine(440.0, 1.0, 48000), 48000);
    const double before = oracle::dominant_frequency_hz(w.samples, 48000);
    dsp::Waveform out = dsp::resample(w, 16000);
    const double after = oracle::dominant_frequency_hz(out.samples, 16000);
    const double tol = oracle::bin_width_hz(out.samples, 16000);
    CHECK(std::fabs(before - 440.0) <= oracle::bin_width_hz(w.samples, 48000));
    CHECK(std::fabs(after - 440.0) <= tol);
    CHECK(out.samples.size() == 16000);
}

TEST_CASE("resample: identical target rate returns identical samples") {
    dsp::Waveform w = make_wave(oracle::sine(523.25, 0.25, 16000), 16000);
    dsp::Waveform out = dsp::resample(w, 16000);
    REQUIRE(out.samples.size() == w.samples.size());
    for (size_t i = 0; i < w.samples.size(); ++i) CHECK(out.samples[i] == w.samples[i]);
}

TEST_CASE("resample: empty input is an error") {
    dsp::Waveform w;
    w.sample_rate = 16000;
    CHECK_THROWS_AS(dsp::resample(w, 8000), Error);
}

TEST_CASE("stft: 4 s at 16 kHz with hop 160 gives 401 frames") {
    dsp::Waveform w = make_wave(oracle::white_noise(64000, 7), 16000);
    dsp::ComplexSpectrogram s = dsp::stft(w, full_scale_config());
    CHECK(s.frames == 401);
    CHECK(s.bins == 1025);
}

TEST_CASE("stft: 440 Hz sine peaks at bin 56 under the full-scale config") {
    dsp::Waveform w = make_wave(oracle::sine(440.0, 2.0, 16000), 16000);
    dsp::MagSpectrogram m = dsp::magnitude(dsp::stft(w, full_scale_config()));
    // round(440 * 2048 / 16000) = 56
    for (int t = 10; t < m.frames - 10; t += 7) {
        int best = 0;
        for (int f = 1; f < m.bins; ++f)
            if (m.at(t, f) > m.at(t, best)) best = f;
        CHECK(best == 56);
    }
}

TEST_CASE("stft: zero input gives zero magnitude") {
    dsp::Waveform w = make_wave(std::vector<double>(8000, 0.0), 16000);
    dsp::MagSpectrogram m = dsp::magnitude(dsp::stft(w, small_config()));
    for (double v : m.values) CHECK(v == 0.0);
}

TEST_CASE("stft: hop larger than window is a config error") {
    dsp::StftConfig bad = small_config();
    bad.hop_length = bad.win_length + 1;
    dsp::Waveform w = make_wave(oracle::sine(440.0, 0.5, 16000), 16000);
    CHECK_THROWS_AS(dsp::stft(w, bad), Error);
}

TEST_CASE("istft: white-noise round trip is exact on the interior") {
    dsp::Waveform w = make_wave(oracle::white_noise(32000, 11), 16000);
    dsp::StftConfig cfg = full_scale_config();
    dsp::Waveform back = dsp::istft(dsp::stft(w, cfg), 16000);
    REQUIRE(back.samples.size() == w.samples.size());
    double max_err = 0.0;
    for (size_t i = static_cast<size_t>(cfg.win_length);
         i < w.samples.size() - static_cast<size_t>(cfg.win_length); ++i)
        max_err = std::max(max_err, std::fabs(back.samples[i] - w.samples[i]));
    CHECK(max_err < 1e-6);
}

TEST_CASE("istft: zero spectrogram gives a zero waveform") {
    dsp::Waveform w = make_wave(std::vector<double>(8000, 0.0), 16000);
    dsp::ComplexSpectrogram s = dsp::stft(w, small_config());
    dsp::Waveform back = dsp::istft(s, 16000);
    for (double v : back.samples) CHECK(v == 0.0);
}

TEST_CASE("istft: sine round trip correlates above 0.9999") {
    dsp::Waveform w = make_wave(oracle::sine(440.0, 1.0, 16000), 16000);
    dsp::Waveform back = dsp::istft(dsp::stft(w, full_scale_config()), 16000);
    CHECK(oracle::correlation(w.samples, back.samples) > 0.9999);
}

TEST_CASE("istft: non-overlapping hann frames are rejected") {
    dsp::StftConfig cfg;
    cfg.n_fft = 256;
    cfg.win_length = 256;
    cfg.hop_length = 256; // hann endpoints are zero: gaps in the overlap-add
    dsp::Waveform w = make_wave(oracle::sine(440.0, 0.5, 16000), 16000);
    dsp::ComplexSpectrogram s = dsp::stft(w, cfg);
    CHECK_THROWS_AS(dsp::istft(s, 16000), Error);
}

TEST_CASE("istft(stft) identity property across COLA configs and signals") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        for (int hop : {32, 64, 128}) {
            dsp::StftConfig cfg;
            cfg.n_fft = 256;
            cfg.win_length = 256;
            cfg.hop_length = hop;
            dsp::Waveform w = make_wave(oracle::white_noise(6000 + 17 * seed, seed), 16000);
            dsp::Waveform back = dsp::istft(dsp::stft(w, cfg), 16000);
            REQUIRE(back.samples.size() == w.samples.size());
            for (size_t i = 256; i + 256 < w.samples.size(); ++i)
                CHECK(std::fabs(back.samples[i] - w.samples[i]) < 1e-6);
        }
    }
}

TEST_CASE("stft/istft without center padding: framing formula and round trip") {
    dsp::StftConfig cfg = small_config();
    cfg.center_pad = false;
    dsp::Waveform w = make_wave(oracle::white_noise(4000, 17), 16000);
    dsp::ComplexSpectrogram s = dsp::stft(w, cfg);
    CHECK(s.frames == 1 + (4000 - 256) / 64);
    dsp::Waveform back = dsp::istft(s, 16000);
    for (size_t i = 256; i + 512 < back.samples.size(); ++i)
        CHECK(std::fabs(back.samples[i] - w.samples[i]) < 1e-6);

    dsp::Waveform tiny = make_wave(std::vector<double>(100, 0.1), 16000);
    CHECK_THROWS_AS(dsp::stft(tiny, cfg), Error); // shorter than the window
}

TEST_CASE("stft magnitude: sign-flip invariance and linear gain") {
    dsp::Waveform w = make_wave(oracle::white_noise(4000, 21), 16000);
    dsp::Waveform flipped = w, scaled = w;
    for (double& v : flipped.samples) v = -v;
    for (double& v : scaled.samples) v *= 3.5;
    dsp::MagSpectrogram m0 = dsp::magnitude(dsp::stft(w, small_config()));
    dsp::MagSpectrogram m1 = dsp::magnitude(dsp::stft(flipped, small_config()));
    dsp::MagSpectrogram m2 = dsp::magnitude(dsp::stft(scaled, small_config()));
    for (size_t i = 0; i < m0.values.size(); ++i) {
        CHECK(m1.values[i] == doctest::Approx(m0.values[i]).epsilon(1e-12));
        CHECK(m2.values[i] == doctest::Approx(3.5 * m0.values[i]).epsilon(1e-9));
    }
}

TEST_CASE("griffin_lim: sine magnitude reconstructs the right pitch") {
    dsp::Waveform w = make_wave(oracle::sine(440.0, 1.0, 16000), 16000);
    dsp::MagSpectrogram m = dsp::magnitude(dsp::stft(w, small_config()));
    dsp::Waveform out = dsp::griffin_lim(m, 60, 16000);
    const double freq = oracle::dominant_frequency_hz(out.samples, 16000);
    CHECK(std::fabs(freq - 440.0) <= oracle::bin_width_hz(out.samples, 16000));
}

TEST_CASE("griffin_lim: zero magnitude gives a zero waveform") {
    dsp::MagSpectrogram m;
    m.config = small_config();
    m.frames = 20;
    m.bins = m.config.freq_bins();
    m.values.assign(static_cast<size_t>(m.frames) * m.bins, 0.0);
    dsp::Waveform out = dsp::griffin_lim(m, 5, 16000);
    for (double v : out.samples) CHECK(v == 0.0);
}

TEST_CASE("griffin_lim: spectral convergence never increases with iterations") {
    // A magnitude with no consistent phase solution: random entries.
    dsp::StftConfig cfg = small_config();
    dsp::MagSpectrogram m;
    m.config = cfg;
    m.frames = 40;
    m.bins = cfg.freq_bins();
    std::vector<double> noise = oracle::white_noise(static_cast<size_t>(m.frames) * m.bins, 5);
    m.values.resize(noise.size());
    for (size_t i = 0; i < noise.size(); ++i) m.values[i] = std::fabs(noise[i]);

    double prev = 1e300;
    for (int iters = 1; iters <= 8; ++iters) {
        dsp::Waveform out = dsp::griffin_lim(m, iters, 16000);
        const double err = dsp::spectral_convergence(m, out);
        CHECK(err <= prev + 1e-9);
        prev = err;
    }

    // Endpoint comparison on a real tone: 60 iterations never beat 1.
    dsp::Waveform tone = make_wave(oracle::sine(523.25, 0.5, 16000), 16000);
    dsp::MagSpectrogram tm = dsp::magnitude(dsp::stft(tone, cfg));
    const double e1 = dsp::spectral_convergence(tm, dsp::griffin_lim(tm, 1, 16000));
    const double e60 = dsp::spectral_convergence(tm, dsp::griffin_lim(tm, 60, 16000));
    CHECK(e60 <= e1 + 1e-12);
}

TEST_CASE("pitch_shift: zero semitones is numerically the same signal") {
    dsp::Waveform w = make_wave(oracle::sine(330.0, 0.5, 16000), 16000);
    dsp::Waveform out = dsp::pitch_shift(w, 0.0);
    CHECK(oracle::correlation(w.samples, out.samples) > 0.999);
    CHECK(out.samples.size() == w.samples.size());
}

TEST_CASE("pitch_shift: +12 semitones doubles 440 to 880") {
    dsp::Waveform w = make_wave(oracle::sine(440.0, 1.0, 16000), 16000);
    dsp::Waveform out = dsp::pitch_shift(w, 12.0);
    CHECK(out.samples.size() == w.samples.size());
    const double freq = oracle::dominant_frequency_hz(out.samples, 16000);
    CHECK(std::fabs(freq - 880.0) <= oracle::bin_width_hz(out.samples, 16000));
}

TEST_CASE("pitch_shift: +4 semitones lands at 554.4 Hz") {
    dsp::Waveform w = make_wave(oracle::sine(440.0, 1.0, 16000), 16000);
    dsp::Waveform out = dsp::pitch_shift(w, 4.0);
    const double expected = 440.0 * std::exp2(4.0 / 12.0);
    const double freq = oracle::dominant_frequency_hz(out.samples, 16000);
    CHECK(std::fabs(freq - expected) <= oracle::bin_width_hz(out.samples, 16000));
}

TEST_CASE("pitch_shift: up then down recovers the dominant bin exactly") {
    dsp::Waveform w = make_wave(oracle::sine(392.0, 1.0, 16000), 16000);
    dsp::Waveform round = dsp::pitch_shift(dsp::pitch_shift(w, 3.0), -3.0);
    const double f0 = oracle::dominant_frequency_hz(w.samples, 16000);
    const double f1 = oracle::dominant_frequency_hz(round.samples, 16000);
    CHECK(f0 == f1); // same analysis length, same bin
}

TEST_CASE("pitch_shift: guard on the semitone range") {
    dsp::Waveform w = make_wave(oracle::sine(440.0, 0.2, 16000), 16000);
    CHECK_THROWS_AS(dsp::pitch_shift(w, 12.5), Error);
}

TEST_CASE("hz/midi conversions") {
    CHECK(dsp::hz_to_midi(440.0) == doctest::Approx(69.0).epsilon(1e-12));
    CHECK(dsp::hz_to_midi(880.0) == doctest::Approx(81.0).epsilon(1e-12));
    CHECK(dsp::midi_to_hz(dsp::hz_to_midi(261.6)) == doctest::Approx(261.6).epsilon(1e-11));
    CHECK_THROWS_AS(dsp::hz_to_midi(0.0), Error);
    CHECK_THROWS_AS(dsp::hz_to_midi(-5.0), Error);
}

TEST_CASE("stft/istft are safe under concurrent callers") {
    dsp::Waveform w = make_wave(oracle::white_noise(8000, 41), 16000);
    dsp::StftConfig cfg = small_config();
    std::vector<std::thread> workers;
    std::atomic<int> failures{0};
    for (int k = 0; k < 4; ++k) {
        workers.emplace_back([&w, cfg, &failures]() {
            for (int rep = 0; rep < 5; ++rep) {
                dsp::Waveform back = dsp::istft(dsp::stft(w, cfg), 16000);
                for (size_t i = 256; i + 256 < w.samples.size(); i += 97)
                    if (std::fabs(back.samples[i] - w.samples[i]) > 1e-6) failures++;
            }
        });
    }
    for (auto& t : workers) t.join();
    CHECK(failures.load() == 0);
}

TEST_CASE("wav: pcm16 and float32 round trips, stereo averaging") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "umss_wav_test";
    fs::create_directories(dir);

    dsp::Waveform w = make_wave(oracle::sine(440.0, 0.1, 16000, 0.8), 16000);
    const std::string f32 = (dir / "f32.wav").string();
    dsp::write_wav(f32, w, dsp::WavFormat::Float32);
    dsp::Waveform r32 = dsp::read_wav(f32);
    REQUIRE(r32.samples.size() == w.samples.size());
    CHECK(r32.sample_rate == 16000);
    for (size_t i = 0; i < w.samples.size(); ++i)
        CHECK(std::fabs(r32.samples[i] - w.samples[i]) < 1e-6);

    const std::string p16 = (dir / "p16.wav").string();
    dsp::write_wav(p16, w, dsp::WavFormat::Pcm16);
    dsp::Waveform r16 = dsp::read_wav(p16);
    for (size_t i = 0; i < w.samples.size(); ++i)
        CHECK(std::fabs(r16.samples[i] - w.samples[i]) < 1.0 / 32000.0);

    // Hand-built stereo pcm16 file: L = 0.5, R = -0.25 -> mono 0.125.
    const std::string stereo = (dir / "stereo.wav").string();
    {
        std::ofstream out(stereo, std::ios::binary);
        auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
        auto u16 = [&](uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
        out.write("RIFF", 4);
        u32(36 + 16);
        out.write("WAVE", 4);
        out.write("fmt ", 4);
        u32(16);
        u16(1);
        u16(2);
        u32(16000);
        u32(16000 * 4);
        u16(4);
        u16(16);
        out.write("data", 4);
        u32(16);
        for (int i = 0; i < 4; ++i) {
            int16_t l = 16384, r = -8192;
            out.write(reinterpret_cast<const char*>(&l), 2);
            out.write(reinterpret_cast<const char*>(&r), 2);
        }
    }
    dsp::Waveform mono = dsp::read_wav(stereo);
    REQUIRE(mono.samples.size() == 4);
    for (double v : mono.samples) CHECK(v == doctest::Approx(0.125).epsilon(1e-3));
}
