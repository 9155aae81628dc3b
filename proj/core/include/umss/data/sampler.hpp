#pragma once

#include "umss/data/dataset.hpp"
#include "umss/rng.hpp"

namespace umss::data {

struct SamplerConfig {
    double segment_seconds = 4.0;
    double query_seconds = 4.0;
    int shift_range = 4;              // integer semitones, uniform in [-range, range]
    double hop_seconds = 0.010;       // roll frame hop
    double silence_rms = 1e-3;        // query-clip exclusion threshold
    double silence_window_seconds = 0.1;
    int max_query_attempts = 400;
    double min_target_rms = 1e-4;     // test pairs only: reject degenerate references
};

// One training example. mixture == target + interferer holds sample-wise and
// exactly; likewise shifted_mixture == shifted_target + interferer.
struct TrainingPair {
    dsp::Waveform target;
    dsp::Waveform interferer;
    dsp::Waveform mixture;
    dsp::Waveform shifted_target;
    dsp::Waveform shifted_mixture;
    std::vector<dsp::Waveform> query_clips; // 3 silence-free clips of the target instrument
    MidiRoll target_roll;
    std::string target_instrument;
    std::string interferer_instrument;
    int shift_semitones = 0;
};

struct TestPair {
    dsp::Waveform mixture;
    dsp::Waveform target;
    dsp::Waveform query;
    MidiRoll target_roll;
    std::string target_instrument;
    std::string interferer_instrument;
    bool seen = false;
};

class PairSampler {
public:
    PairSampler(const std::vector<Track>& tracks, SamplerConfig cfg);

    TrainingPair sample(Rng& rng) const;
    int instrument_count() const { return static_cast<int>(by_instrument_.size()); }

    // Silence-free clip of the given instrument (every silence_window has
    // RMS >= silence_rms).
    dsp::Waveform sample_query_clip(const std::string& instrument, Rng& rng) const;

private:
    struct Crop {
        const Track* track;
        size_t offset;
    };
    Crop random_crop(const std::string& instrument, size_t len, Rng& rng) const;
    MidiRoll crop_roll(const Track& track, size_t offset, size_t len) const;

    const std::vector<Track>* tracks_;
    SamplerConfig cfg_;
    std::map<std::string, std::vector<const Track*>> by_instrument_;
    std::vector<std::string> instruments_;
};

// Deterministic evaluation pairs: unshifted mixtures of two different
// instruments with a non-silent target reference.
std::vector<TestPair> make_test_pairs(const std::vector<Track>& test_tracks,
                                      const SamplerConfig& cfg, int count, Rng& rng);

} // namespace umss::data
