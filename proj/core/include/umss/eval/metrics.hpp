#pragma once

#include <vector>

#include "umss/data/note_events.hpp"
#include "umss/dsp/stft.hpp"

namespace umss::eval {

inline constexpr double kSdrCapDb = 60.0;

// Scale-invariant SDR: the estimate is projected onto the reference and the
// ratio of projection to residual energy is reported in dB, capped at 60.
double sdr_db(const std::vector<double>& reference, const std::vector<double>& estimate);

// Micro-averaged frame precision of argmax predictions over all 89 classes
// (single-label frames, silence included).
double frame_precision(const data::MidiRoll& truth, const data::MidiRoll& pred);

struct PolyphonyOptions {
    int max_voices = 4;
    int harmonics = 6;
    double score_threshold = 0.20; // of remaining frame energy
    double energy_floor = 1e-6;    // of the spectrogram peak energy
};

// Greedy harmonic-comb detector; counts distinct pitch stacks in one frame.
int multi_pitch_count(const dsp::MagSpectrogram& spec, int frame, int sample_rate,
                      const PolyphonyOptions& opt = {});

// Fraction of non-silent frames carrying two or more simultaneous pitches.
double polyphony_rate(const dsp::MagSpectrogram& spec, int sample_rate,
                      const PolyphonyOptions& opt = {});

} // namespace umss::eval
