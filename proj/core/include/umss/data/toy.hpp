#pragma once

#include "umss/data/dataset.hpp"
#include "umss/rng.hpp"

namespace umss::data {

// Additive-synthesis instruments with distinct harmonic rolloffs and
// envelopes. Scores are random monophonic sequences, so ground truth
// is exact by construction.
struct ToySpec {
    std::vector<std::string> timbres = {"sine", "sawtooth"}; // of: sine sawtooth square triangle
    int tracks_per_timbre = 2;
    double track_seconds = 8.0;
    int sample_rate = 16000;
    int midi_low = 55;
    int midi_high = 79;
    double note_min_seconds = 0.3;
    double note_max_seconds = 0.8;
    double gap_probability = 0.25;
    double gap_min_seconds = 0.1;
    double gap_max_seconds = 0.3;
    double amplitude = 0.25;
    uint64_t seed = 20210901;
};

// Renders one note sequence with the named timbre.
dsp::Waveform render_toy_notes(const std::string& timbre, const std::vector<NoteEvent>& notes,
                               double seconds, int sample_rate, double amplitude);

std::vector<Track> synth_toy_dataset(const ToySpec& spec);

// Writes the URMP-style layout (<root>/<piece>/AuSep_... + Notes_...) plus
// a manifest marking the first `seen_count` timbres as seen.
void write_toy_dataset(const std::string& root, const ToySpec& spec, int seen_count);

} // namespace umss::data
