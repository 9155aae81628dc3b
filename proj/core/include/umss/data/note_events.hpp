#pragma once

#include <string>
#include <vector>

#include "umss/common.hpp"

namespace umss::data {

struct NoteEvent {
    double onset = 0.0;    // seconds
    double frequency = 0.0; // Hz
    double duration = 0.0; // seconds
};

// Frame-wise note matrix, 88 piano notes plus a silence state. Ground-truth
// rolls are one-hot per frame; model outputs hold row-stochastic
// probabilities in the same layout.
struct MidiRoll {
    static constexpr int kClasses = 89;
    static constexpr int kSilence = 88; // indices 0..87 map to MIDI 21..108

    int frames = 0;
    std::vector<double> values; // [frames x kClasses]

    MidiRoll() = default;
    explicit MidiRoll(int n_frames)
        : frames(n_frames), values(static_cast<size_t>(n_frames) * kClasses, 0.0) {}

    double& at(int t, int n) { return values[static_cast<size_t>(t) * kClasses + n]; }
    double at(int t, int n) const { return values[static_cast<size_t>(t) * kClasses + n]; }
    int argmax_row(int t) const;
    bool rows_one_hot() const;
};

// Parses whitespace-separated "onset_sec freq_hz duration_sec" lines.
// Events come back sorted by onset; overlapping notes in a monophonic
// track are truncated at the next onset.
std::vector<NoteEvent> parse_annotations(const std::string& path);
std::vector<NoteEvent> parse_annotation_lines(const std::vector<std::string>& lines,
                                              const std::string& origin);

// Frame t takes the class of the event covering time t*hop; silence
// elsewhere. Pitches outside MIDI 21..108 are clamped (counted via
// *clamped when given).
MidiRoll notes_to_roll(const std::vector<NoteEvent>& events, int frames, double hop_seconds,
                       int* clamped = nullptr);

// Inverse of notes_to_roll on one-hot rolls: merge runs of equal classes.
std::vector<NoteEvent> roll_to_notes(const MidiRoll& roll, double hop_seconds);

void write_annotations(const std::string& path, const std::vector<NoteEvent>& events);

} // namespace umss::data
