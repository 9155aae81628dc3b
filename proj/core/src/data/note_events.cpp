#include "umss/data/note_events.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "umss/dsp/pitch.hpp"

namespace umss::data {

int MidiRoll::argmax_row(int t) const {
    const double* row = values.data() + static_cast<size_t>(t) * kClasses;
    int best = 0;
    for (int n = 1; n < kClasses; ++n)
        if (row[n] > row[best]) best = n;
    return best;
}

bool MidiRoll::rows_one_hot() const {
    for (int t = 0; t < frames; ++t) {
        int ones = 0;
        for (int n = 0; n < kClasses; ++n) {
            const double v = at(t, n);
            if (v == 1.0)
                ++ones;
            else if (v != 0.0)
                return false;
        }
        if (ones != 1) return false;
    }
    return true;
}

std::vector<NoteEvent> parse_annotation_lines(const std::vector<std::string>& lines,
                                              const std::string& origin) {
    std::vector<NoteEvent> events;
    for (size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream is(line);
        NoteEvent e;
        if (!(is >> e.onset >> e.frequency >> e.duration)) {
            throw Error(origin + ":" + std::to_string(i + 1) + ": malformed note line: " + line);
        }
        std::string extra;
        if (is >> extra) {
            throw Error(origin + ":" + std::to_string(i + 1) +
                        ": expected 3 columns (onset freq duration): " + line);
        }
        require(e.onset >= 0.0, origin + ":" + std::to_string(i + 1) + ": negative onset");
        require(e.frequency > 0.0, origin + ":" + std::to_string(i + 1) + ": non-positive frequency");
        require(e.duration > 0.0, origin + ":" + std::to_string(i + 1) + ": non-positive duration");
        events.push_back(e);
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const NoteEvent& a, const NoteEvent& b) { return a.onset < b.onset; });
    // Monophonic tracks: a note ends no later than the next one starts.
    std::vector<NoteEvent> out;
    for (size_t i = 0; i < events.size(); ++i) {
        NoteEvent e = events[i];
        if (i + 1 < events.size()) {
            const double next_onset = events[i + 1].onset;
            if (e.onset + e.duration > next_onset) e.duration = next_onset - e.onset;
        }
        if (e.duration > 0.0) out.push_back(e);
    }
    return out;
}

std::vector<NoteEvent> parse_annotations(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open annotation file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return parse_annotation_lines(lines, path);
}

MidiRoll notes_to_roll(const std::vector<NoteEvent>& events, int frames, double hop_seconds,
                       int* clamped) {
    require(hop_seconds > 0.0, "notes_to_roll: hop must be positive");
    require(frames >= 0, "notes_to_roll: negative frame count");
    MidiRoll roll(frames);
    for (int t = 0; t < frames; ++t) roll.at(t, MidiRoll::kSilence) = 1.0;
    int n_clamped = 0;
    for (const NoteEvent& e : events) {
        int note = static_cast<int>(std::lround(dsp::hz_to_midi(e.frequency)));
        if (note < dsp::kMidiLow || note > dsp::kMidiHigh) {
            note = std::clamp(note, dsp::kMidiLow, dsp::kMidiHigh);
            ++n_clamped;
        }
        const int index = note - dsp::kMidiLow;
        const int t0 = static_cast<int>(std::ceil(e.onset / hop_seconds - 1e-9));
        const int t1 = static_cast<int>(std::ceil((e.onset + e.duration) / hop_seconds - 1e-9));
        for (int t = std::max(t0, 0); t < std::min(t1, frames); ++t) {
            for (int n = 0; n < MidiRoll::kClasses; ++n) roll.at(t, n) = 0.0;
            roll.at(t, index) = 1.0;
        }
    }
    if (clamped)
        *clamped = n_clamped;
    else if (n_clamped > 0)
        std::cerr << "notes_to_roll: clamped " << n_clamped << " event(s) outside MIDI 21..108\n";
    return roll;
}

std::vector<NoteEvent> roll_to_notes(const MidiRoll& roll, double hop_seconds) {
    require(hop_seconds > 0.0, "roll_to_notes: hop must be positive");
    std::vector<NoteEvent> events;
    int t = 0;
    while (t < roll.frames) {
        const int cls = roll.argmax_row(t);
        int end = t + 1;
        while (end < roll.frames && roll.argmax_row(end) == cls) ++end;
        if (cls != MidiRoll::kSilence) {
            NoteEvent e;
            e.onset = t * hop_seconds;
            e.duration = (end - t) * hop_seconds;
            e.frequency = dsp::midi_to_hz(cls + dsp::kMidiLow);
            events.push_back(e);
        }
        t = end;
    }
    return events;
}

void write_annotations(const std::string& path, const std::vector<NoteEvent>& events) {
    std::ofstream out(path);
    require(out.good(), "cannot write annotation file: " + path);
    out.setf(std::ios::fixed);
    out.precision(6);
    for (const NoteEvent& e : events)
        out << e.onset << "\t" << e.frequency << "\t" << e.duration << "\n";
}

} // namespace umss::data
