#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "umss/data/note_events.hpp"
#include "umss/dsp/wav.hpp"

namespace umss::data {

struct Track {
    std::string id;         // relative path of the stem inside the dataset root
    std::string instrument; // label parsed from the AuSep file name
    dsp::Waveform audio;
    std::vector<NoteEvent> notes;
    bool seen = false;      // instrument group per the manifest
};

// Structured split description stored at <root>/manifest.json. Editable;
// the loader treats it as the source of truth for seen/unseen groups and
// for which tracks are reserved for testing.
struct Manifest {
    std::map<std::string, std::string> instruments; // label -> "seen" | "unseen"
    std::vector<std::string> test_tracks;           // track ids reserved for testing
    std::map<std::string, std::string> checksums;   // track id -> fnv1a64 hex

    bool is_seen(const std::string& instr) const;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& m);

// Scans <root>/<piece>/AuSep_*_<instr>_*.wav with sibling Notes_*.txt,
// resampling audio to target_rate when needed.
std::vector<Track> load_tracks(const std::string& root, const Manifest& manifest,
                               int target_rate);

struct DatasetSplit {
    std::vector<Track> train; // seen instruments only
    std::vector<Track> test;  // held-out tracks, seen and unseen instruments
};

DatasetSplit split_dataset(std::vector<Track> tracks, const Manifest& manifest);

// FNV-1a over the file bytes; manifest checksum entries use this.
std::string file_checksum(const std::string& path);

// Builds a manifest for a dataset directory. Instruments already in
// `seen_labels` become seen; everything else unseen. A fraction of each
// seen instrument's tracks plus all unseen tracks go to test_tracks.
Manifest build_manifest(const std::string& root, const std::vector<std::string>& seen_labels,
                        double test_fraction, uint64_t seed);

// Verifies every checksum recorded in the manifest; throws on mismatch.
void verify_checksums(const std::string& root, const Manifest& manifest);

// URMP's 13 monophonic instrument labels, and the default 8-seen split the
// prepare command writes (editable in the manifest afterwards).
const std::vector<std::string>& urmp_instruments();
const std::vector<std::string>& urmp_default_seen();

} // namespace umss::data
