#include "umss/data/toy.hpp"

#include <cmath>
#include <filesystem>

#include "umss/dsp/pitch.hpp"

namespace fs = std::filesystem;

namespace umss::data {

namespace {

struct TimbreDef {
    // Relative amplitude of harmonic h (1-based); zero to skip.
    double (*harmonic)(int h);
    double attack_seconds;
    double release_seconds;
};

double h_sine(int h) { return h == 1 ? 1.0 : 0.0; }
double h_saw(int h) { return 1.0 / h; }
double h_square(int h) { return (h % 2 == 1) ? 1.0 / h : 0.0; }
double h_triangle(int h) {
    if (h % 2 == 0) return 0.0;
    const double a = 1.0 / (static_cast<double>(h) * h);
    return ((h - 1) / 2) % 2 == 0 ? a : -a;
}

TimbreDef timbre_def(const std::string& name) {
    if (name == "sine") return {h_sine, 0.010, 0.050};
    if (name == "sawtooth") return {h_saw, 0.005, 0.080};
    if (name == "square") return {h_square, 0.020, 0.040};
    if (name == "triangle") return {h_triangle, 0.015, 0.060};
    throw Error("unknown toy timbre: " + name);
}

double envelope(double t, double dur, const TimbreDef& def) {
    double e = 1.0;
    if (t < def.attack_seconds) e = t / def.attack_seconds;
    const double tail = dur - t;
    if (tail < def.release_seconds) e = std::min(e, tail / def.release_seconds);
    return std::max(e, 0.0);
}

std::vector<NoteEvent> random_score(const ToySpec& spec, Rng& rng) {
    std::vector<NoteEvent> notes;
    double t = 0.05;
    while (t < spec.track_seconds - spec.note_min_seconds - 0.05) {
        NoteEvent e;
        e.onset = t;
        e.duration = rng.uniform(spec.note_min_seconds, spec.note_max_seconds);
        e.duration = std::min(e.duration, spec.track_seconds - 0.05 - t);
        const int midi = static_cast<int>(rng.uniform_int(spec.midi_low, spec.midi_high));
        e.frequency = dsp::midi_to_hz(midi);
        notes.push_back(e);
        t += e.duration;
        if (rng.uniform() < spec.gap_probability)
            t += rng.uniform(spec.gap_min_seconds, spec.gap_max_seconds);
    }
    return notes;
}

} // namespace

dsp::Waveform render_toy_notes(const std::string& timbre, const std::vector<NoteEvent>& notes,
                               double seconds, int sample_rate, double amplitude) {
    const TimbreDef def = timbre_def(timbre);
    dsp::Waveform w;
    w.sample_rate = sample_rate;
    w.samples.assign(static_cast<size_t>(seconds * sample_rate), 0.0);
    const double nyquist_guard = 0.45 * sample_rate;

    for (const NoteEvent& note : notes) {
        const int64_t start = static_cast<int64_t>(note.onset * sample_rate);
        const int64_t count = static_cast<int64_t>(note.duration * sample_rate);
        // Energy normalization keeps per-partial loudness comparable across
        // timbres; a sum-of-amplitudes norm leaves rich spectra much quieter
        // per partial than a pure tone.
        double norm = 0.0;
        for (int h = 1; h * note.frequency < nyquist_guard && h <= 24; ++h)
            norm += def.harmonic(h) * def.harmonic(h);
        if (norm <= 0.0) continue;
        norm = std::sqrt(norm);
        for (int64_t i = 0; i < count; ++i) {
            const int64_t idx = start + i;
            if (idx < 0 || idx >= static_cast<int64_t>(w.samples.size())) continue;
            const double t = static_cast<double>(i) / sample_rate;
            double v = 0.0;
            for (int h = 1; h * note.frequency < nyquist_guard && h <= 24; ++h) {
                const double a = def.harmonic(h);
                if (a == 0.0) continue;
                v += a * std::sin(2.0 * M_PI * note.frequency * h * t);
            }
            w.samples[static_cast<size_t>(idx)] +=
                amplitude * envelope(t, note.duration, def) * v / norm;
        }
    }
    return w;
}

std::vector<Track> synth_toy_dataset(const ToySpec& spec) {
    require(spec.timbres.size() >= 2, "toy dataset needs at least 2 timbres");
    require(spec.sample_rate > 0 && spec.track_seconds > 0.5, "bad toy spec");
    Rng rng(spec.seed);
    std::vector<Track> tracks;
    for (size_t ti = 0; ti < spec.timbres.size(); ++ti) {
        for (int k = 0; k < spec.tracks_per_timbre; ++k) {
            Track t;
            t.instrument = spec.timbres[ti];
            t.id = "piece" + std::to_string(ti * spec.tracks_per_timbre + k + 1) + "/AuSep_1_" +
                   t.instrument + "_" + std::to_string(k + 1) + ".wav";
            t.notes = random_score(spec, rng);
            t.audio = render_toy_notes(t.instrument, t.notes, spec.track_seconds,
                                       spec.sample_rate, spec.amplitude);
            tracks.push_back(std::move(t));
        }
    }
    return tracks;
}

void write_toy_dataset(const std::string& root, const ToySpec& spec, int seen_count) {
    require(seen_count >= 1 && seen_count <= static_cast<int>(spec.timbres.size()),
            "seen_count out of range");
    std::vector<Track> tracks = synth_toy_dataset(spec);
    fs::create_directories(root);
    for (const Track& t : tracks) {
        const fs::path wav_path = fs::path(root) / t.id;
        fs::create_directories(wav_path.parent_path());
        dsp::write_wav(wav_path.string(), t.audio, dsp::WavFormat::Float32);
        std::string notes_name = wav_path.filename().string();
        notes_name.replace(0, 5, "Notes");
        fs::path notes_path = wav_path.parent_path() / notes_name;
        notes_path.replace_extension(".txt");
        write_annotations(notes_path.string(), t.notes);
    }
    Manifest m;
    for (size_t i = 0; i < spec.timbres.size(); ++i)
        m.instruments[spec.timbres[i]] = static_cast<int>(i) < seen_count ? "seen" : "unseen";
    // Unseen tracks are test-only; when a seen timbre has several tracks its
    // last one is held out so the test split mixes both groups.
    std::map<std::string, int> per_timbre;
    for (const Track& t : tracks) per_timbre[t.instrument]++;
    std::map<std::string, int> counter;
    for (const Track& t : tracks) {
        const int idx = counter[t.instrument]++;
        const bool holdout = !m.is_seen(t.instrument) ||
                             (per_timbre[t.instrument] >= 2 && idx == per_timbre[t.instrument] - 1);
        if (holdout) m.test_tracks.push_back(t.id);
        m.checksums[t.id] = file_checksum((fs::path(root) / t.id).string());
    }
    write_manifest((fs::path(root) / "manifest.json").string(), m);
}

} // namespace umss::data
