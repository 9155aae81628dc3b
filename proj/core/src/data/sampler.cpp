#include "umss/data/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "umss/dsp/pitch_shift.hpp"

namespace umss::data {

namespace {

dsp::Waveform crop_wave(const Track& track, size_t offset, size_t len) {
    dsp::Waveform w;
    w.sample_rate = track.audio.sample_rate;
    w.samples.assign(track.audio.samples.begin() + static_cast<int64_t>(offset),
                     track.audio.samples.begin() + static_cast<int64_t>(offset + len));
    return w;
}

dsp::Waveform sum_waves(const dsp::Waveform& a, const dsp::Waveform& b) {
    require(a.samples.size() == b.samples.size() && a.sample_rate == b.sample_rate,
            "cannot mix waveforms of different shapes");
    dsp::Waveform out;
    out.sample_rate = a.sample_rate;
    out.samples.resize(a.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) out.samples[i] = a.samples[i] + b.samples[i];
    return out;
}

void scale_in_place(dsp::Waveform& w, double s) {
    for (double& v : w.samples) v *= s;
}

// Stems are snapped to the float32 grid before mixing: two float32 values
// always sum exactly in double arithmetic, so mixture - target - interferer
// is identically zero rather than ulp-sized noise.
void quantize_f32(dsp::Waveform& w) {
    for (double& v : w.samples) v = static_cast<double>(static_cast<float>(v));
}

bool clip_is_silence_free(const dsp::Waveform& w, double window_seconds, double threshold) {
    const size_t win = std::max<size_t>(1, static_cast<size_t>(window_seconds * w.sample_rate));
    for (size_t start = 0; start < w.samples.size(); start += win) {
        if (dsp::rms(w.samples, start, win) < threshold) return false;
    }
    return true;
}

} // namespace

PairSampler::PairSampler(const std::vector<Track>& tracks, SamplerConfig cfg)
    : tracks_(&tracks), cfg_(cfg) {
    for (const Track& t : tracks) by_instrument_[t.instrument].push_back(&t);
    for (const auto& [name, _] : by_instrument_) instruments_.push_back(name);
}

PairSampler::Crop PairSampler::random_crop(const std::string& instrument, size_t len,
                                           Rng& rng) const {
    const auto& pool = by_instrument_.at(instrument);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const Track* track =
            pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
        if (track->audio.samples.size() < len) continue;
        const size_t max_off = track->audio.samples.size() - len;
        return {track, static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(max_off)))};
    }
    throw Error("no track of instrument '" + instrument + "' is long enough for the segment");
}

MidiRoll PairSampler::crop_roll(const Track& track, size_t offset, size_t len) const {
    const double t0 = static_cast<double>(offset) / track.audio.sample_rate;
    std::vector<NoteEvent> shifted;
    for (const NoteEvent& e : track.notes) {
        NoteEvent s = e;
        s.onset -= t0;
        shifted.push_back(s);
    }
    const size_t hop = static_cast<size_t>(std::lround(cfg_.hop_seconds * track.audio.sample_rate));
    const int frames = 1 + static_cast<int>(len / hop); // matches centered stft framing
    int clamped = 0;
    return notes_to_roll(shifted, frames, cfg_.hop_seconds, &clamped);
}

dsp::Waveform PairSampler::sample_query_clip(const std::string& instrument, Rng& rng) const {
    const size_t sr = static_cast<size_t>(by_instrument_.at(instrument).front()->audio.sample_rate);
    const size_t len = static_cast<size_t>(cfg_.query_seconds * static_cast<double>(sr));
    for (int attempt = 0; attempt < cfg_.max_query_attempts; ++attempt) {
        Crop c = random_crop(instrument, len, rng);
        dsp::Waveform clip = crop_wave(*c.track, c.offset, len);
        if (clip_is_silence_free(clip, cfg_.silence_window_seconds, cfg_.silence_rms)) return clip;
    }
    throw Error("could not find a silence-free query clip for instrument '" + instrument + "'");
}

TrainingPair PairSampler::sample(Rng& rng) const {
    require(instruments_.size() >= 2, "need at least 2 instruments to build a training pair");

    TrainingPair pair;
    const int64_t ci = rng.uniform_int(0, static_cast<int64_t>(instruments_.size()) - 1);
    int64_t ii = rng.uniform_int(0, static_cast<int64_t>(instruments_.size()) - 2);
    if (ii >= ci) ++ii;
    pair.target_instrument = instruments_[static_cast<size_t>(ci)];
    pair.interferer_instrument = instruments_[static_cast<size_t>(ii)];

    const int sr = by_instrument_.at(pair.target_instrument).front()->audio.sample_rate;
    const size_t len = static_cast<size_t>(cfg_.segment_seconds * sr);

    Crop tc = random_crop(pair.target_instrument, len, rng);
    Crop icrop = random_crop(pair.interferer_instrument, len, rng);
    pair.target = crop_wave(*tc.track, tc.offset, len);
    pair.interferer = crop_wave(*icrop.track, icrop.offset, len);
    pair.target_roll = crop_roll(*tc.track, tc.offset, len);

    pair.shift_semitones =
        static_cast<int>(rng.uniform_int(-cfg_.shift_range, cfg_.shift_range));
    pair.shifted_target = pair.shift_semitones == 0
                              ? pair.target
                              : dsp::pitch_shift(pair.target, pair.shift_semitones);

    // Peak guard: rescale the stems first, then re-sum, so the additivity
    // invariants stay exact in floating point.
    double peak = 0.0;
    for (size_t i = 0; i < len; ++i) {
        peak = std::max(peak, std::fabs(pair.target.samples[i] + pair.interferer.samples[i]));
        peak = std::max(peak,
                        std::fabs(pair.shifted_target.samples[i] + pair.interferer.samples[i]));
    }
    if (peak > 1.0) {
        const double s = 1.0 / peak;
        scale_in_place(pair.target, s);
        scale_in_place(pair.interferer, s);
        scale_in_place(pair.shifted_target, s);
    }
    quantize_f32(pair.target);
    quantize_f32(pair.interferer);
    quantize_f32(pair.shifted_target);
    pair.mixture = sum_waves(pair.target, pair.interferer);
    pair.shifted_mixture = sum_waves(pair.shifted_target, pair.interferer);

    for (int k = 0; k < 3; ++k)
        pair.query_clips.push_back(sample_query_clip(pair.target_instrument, rng));
    return pair;
}

std::vector<TestPair> make_test_pairs(const std::vector<Track>& test_tracks,
                                      const SamplerConfig& cfg, int count, Rng& rng) {
    PairSampler sampler(test_tracks, cfg);
    require(sampler.instrument_count() >= 2,
            "need at least 2 instruments in the test set to build pairs");
    SamplerConfig unshifted = cfg;
    unshifted.shift_range = 0;
    PairSampler base(test_tracks, unshifted);

    std::vector<TestPair> pairs;
    int guard = 0;
    while (static_cast<int>(pairs.size()) < count) {
        require(++guard < count * 100 + 1000, "could not assemble non-silent test pairs");
        TrainingPair tp = base.sample(rng);
        // SDR needs a non-degenerate reference.
        if (dsp::rms(tp.target.samples, 0, tp.target.samples.size()) < cfg.min_target_rms)
            continue;
        TestPair t;
        t.mixture = std::move(tp.mixture);
        t.target = std::move(tp.target);
        t.query = tp.query_clips.front();
        t.target_roll = std::move(tp.target_roll);
        t.target_instrument = tp.target_instrument;
        t.interferer_instrument = tp.interferer_instrument;
        bool seen = false;
        for (const Track& tr : test_tracks)
            if (tr.instrument == t.target_instrument) {
                seen = tr.seen;
                break;
            }
        t.seen = seen;
        pairs.push_back(std::move(t));
    }
    return pairs;
}

} // namespace umss::data
