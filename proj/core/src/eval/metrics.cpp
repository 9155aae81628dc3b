#include "umss/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "umss/dsp/pitch.hpp"

namespace umss::eval {

double sdr_db(const std::vector<double>& reference, const std::vector<double>& estimate) {
    require(reference.size() == estimate.size(), "sdr: length mismatch");
    require(!reference.empty(), "sdr: empty signals");
    double dot = 0.0, ref_energy = 0.0;
    for (size_t i = 0; i < reference.size(); ++i) {
        dot += reference[i] * estimate[i];
        ref_energy += reference[i] * reference[i];
    }
    require(ref_energy > 0.0, "undefined SDR: reference is all-zero");
    const double coef = dot / ref_energy;
    double target_energy = 0.0, noise_energy = 0.0;
    for (size_t i = 0; i < reference.size(); ++i) {
        const double t = coef * reference[i];
        const double n = estimate[i] - t;
        target_energy += t * t;
        noise_energy += n * n;
    }
    if (noise_energy <= 0.0 || target_energy <= 0.0) {
        // Zero residual caps; zero projection floors at the cap's negative.
        return target_energy > 0.0 ? kSdrCapDb : -kSdrCapDb;
    }
    return std::min(10.0 * std::log10(target_energy / noise_energy), kSdrCapDb);
}

double frame_precision(const data::MidiRoll& truth, const data::MidiRoll& pred) {
    require(truth.frames == pred.frames, "precision: frame count mismatch");
    require(truth.frames > 0, "precision: empty rolls");
    int correct = 0;
    for (int t = 0; t < truth.frames; ++t)
        if (truth.argmax_row(t) == pred.argmax_row(t)) ++correct;
    return static_cast<double>(correct) / truth.frames;
}

namespace {

double comb_score(const std::vector<double>& power, int bins, double f0, int n_fft,
                  int sample_rate, int harmonics) {
    double score = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
        const double f = f0 * h;
        const int bin = static_cast<int>(std::lround(f * n_fft / sample_rate));
        if (bin < 1 || bin >= bins - 1) break;
        score += std::max({power[static_cast<size_t>(bin - 1)], power[static_cast<size_t>(bin)],
                           power[static_cast<size_t>(bin + 1)]});
    }
    return score;
}

void remove_comb(std::vector<double>& power, int bins, double f0, int n_fft, int sample_rate,
                 int harmonics) {
    for (int h = 1; h <= harmonics; ++h) {
        const double f = f0 * h;
        const int bin = static_cast<int>(std::lround(f * n_fft / sample_rate));
        for (int d = -2; d <= 2; ++d) {
            const int idx = bin + d;
            if (idx >= 0 && idx < bins) power[static_cast<size_t>(idx)] = 0.0;
        }
    }
}

} // namespace

int multi_pitch_count(const dsp::MagSpectrogram& spec, int frame, int sample_rate,
                      const PolyphonyOptions& opt) {
    require(frame >= 0 && frame < spec.frames, "multi_pitch_count: frame out of range");
    const int bins = spec.bins;
    std::vector<double> power(static_cast<size_t>(bins));
    double frame_energy = 0.0;
    for (int f = 0; f < bins; ++f) {
        const double m = spec.at(frame, f);
        power[static_cast<size_t>(f)] = m * m;
        frame_energy += m * m;
    }
    const double peak = spec.max_value();
    if (frame_energy < opt.energy_floor * peak * peak) return 0;

    int count = 0;
    const int n_fft = spec.config.n_fft;
    for (int voice = 0; voice < opt.max_voices; ++voice) {
        double best_score = 0.0;
        int best_note = -1;
        for (int note = dsp::kMidiLow; note <= dsp::kMidiHigh; ++note) {
            const double f0 = dsp::midi_to_hz(note);
            if (f0 * 2.0 > 0.5 * sample_rate) break;
            const double s = comb_score(power, bins, f0, n_fft, sample_rate, opt.harmonics);
            if (s > best_score) {
                best_score = s;
                best_note = note;
            }
        }
        double remaining = 0.0;
        for (double p : power) remaining += p;
        if (best_note < 0 || best_score < opt.score_threshold * remaining ||
            best_score < opt.energy_floor * peak * peak)
            break;
        ++count;
        remove_comb(power, bins, dsp::midi_to_hz(best_note), n_fft, sample_rate, opt.harmonics);
    }
    return count;
}

double polyphony_rate(const dsp::MagSpectrogram& spec, int sample_rate,
                      const PolyphonyOptions& opt) {
    int active = 0, poly = 0;
    for (int t = 0; t < spec.frames; ++t) {
        const int n = multi_pitch_count(spec, t, sample_rate, opt);
        if (n >= 1) ++active;
        if (n >= 2) ++poly;
    }
    return active > 0 ? static_cast<double>(poly) / active : 0.0;
}

} // namespace umss::eval
