#include "umss/eval/evaluate.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace umss::eval {

SeparationOutput run_separation(model::Model& m, const model::PipelineConfig& cfg,
                                const dsp::Waveform& mixture, const dsp::Waveform& query,
                                const data::MidiRoll* external_score) {
    require(mixture.sample_rate == cfg.sample_rate && query.sample_rate == cfg.sample_rate,
            "separation inputs must match the pipeline sample rate");
    dsp::ComplexSpectrogram mix_complex = dsp::stft(mixture, cfg.stft);
    dsp::MagSpectrogram mix_mag = dsp::magnitude(mix_complex);
    const double scale = std::max(mix_mag.max_value(), 1e-9);

    dsp::MagSpectrogram query_mag = dsp::magnitude(dsp::stft(query, cfg.stft));
    const double query_scale = std::max(query_mag.max_value(), 1e-9);

    const double power = cfg.model.mag_power;
    nn::Var mix_var = nn::make_constant(model::stack_spectrograms({&mix_mag}, {scale}, power));
    nn::Var query_var =
        nn::make_constant(model::stack_spectrograms({&query_mag}, {query_scale}, power));
    nn::Var score;
    if (external_score) {
        require(external_score->frames == mix_mag.frames,
                "external score frame count must match the mixture spectrogram");
        score = nn::make_constant(model::stack_rolls({external_score}));
    }

    model::ForwardResult fwd = m.forward(mix_var, query_var, score, /*training=*/false);

    SeparationOutput out;
    if (fwd.roll) out.roll = model::roll_from_tensor(fwd.roll->value, 0);
    if (fwd.spec) {
        out.predicted_mag = model::spec_from_tensor(fwd.spec->value, 0, cfg.stft, scale,
                                                    mix_complex.length_hint, power);
        dsp::ComplexSpectrogram voiced = dsp::with_phase_of(out.predicted_mag, mix_complex);
        out.audio = dsp::istft(voiced, cfg.sample_rate);
    }
    return out;
}

namespace {

struct Welford {
    double sum = 0.0;
    int n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    std::optional<double> mean() const {
        if (n == 0) return std::nullopt;
        return sum / n;
    }
};

std::optional<Aggregate> aggregate_over_checkpoints(const std::vector<double>& values) {
    if (values.empty()) return std::nullopt;
    Aggregate a;
    a.checkpoints = static_cast<int>(values.size());
    double s = 0.0;
    for (double v : values) s += v;
    a.mean = s / values.size();
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        const double sd = std::sqrt(ss / (values.size() - 1));
        a.ci_half = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
    }
    return a;
}

enum class Partition { Seen, Unseen, Overall };

std::optional<Aggregate> collect(const EvalReport& r, bool want_sdr, Partition part) {
    std::vector<double> per_ckpt;
    for (const auto& ckpt : r.per_checkpoint) {
        Welford w;
        for (const PairResult& p : ckpt) {
            if (part == Partition::Seen && !p.seen) continue;
            if (part == Partition::Unseen && p.seen) continue;
            const auto& v = want_sdr ? p.sdr : p.precision;
            if (v) w.add(*v);
        }
        if (auto m = w.mean()) per_ckpt.push_back(*m);
    }
    return aggregate_over_checkpoints(per_ckpt);
}

} // namespace

EvalReport evaluate(const std::vector<std::string>& checkpoint_paths,
                    const std::vector<data::TestPair>& pairs) {
    require(!checkpoint_paths.empty(), "evaluate: no checkpoints given");
    require(!pairs.empty(), "evaluate: no test pairs given");

    EvalReport report;
    for (const std::string& path : checkpoint_paths) {
        model::PipelineConfig cfg;
        model::Model m = model::model_from_checkpoint(path, &cfg);
        report.variant = model::variant_name(cfg.model.variant);
        std::vector<PairResult> results;
        for (const data::TestPair& pair : pairs) {
            SeparationOutput out = run_separation(m, cfg, pair.mixture, pair.query);
            PairResult r;
            r.seen = pair.seen;
            r.instrument = pair.target_instrument;
            if (out.audio) {
                const size_t n = std::min(out.audio->samples.size(), pair.target.samples.size());
                std::vector<double> ref(pair.target.samples.begin(),
                                        pair.target.samples.begin() + static_cast<int64_t>(n));
                std::vector<double> est(out.audio->samples.begin(),
                                        out.audio->samples.begin() + static_cast<int64_t>(n));
                r.sdr = sdr_db(ref, est);
            }
            if (out.roll) {
                data::MidiRoll truth = pair.target_roll;
                require(truth.frames == out.roll->frames,
                        "evaluate: roll frame mismatch between data and model");
                r.precision = frame_precision(truth, *out.roll);
            }
            results.push_back(std::move(r));
        }
        report.per_checkpoint.push_back(std::move(results));
    }

    for (const data::TestPair& pair : pairs) (pair.seen ? report.pairs_seen : report.pairs_unseen)++;

    report.sdr_seen = collect(report, true, Partition::Seen);
    report.sdr_unseen = collect(report, true, Partition::Unseen);
    report.sdr_overall = collect(report, true, Partition::Overall);
    report.prec_seen = collect(report, false, Partition::Seen);
    report.prec_unseen = collect(report, false, Partition::Unseen);
    report.prec_overall = collect(report, false, Partition::Overall);

    // Instrument rows pool every checkpoint's pair results.
    std::map<std::string, std::pair<Welford, Welford>> rows;
    std::map<std::string, bool> seen_flag;
    std::map<std::string, int> counts;
    for (const auto& ckpt : report.per_checkpoint)
        for (const PairResult& p : ckpt) {
            if (p.sdr) rows[p.instrument].first.add(*p.sdr);
            if (p.precision) rows[p.instrument].second.add(*p.precision);
            seen_flag[p.instrument] = p.seen;
            counts[p.instrument]++;
        }
    for (auto& [name, w] : rows) {
        InstrumentRow row;
        row.sdr = w.first.mean();
        row.precision = w.second.mean();
        row.seen = seen_flag[name];
        row.pair_count = counts[name] / static_cast<int>(report.per_checkpoint.size());
        report.per_instrument[name] = row;
    }
    return report;
}

std::optional<Aggregate> recompute_sdr_overall(const EvalReport& report) {
    return collect(report, true, Partition::Overall);
}

namespace {

std::string fmt(const std::optional<Aggregate>& a) {
    if (!a) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f+-%.2f", a->mean, a->ci_half);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

} // namespace

void write_report(const std::string& dir, const EvalReport& report) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "pairs.tsv");
        require(out.good(), "cannot write pairs.tsv under " + dir);
        out << "checkpoint\tpair\tinstrument\tgroup\tsdr_db\tprecision\n";
        for (size_t c = 0; c < report.per_checkpoint.size(); ++c)
            for (size_t p = 0; p < report.per_checkpoint[c].size(); ++p) {
                const PairResult& r = report.per_checkpoint[c][p];
                out << c << "\t" << p << "\t" << r.instrument << "\t"
                    << (r.seen ? "seen" : "unseen") << "\t" << fmt_opt(r.sdr) << "\t"
                    << fmt_opt(r.precision) << "\n";
            }
    }
    {
        std::ofstream out(fs::path(dir) / "report.txt");
        require(out.good(), "cannot write report.txt under " + dir);
        out << "model: " << report.variant << "\n";
        out << "checkpoints: " << report.per_checkpoint.size() << "   pairs: "
            << (report.pairs_seen + report.pairs_unseen) << " (" << report.pairs_seen
            << " seen / " << report.pairs_unseen << " unseen)\n\n";
        out << "           Separation (SDR dB)    Transcription (precision)\n";
        out << "Seen       " << fmt(report.sdr_seen) << "    " << fmt(report.prec_seen) << "\n";
        out << "Unseen     " << fmt(report.sdr_unseen) << "    " << fmt(report.prec_unseen)
            << "\n";
        out << "Overall    " << fmt(report.sdr_overall) << "    " << fmt(report.prec_overall)
            << "\n\n";
        out << "Per instrument (pooled over checkpoints):\n";
        out << "instrument\tgroup\tpairs\tsdr_db\tprecision\n";
        for (const auto& [name, row] : report.per_instrument)
            out << name << "\t" << (row.seen ? "seen" : "unseen") << "\t" << row.pair_count
                << "\t" << fmt_opt(row.sdr) << "\t" << fmt_opt(row.precision) << "\n";
    }
}

} // namespace umss::eval
