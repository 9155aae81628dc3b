#pragma once

#include <map>
#include <optional>

#include "umss/data/sampler.hpp"
#include "umss/eval/metrics.hpp"
#include "umss/model/checkpoint.hpp"

namespace umss::eval {

struct PairResult {
    std::optional<double> sdr;       // absent when the variant lacks a decoder
    std::optional<double> precision; // absent when it lacks a transcriptor
    bool seen = false;
    std::string instrument;
};

struct Aggregate {
    double mean = 0.0;
    double ci_half = 0.0; // 1.96 * sd / sqrt(n) over checkpoint-level averages
    int checkpoints = 0;
};

struct InstrumentRow {
    std::optional<double> sdr;
    std::optional<double> precision;
    int pair_count = 0;
    bool seen = false;
};

struct EvalReport {
    std::string variant;
    std::vector<std::vector<PairResult>> per_checkpoint; // [checkpoint][pair]
    std::optional<Aggregate> sdr_seen, sdr_unseen, sdr_overall;
    std::optional<Aggregate> prec_seen, prec_unseen, prec_overall;
    std::map<std::string, InstrumentRow> per_instrument;
    int pairs_seen = 0, pairs_unseen = 0;
};

// Separated audio for one pair: magnitude from the model, phase from the
// mixture. Returns the estimate plus the predicted roll when available.
struct SeparationOutput {
    std::optional<dsp::Waveform> audio;
    std::optional<data::MidiRoll> roll;
    dsp::MagSpectrogram predicted_mag; // denormalized, empty when no decoder
};

SeparationOutput run_separation(model::Model& m, const model::PipelineConfig& cfg,
                                const dsp::Waveform& mixture, const dsp::Waveform& query,
                                const data::MidiRoll* external_score = nullptr);

// Micro-averages per checkpoint, with the 95% CI taken across the
// checkpoint-level aggregates.
EvalReport evaluate(const std::vector<std::string>& checkpoint_paths,
                    const std::vector<data::TestPair>& pairs);

void write_report(const std::string& dir, const EvalReport& report);

// Recomputes aggregates from the stored per-pair values; used to check the
// report is internally consistent.
std::optional<Aggregate> recompute_sdr_overall(const EvalReport& report);

} // namespace umss::eval
