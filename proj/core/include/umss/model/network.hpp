#pragma once

#include "umss/data/note_events.hpp"
#include "umss/model/config.hpp"
#include "umss/nn/modules.hpp"

namespace umss::model {

struct EncoderFeatures {
    std::vector<nn::Var> skips; // one per level, time length preserved
    nn::Var bottleneck;
};

// Per-level FiLM coefficients derived from the pitch representation.
struct PitchModulation {
    std::vector<nn::Var> gamma; // [N,T,C_l]
    std::vector<nn::Var> beta;
    nn::Var gamma_bottleneck;
    nn::Var beta_bottleneck;
};

struct ForwardResult {
    nn::Var query_embedding;      // [N,M]
    nn::Var roll;                 // [N,T,89] row-stochastic; null for mss_only
    nn::Var pitch;                // [N,T,K]; null without disentanglement
    std::vector<nn::Var> timbre;  // per level, bottleneck last; empty without disentanglement
    nn::Var spec;                 // [N,1,T,F] nonnegative; null for amt_only
};

// The query-conditioned encoder/decoder family. One instance holds the
// parameters for a single variant; msi and msi_dis allocate identical
// parameter inventories and differ only in wiring and objective.
class Model {
public:
    Model(ModelConfig cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }

    // query_spec: [N,1,Tq,F], needs Tq >= 4. Returns [N,M] in [-1,1].
    nn::Var embed_query(const nn::Var& query_spec, bool training);
    // mix_spec: [N,1,T,F]; FiLM from q at every encoder block.
    EncoderFeatures encode(const nn::Var& mix_spec, const nn::Var& q, bool training);
    nn::Var transcribe(const EncoderFeatures& enc, bool training);
    // p[t] = sum_n roll[t,n] * codebook[n]; accepts predictions or one-hot scores.
    nn::Var pitch_rep(const nn::Var& roll);
    PitchModulation project_pitch(const nn::Var& pitch);
    nn::Var timbre_of_skip(int level, const nn::Var& skip);
    nn::Var timbre_of_bottleneck(const nn::Var& bottleneck);
    // z = gamma (*) ti + beta broadcast over frequency.
    static nn::Var entangle(const nn::Var& ti, const nn::Var& gamma, const nn::Var& beta);
    nn::Var decode(const nn::Var& seed, const std::vector<nn::Var>& skips, bool training);

    // Variant wiring for the decoder input: bottleneck-only entanglement for
    // msi (ordinary skips), per-skip entanglement for msi_dis.
    nn::Var decode_entangled(const PitchModulation& mod, const EncoderFeatures& enc,
                             bool training, std::vector<nn::Var>* timbre_out = nullptr);

    ForwardResult forward(const nn::Var& mix_spec, const nn::Var& query_spec,
                          const nn::Var& external_roll, bool training);

private:
    struct FilmMap {
        nn::Linear hidden_g, hidden_b; // used when film_rank > 0
        nn::Linear to_gamma, to_beta;
        bool low_rank = false;
    };
    FilmMap make_film(const std::string& name, int channels, Rng& rng);
    nn::Var apply_film(const FilmMap& f, const nn::Var& x, const nn::Var& q);

    ModelConfig cfg_;
    nn::ParamStore store_;

    std::vector<nn::Conv2d> q_conv_;
    std::vector<nn::BatchNorm2d> q_bn_;
    nn::Linear q_fc_;

    std::vector<nn::Conv2d> enc_conv_;
    std::vector<nn::BatchNorm2d> enc_bn_;
    std::vector<FilmMap> enc_film_;
    nn::Conv2d bott_conv_;
    nn::BatchNorm2d bott_bn_;
    FilmMap bott_film_;

    std::vector<nn::Conv2d> t_conv_;
    std::vector<nn::BatchNorm2d> t_bn_;
    nn::Linear t_fc_;

    nn::Var codebook_; // [n_notes, K]
    std::vector<nn::Linear> pitch_gamma_, pitch_beta_;
    nn::Linear pitch_gamma_b_, pitch_beta_b_;

    std::vector<nn::Conv2d> timbre_conv_;
    nn::Conv2d timbre_conv_b_;

    std::vector<nn::Conv2d> dec_conv_;
    std::vector<nn::BatchNorm2d> dec_bn_;
    nn::Conv2d head_conv_;
};

// True when no path from `spec` reaches an encoder feature except through an
// entangle node; the msi_dis decoder must satisfy this.
bool decoder_uses_only_entangled_inputs(const nn::Var& spec);

// Assembles [N,1,T,F] batches from magnitude spectrograms: each value is
// (mag/scale)^power (the scale is the mixture peak for model inputs).
nn::Tensor stack_spectrograms(const std::vector<const dsp::MagSpectrogram*>& specs,
                              const std::vector<double>& scales, double power = 1.0);
nn::Tensor stack_rolls(const std::vector<const data::MidiRoll*>& rolls);
// Extracts batch element n, inverting the compression and the scale.
dsp::MagSpectrogram spec_from_tensor(const nn::Tensor& t, int n, const dsp::StftConfig& cfg,
                                     double scale, int length_hint, double power = 1.0);
data::MidiRoll roll_from_tensor(const nn::Tensor& t, int n);

} // namespace umss::model
