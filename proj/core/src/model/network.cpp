#include "umss/model/network.hpp"

#include <cmath>

namespace umss::model {

using namespace nn;

Model::FilmMap Model::make_film(const std::string& name, int channels, Rng& rng) {
    FilmMap f;
    const int m = cfg_.query_embed_dim;
    // Small weights and gamma = 1 + W q keep the conditioning an identity
    // map at initialization.
    if (cfg_.film_rank > 0) {
        f.low_rank = true;
        f.hidden_g = Linear(store_, name + ".hidden_g", m, cfg_.film_rank, rng, 0.1);
        f.hidden_b = Linear(store_, name + ".hidden_b", m, cfg_.film_rank, rng, 0.1);
        f.to_gamma = Linear(store_, name + ".gamma", cfg_.film_rank, channels, rng, 0.01);
        f.to_beta = Linear(store_, name + ".beta", cfg_.film_rank, channels, rng, 0.01);
    } else {
        f.to_gamma = Linear(store_, name + ".gamma", m, channels, rng, 0.01);
        f.to_beta = Linear(store_, name + ".beta", m, channels, rng, 0.01);
    }
    return f;
}

Var Model::apply_film(const FilmMap& f, const Var& x, const Var& q) {
    Var src_g = q, src_b = q;
    if (f.low_rank) {
        src_g = tanh_op(f.hidden_g.forward(q));
        src_b = tanh_op(f.hidden_b.forward(q));
    }
    Var gamma = add_scalar(f.to_gamma.forward(src_g), 1.0);
    Var beta = f.to_beta.forward(src_b);
    return film_channel(x, gamma, beta);
}

Model::Model(ModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int levels = cfg_.levels();
    const int qc = cfg_.query_channels;

    // QueryNet: two blocks of (conv, conv, 2x2 pool), then per-frame FC,
    // tanh and a temporal average. Circular time padding makes the summary
    // embedding invariant to repeating the clip.
    q_conv_.emplace_back(store_, "query.conv0", 1, qc, 3, 3, rng, true);
    q_conv_.emplace_back(store_, "query.conv1", qc, qc, 3, 3, rng, true);
    q_conv_.emplace_back(store_, "query.conv2", qc, 2 * qc, 3, 3, rng, true);
    q_conv_.emplace_back(store_, "query.conv3", 2 * qc, 2 * qc, 3, 3, rng, true);
    for (int i = 0; i < 4; ++i)
        q_bn_.emplace_back(store_, "query.bn" + std::to_string(i),
                           q_conv_[static_cast<size_t>(i)].w->value.dim(0));
    const int qf = cfg_.freq_bins / 2 / 2;
    q_fc_ = Linear(store_, "query.fc", 2 * qc * qf, cfg_.query_embed_dim, rng);

    // Encoder: frequency-only downsampling; FiLM at every block.
    int c_prev = 1;
    for (int l = 0; l < levels; ++l) {
        const int c = cfg_.enc_channels[static_cast<size_t>(l)];
        enc_conv_.emplace_back(store_, "enc.conv" + std::to_string(l), c_prev, c, 3, 3, rng);
        enc_bn_.emplace_back(store_, "enc.bn" + std::to_string(l), c);
        enc_film_.push_back(make_film("enc.film" + std::to_string(l), c, rng));
        c_prev = c;
    }
    bott_conv_ = Conv2d(store_, "enc.conv_b", c_prev, cfg_.bottleneck_channels, 3, 3, rng);
    bott_bn_ = BatchNorm2d(store_, "enc.bn_b", cfg_.bottleneck_channels);
    bott_film_ = make_film("enc.film_b", cfg_.bottleneck_channels, rng);

    if (variant_has_transcriptor(cfg_.variant)) {
        const int tc = cfg_.transcriptor_channels;
        t_conv_.emplace_back(store_, "transcriptor.conv0", cfg_.bottleneck_channels, tc, 3, 3, rng);
        t_conv_.emplace_back(store_, "transcriptor.conv1", tc, tc, 3, 3, rng);
        t_conv_.emplace_back(store_, "transcriptor.conv2", tc, tc, 3, 3, rng);
        t_conv_.emplace_back(store_, "transcriptor.conv3", tc, tc, 3, 3, rng);
        for (int i = 0; i < 4; ++i)
            t_bn_.emplace_back(store_, "transcriptor.bn" + std::to_string(i), tc);
        const int bottleneck_bins = cfg_.padded_bins() >> levels;
        t_fc_ = Linear(store_, "transcriptor.fc", tc * (bottleneck_bins / 4), cfg_.n_notes, rng);
    }

    if (variant_has_disentanglement(cfg_.variant)) {
        const int half = cfg_.pitch_rep_width / 2;
        codebook_ = store_.add("pitch.codebook",
                               Tensor::randn({cfg_.n_notes, cfg_.pitch_rep_width}, rng, 1.0));
        for (int l = 0; l < levels; ++l) {
            const int c = cfg_.enc_channels[static_cast<size_t>(l)];
            pitch_gamma_.emplace_back(store_, "pitch.gamma" + std::to_string(l), half, c, rng,
                                      0.05, 1.0);
            pitch_beta_.emplace_back(store_, "pitch.beta" + std::to_string(l), half, c, rng,
                                     0.05, 0.0);
            timbre_conv_.emplace_back(store_, "timbre.conv" + std::to_string(l), c, c, 3, 3, rng);
        }
        pitch_gamma_b_ = Linear(store_, "pitch.gamma_b", half, cfg_.bottleneck_channels, rng,
                                0.05, 1.0);
        pitch_beta_b_ = Linear(store_, "pitch.beta_b", half, cfg_.bottleneck_channels, rng,
                               0.05, 0.0);
        timbre_conv_b_ = Conv2d(store_, "timbre.conv_b", cfg_.bottleneck_channels,
                                cfg_.bottleneck_channels, 3, 3, rng);
    }

    if (variant_has_decoder(cfg_.variant)) {
        int c_up = cfg_.bottleneck_channels;
        for (int l = levels - 1; l >= 0; --l) {
            const int c_skip = cfg_.enc_channels[static_cast<size_t>(l)];
            const int idx = levels - 1 - l;
            dec_conv_.emplace_back(store_, "dec.conv" + std::to_string(idx), c_up + c_skip,
                                   c_skip, 3, 3, rng);
            dec_bn_.emplace_back(store_, "dec.bn" + std::to_string(idx), c_skip);
            c_up = c_skip;
        }
        head_conv_ = Conv2d(store_, "dec.head", c_up, 1, 1, 1, rng);
    }
}

Var Model::embed_query(const Var& query_spec, bool training) {
    const auto& s = query_spec->value.shape();
    require(s.size() == 4 && s[1] == 1, "query spectrogram must be [N,1,T,F]");
    require(s[2] >= 4, "query spectrogram too short: need at least 4 frames");
    require(s[3] == cfg_.freq_bins, "query spectrogram bin count mismatch");

    Var x = query_spec;
    for (int i = 0; i < 4; ++i) {
        x = relu(q_bn_[static_cast<size_t>(i)].forward(
            q_conv_[static_cast<size_t>(i)].forward(x), training));
        if (i == 1 || i == 3) x = maxpool2d(x, 2, 2);
    }
    Var frames = frame_features(x);      // [N, T/4, C*F/4]
    Var embed = tanh_op(q_fc_.forward(frames));
    return mean_time(embed);             // [N, M]
}

EncoderFeatures Model::encode(const Var& mix_spec, const Var& q, bool training) {
    const auto& s = mix_spec->value.shape();
    require(s.size() == 4 && s[1] == 1, "mixture spectrogram must be [N,1,T,F]");
    require(s[3] == cfg_.freq_bins, "mixture spectrogram bin count mismatch");

    EncoderFeatures out;
    Var x = pad_last(mix_spec, cfg_.padded_bins());
    for (int l = 0; l < cfg_.levels(); ++l) {
        x = enc_conv_[static_cast<size_t>(l)].forward(x);
        x = enc_bn_[static_cast<size_t>(l)].forward(x, training);
        x = apply_film(enc_film_[static_cast<size_t>(l)], x, q);
        x = relu(x);
        out.skips.push_back(tag(x, "enc_feat"));
        x = maxpool2d(x, 1, 2);
    }
    x = bott_conv_.forward(x);
    x = bott_bn_.forward(x, training);
    x = apply_film(bott_film_, x, q);
    x = relu(x);
    out.bottleneck = tag(x, "enc_feat");
    return out;
}

Var Model::transcribe(const EncoderFeatures& enc, bool training) {
    require(variant_has_transcriptor(cfg_.variant),
            "variant " + variant_name(cfg_.variant) + " has no transcriptor");
    Var x = enc.bottleneck;
    for (int i = 0; i < 4; ++i) {
        x = relu(t_bn_[static_cast<size_t>(i)].forward(
            t_conv_[static_cast<size_t>(i)].forward(x), training));
        if (i == 1 || i == 3) x = maxpool2d(x, 1, 2); // no temporal pooling
    }
    Var frames = frame_features(x);
    return softmax_last(t_fc_.forward(frames)); // [N,T,89]
}

Var Model::pitch_rep(const Var& roll) {
    require(variant_has_disentanglement(cfg_.variant),
            "variant " + variant_name(cfg_.variant) + " has no pitch extractor");
    require(roll->value.shape().back() == cfg_.n_notes,
            "roll class count mismatch (want " + std::to_string(cfg_.n_notes) + ")");
    return matmul(roll, codebook_);
}

PitchModulation Model::project_pitch(const Var& pitch) {
    const int half = cfg_.pitch_rep_width / 2;
    Var gamma_half = slice_last(pitch, 0, half);
    Var beta_half = slice_last(pitch, half, half);
    PitchModulation mod;
    for (int l = 0; l < cfg_.levels(); ++l) {
        mod.gamma.push_back(pitch_gamma_[static_cast<size_t>(l)].forward(gamma_half));
        mod.beta.push_back(pitch_beta_[static_cast<size_t>(l)].forward(beta_half));
    }
    mod.gamma_bottleneck = pitch_gamma_b_.forward(gamma_half);
    mod.beta_bottleneck = pitch_beta_b_.forward(beta_half);
    return mod;
}

Var Model::timbre_of_skip(int level, const Var& skip) {
    require(level >= 0 && level < cfg_.levels(), "timbre level out of range");
    // Shape-preserving conv; deliberately no activation or normalization.
    return timbre_conv_[static_cast<size_t>(level)].forward(skip);
}

Var Model::timbre_of_bottleneck(const Var& bottleneck) {
    return timbre_conv_b_.forward(bottleneck);
}

Var Model::entangle(const Var& ti, const Var& gamma, const Var& beta) {
    return tag(film_time(ti, gamma, beta), "entangle");
}

Var Model::decode(const Var& seed, const std::vector<Var>& skips, bool training) {
    require(variant_has_decoder(cfg_.variant),
            "variant " + variant_name(cfg_.variant) + " has no decoder");
    require(static_cast<int>(skips.size()) == cfg_.levels(), "decode: skip count mismatch");
    Var x = seed;
    for (int l = cfg_.levels() - 1; l >= 0; --l) {
        const size_t idx = static_cast<size_t>(cfg_.levels() - 1 - l);
        x = upsample_freq(x, 2);
        x = concat_channels(x, skips[static_cast<size_t>(l)]);
        x = relu(dec_bn_[idx].forward(dec_conv_[idx].forward(x), training));
    }
    x = relu(head_conv_.forward(x)); // nonnegative magnitudes
    return crop_last(x, cfg_.freq_bins);
}

Var Model::decode_entangled(const PitchModulation& mod, const EncoderFeatures& enc,
                            bool training, std::vector<Var>* timbre_out) {
    Var ti_b = timbre_of_bottleneck(enc.bottleneck);
    Var seed = entangle(ti_b, mod.gamma_bottleneck, mod.beta_bottleneck);
    std::vector<Var> skips;
    std::vector<Var> timbre;
    if (cfg_.variant == Variant::MSI_DIS) {
        // Every decoder input is an entangled (pitch, timbre) tensor.
        for (int l = 0; l < cfg_.levels(); ++l) {
            Var ti = timbre_of_skip(l, enc.skips[static_cast<size_t>(l)]);
            timbre.push_back(ti);
            skips.push_back(entangle(ti, mod.gamma[static_cast<size_t>(l)],
                                     mod.beta[static_cast<size_t>(l)]));
        }
    } else {
        skips = enc.skips; // msi: entangle at the bottleneck, ordinary skips
    }
    timbre.push_back(ti_b);
    if (timbre_out) *timbre_out = timbre;
    return decode(seed, skips, training);
}

ForwardResult Model::forward(const Var& mix_spec, const Var& query_spec,
                             const Var& external_roll, bool training) {
    if (external_roll)
        require(variant_has_disentanglement(cfg_.variant),
                "external scores require a disentangling variant (msi or msi_dis)");

    ForwardResult out;
    out.query_embedding = embed_query(query_spec, training);
    EncoderFeatures enc = encode(mix_spec, out.query_embedding, training);

    switch (cfg_.variant) {
        case Variant::MSS_ONLY:
            out.spec = decode(enc.bottleneck, enc.skips, training);
            break;
        case Variant::AMT_ONLY:
            out.roll = transcribe(enc, training);
            break;
        case Variant::MULTI_TASK:
            out.roll = transcribe(enc, training);
            out.spec = decode(enc.bottleneck, enc.skips, training);
            break;
        case Variant::MSI:
        case Variant::MSI_DIS: {
            out.roll = transcribe(enc, training);
            Var roll_for_pitch = external_roll ? external_roll : out.roll;
            out.pitch = pitch_rep(roll_for_pitch);
            PitchModulation mod = project_pitch(out.pitch);
            out.spec = decode_entangled(mod, enc, training, &out.timbre);
            break;
        }
    }
    return out;
}

bool decoder_uses_only_entangled_inputs(const Var& spec) {
    bool clean = true;
    walk_ancestors(spec, [&clean](const Node& n) {
        if (std::string_view(n.op) == "entangle") return false; // stop below entangle
        if (std::string_view(n.op) == "enc_feat") {
            clean = false;
            return false;
        }
        return true;
    });
    return clean;
}

Tensor stack_spectrograms(const std::vector<const dsp::MagSpectrogram*>& specs,
                          const std::vector<double>& scales, double power) {
    require(!specs.empty() && specs.size() == scales.size(), "stack_spectrograms: bad inputs");
    require(power > 0.0 && power <= 1.0, "stack_spectrograms: power in (0, 1]");
    const int t = specs[0]->frames, f = specs[0]->bins;
    Tensor out({static_cast<int>(specs.size()), 1, t, f});
    for (size_t n = 0; n < specs.size(); ++n) {
        require(specs[n]->frames == t && specs[n]->bins == f,
                "stack_spectrograms: inconsistent shapes");
        const double inv = scales[n] != 0.0 ? 1.0 / scales[n] : 1.0;
        double* dst = out.data() + static_cast<int64_t>(n) * t * f;
        if (power == 1.0) {
            for (int64_t i = 0; i < static_cast<int64_t>(t) * f; ++i)
                dst[i] = specs[n]->values[static_cast<size_t>(i)] * inv;
        } else {
            for (int64_t i = 0; i < static_cast<int64_t>(t) * f; ++i)
                dst[i] = std::pow(specs[n]->values[static_cast<size_t>(i)] * inv, power);
        }
    }
    return out;
}

Tensor stack_rolls(const std::vector<const data::MidiRoll*>& rolls) {
    require(!rolls.empty(), "stack_rolls: empty batch");
    const int t = rolls[0]->frames;
    const int c = data::MidiRoll::kClasses;
    Tensor out({static_cast<int>(rolls.size()), t, c});
    for (size_t n = 0; n < rolls.size(); ++n) {
        require(rolls[n]->frames == t, "stack_rolls: inconsistent frame counts");
        std::copy(rolls[n]->values.begin(), rolls[n]->values.end(),
                  out.data() + static_cast<int64_t>(n) * t * c);
    }
    return out;
}

dsp::MagSpectrogram spec_from_tensor(const Tensor& t, int n, const dsp::StftConfig& cfg,
                                     double scale, int length_hint, double power) {
    const auto& s = t.shape();
    require(s.size() == 4 && s[1] == 1, "spec_from_tensor wants [N,1,T,F]");
    require(power > 0.0 && power <= 1.0, "spec_from_tensor: power in (0, 1]");
    dsp::MagSpectrogram m;
    m.frames = s[2];
    m.bins = s[3];
    m.config = cfg;
    m.length_hint = length_hint;
    m.values.resize(static_cast<size_t>(m.frames) * m.bins);
    const double* src = t.data() + static_cast<int64_t>(n) * m.frames * m.bins;
    for (size_t i = 0; i < m.values.size(); ++i) {
        const double v = std::max(src[i], 0.0);
        m.values[i] = (power == 1.0 ? v : std::pow(v, 1.0 / power)) * scale;
    }
    return m;
}

data::MidiRoll roll_from_tensor(const Tensor& t, int n) {
    const auto& s = t.shape();
    require(s.size() == 3 && s[2] == data::MidiRoll::kClasses, "roll_from_tensor wants [N,T,89]");
    data::MidiRoll roll(s[1]);
    const double* src = t.data() + static_cast<int64_t>(n) * s[1] * s[2];
    std::copy(src, src + static_cast<int64_t>(s[1]) * s[2], roll.values.begin());
    return roll;
}

} // namespace umss::model
