#include "umss/train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace umss::train {

using namespace nn;

Adam::Adam(ParamStore& store, double lr, double beta1, double beta2, double eps)
    : store_(&store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, v] : store.params()) {
        m_[name] = Tensor::zeros(v->value.shape());
        v_[name] = Tensor::zeros(v->value.shape());
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::vector<std::pair<nn::Node*, std::pair<nn::Tensor*, nn::Tensor*>>> work;
    for (const auto& [name, var] : store_->params()) {
        if (var->grad.empty()) continue;
        work.emplace_back(var.get(), std::make_pair(&m_[name], &v_[name]));
    }
#pragma omp parallel for schedule(dynamic)
    for (size_t w = 0; w < work.size(); ++w) {
        nn::Node* var = work[w].first;
        nn::Tensor& m = *work[w].second.first;
        nn::Tensor& v = *work[w].second.second;
        const int64_t n = var->value.size();
        for (int64_t i = 0; i < n; ++i) {
            const double g = var->grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            var->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

Trainer::Trainer(model::PipelineConfig cfg, const std::vector<data::Track>& train_tracks,
                 std::string out_dir)
    : cfg_(std::move(cfg)), tracks_(&train_tracks), out_dir_(std::move(out_dir)),
      sampler_rng_(0) {
    cfg_.validate();
    fs::create_directories(out_dir_);

    Rng init_rng(cfg_.train.seed);
    model_ = std::make_unique<model::Model>(cfg_.model, init_rng);
    adam_ = std::make_unique<Adam>(model_->params(), cfg_.train.learning_rate);
    sampler_rng_ = init_rng.fork(1);

    sampler_cfg_.segment_seconds = cfg_.train.segment_seconds;
    sampler_cfg_.query_seconds = cfg_.train.query_seconds;
    sampler_cfg_.shift_range = cfg_.train.shift_range;
    sampler_cfg_.hop_seconds = cfg_.hop_seconds();
    sampler_ = std::make_unique<data::PairSampler>(*tracks_, sampler_cfg_);
    require(sampler_->instrument_count() >= 2,
            "training needs at least 2 instruments in the train split");
}

void Trainer::restore(const std::string& checkpoint_path) {
    model::TrainState state = model::load_checkpoint(checkpoint_path);
    require(state.pipeline == cfg_, "checkpoint config does not match the training config");
    model::restore_model(state, *model_);
    for (auto& [name, t] : state.adam_m) adam_->m()[name] = t;
    for (auto& [name, t] : state.adam_v) adam_->v()[name] = t;
    adam_->set_t(state.adam_t);
    step_ = state.step;
    epoch_ = state.epoch;
    if (!state.sampler_rng.empty()) sampler_rng_.deserialize(state.sampler_rng);
}

std::string Trainer::checkpoint_path(int epoch) const {
    char name[64];
    std::snprintf(name, sizeof(name), "ckpt_epoch%04d.bin", epoch);
    return (fs::path(out_dir_) / name).string();
}

void Trainer::save_epoch_checkpoint(int epoch) {
    model::TrainState state = model::snapshot_model(*model_, cfg_);
    state.epoch = epoch;
    state.step = step_;
    state.adam_t = adam_->t();
    state.sampler_rng = sampler_rng_.serialize();
    state.adam_m = adam_->m();
    state.adam_v = adam_->v();
    save_checkpoint(checkpoint_path(epoch), state);
    const int keep = cfg_.train.keep_last_checkpoints;
    if (keep > 0 && epoch - keep >= 1) {
        const std::string old = checkpoint_path(epoch - keep);
        if (fs::exists(old)) fs::remove(old);
    }
}

StepMetrics Trainer::step() {
    const model::Variant variant = cfg_.model.variant;
    const int b = cfg_.train.batch_pairs;
    const bool needs_shifted = variant == model::Variant::MSI_DIS;

    std::vector<data::TrainingPair> pairs;
    pairs.reserve(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) pairs.push_back(sampler_->sample(sampler_rng_));

    // Spectrograms; one scale per pair shared by every branch so losses and
    // reconstructions stay in a single normalized domain.
    std::vector<dsp::MagSpectrogram> mix_mags, target_mags, shifted_mags;
    std::vector<double> scales;
    std::vector<dsp::MagSpectrogram> query_mags;
    std::vector<double> query_scales;
    for (const auto& p : pairs) {
        dsp::MagSpectrogram mix = dsp::magnitude(dsp::stft(p.mixture, cfg_.stft));
        double s = mix.max_value();
        if (needs_shifted) {
            shifted_mags.push_back(dsp::magnitude(dsp::stft(p.shifted_mixture, cfg_.stft)));
            s = std::max(s, shifted_mags.back().max_value());
        }
        scales.push_back(std::max(s, 1e-9));
        mix_mags.push_back(std::move(mix));
        target_mags.push_back(dsp::magnitude(dsp::stft(p.target, cfg_.stft)));
        for (const auto& clip : p.query_clips) {
            query_mags.push_back(dsp::magnitude(dsp::stft(clip, cfg_.stft)));
            query_scales.push_back(std::max(query_mags.back().max_value(), 1e-9));
        }
    }

    auto ptrs = [](const std::vector<dsp::MagSpectrogram>& v) {
        std::vector<const dsp::MagSpectrogram*> out;
        for (const auto& m : v) out.push_back(&m);
        return out;
    };
    const double power = cfg_.model.mag_power;
    Var mix = make_constant(model::stack_spectrograms(ptrs(mix_mags), scales, power));
    Var target = make_constant(model::stack_spectrograms(ptrs(target_mags), scales, power));
    Var queries =
        make_constant(model::stack_spectrograms(ptrs(query_mags), query_scales, power));
    std::vector<const data::MidiRoll*> roll_ptrs;
    for (const auto& p : pairs) roll_ptrs.push_back(&p.target_roll);
    Var rolls = make_constant(model::stack_rolls(roll_ptrs));

    model_->params().zero_grads();

    // All 3B query clips share one QueryNet pass; anchors condition the encoder.
    Var q_all = model_->embed_query(queries, /*training=*/true);
    std::vector<Var> anchor_rows;
    for (int i = 0; i < b; ++i) anchor_rows.push_back(select_row(q_all, 3 * i));
    Var q_cond = stack_rows(anchor_rows);

    model::EncoderFeatures enc = model_->encode(mix, q_cond, /*training=*/true);

    losses::LossParts parts;
    Var total;

    // Contrastive loss: positives share the anchor's instrument, every clip
    // embedding of a different instrument in the batch is a negative.
    {
        Var l_query;
        for (int c = 0; c < b; ++c) {
            losses::QueryBatch qb;
            qb.anchor = anchor_rows[static_cast<size_t>(c)];
            qb.positive = select_row(q_all, 3 * c + 1);
            qb.source_count = b;
            for (int j = 0; j < b; ++j) {
                if (pairs[static_cast<size_t>(j)].target_instrument ==
                    pairs[static_cast<size_t>(c)].target_instrument)
                    continue;
                for (int k = 0; k < 3; ++k) qb.negatives.push_back(select_row(q_all, 3 * j + k));
            }
            Var lc = losses::query_loss(qb);
            l_query = l_query ? add(l_query, lc) : lc;
        }
        parts.query = l_query->value[0];
        total = l_query;
    }

    Var roll_pred;
    if (model::variant_has_transcriptor(variant)) {
        roll_pred = model_->transcribe(enc, /*training=*/true);
        Var l_trans = losses::transcription_loss(rolls, roll_pred);
        parts.transcription = l_trans->value[0];
        total = add(total, l_trans);
    }

    if (variant == model::Variant::MSI_DIS) {
        Var shifted =
            make_constant(model::stack_spectrograms(ptrs(shifted_mags), scales, power));
        Var l_pti = losses::pti_loss(*model_, target, shifted, roll_pred, q_cond,
                                     /*training=*/true);
        parts.pti = l_pti->value[0];
        total = add(total, l_pti);
    } else if (model::variant_has_decoder(variant)) {
        Var spec;
        if (variant == model::Variant::MSI) {
            Var pitch = model_->pitch_rep(roll_pred);
            model::PitchModulation mod = model_->project_pitch(pitch);
            spec = model_->decode_entangled(mod, enc, /*training=*/true);
        } else {
            spec = model_->decode(enc.bottleneck, enc.skips, /*training=*/true);
        }
        Var l_sep = losses::separation_loss(target, spec);
        parts.separation = l_sep->value[0];
        total = add(total, l_sep);
    }

    StepMetrics metrics;
    metrics.parts = parts;
    metrics.total = total->value[0];

    if (!std::isfinite(metrics.total)) {
        model::TrainState snap = model::snapshot_model(*model_, cfg_);
        snap.epoch = epoch_;
        snap.step = step_;
        save_checkpoint((fs::path(out_dir_) / "diagnostic.bin").string(), snap);
        throw Error("non-finite training loss at step " + std::to_string(step_) +
                    "; diagnostic snapshot written to " + out_dir_);
    }

    backward(total);
    adam_->step();
    ++step_;
    metrics.step = step_;
    return metrics;
}

void Trainer::run(const std::function<void(int, const StepMetrics&)>& on_epoch) {
    const std::string metrics_path = (fs::path(out_dir_) / "metrics.tsv").string();
    const std::string variant = model::variant_name(cfg_.model.variant);
    for (int e = epoch_ + 1; e <= cfg_.train.epochs; ++e) {
        StepMetrics last;
        for (int s = 0; s < cfg_.train.steps_per_epoch; ++s) {
            last = step();
            append_metrics(metrics_path, variant, last);
        }
        epoch_ = e;
        save_epoch_checkpoint(e);
        if (on_epoch) on_epoch(e, last);
    }
}

void append_metrics(const std::string& path, const std::string& variant, const StepMetrics& m) {
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    require(out.good(), "cannot append metrics log: " + path);
    if (fresh) out << "step\tvariant\tl_query\tl_transcription\tl_separation\tl_pti\ttotal\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? std::to_string(*v) : std::string("-");
    };
    out << m.step << "\t" << variant << "\t" << cell(m.parts.query) << "\t"
        << cell(m.parts.transcription) << "\t" << cell(m.parts.separation) << "\t"
        << cell(m.parts.pti) << "\t" << m.total << "\n";
}

} // namespace umss::train
