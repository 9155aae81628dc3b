#include "umss/losses/losses.hpp"

namespace umss::losses {

using namespace nn;

Var query_loss(const QueryBatch& batch) {
    require(batch.anchor && batch.positive, "query_loss: anchor and positive required");
    require(batch.margin > 0.0, "query_loss: margin must be positive");
    require(batch.source_count >= 1, "query_loss: source count must be >= 1");
    Var total = l2_distance(batch.anchor, batch.positive);
    for (const Var& neg : batch.negatives) {
        Var hinge = relu(add_scalar(scale(l2_distance(batch.anchor, neg), -1.0), batch.margin));
        total = add(total, hinge);
    }
    return scale(total, 1.0 / static_cast<double>(batch.source_count));
}

Var transcription_loss(const Var& truth, const Var& pred) {
    require(truth->value.same_shape(pred->value), "transcription_loss: shape mismatch");
    const int classes = truth->value.shape().back();
    const double frames = static_cast<double>(truth->value.size() / classes);
    Var ce = sum_all(mul(truth, log_clamped(pred, kLogEps)));
    return scale(ce, -1.0 / frames);
}

Var separation_loss(const Var& s_true, const Var& s_pred) {
    require(s_true->value.same_shape(s_pred->value), "separation_loss: shape mismatch");
    return mean_all(abs_op(sub(s_true, s_pred)));
}

Var pti_loss(model::Model& m, const Var& s_true, const Var& mix_shifted,
             const Var& roll_or_pred, const Var& q, bool training) {
    require(model::variant_has_disentanglement(m.config().variant),
            "pti_loss requires a disentangling variant (msi or msi_dis)");
    require(s_true->value.dim(2) == mix_shifted->value.dim(2),
            "pti_loss: shifted and unshifted branches must share frame counts");
    model::EncoderFeatures enc_shifted = m.encode(mix_shifted, q, training);
    Var pitch = m.pitch_rep(roll_or_pred);
    model::PitchModulation mod = m.project_pitch(pitch);
    Var cross_recon = m.decode_entangled(mod, enc_shifted, training);
    return separation_loss(s_true, cross_recon);
}

double aggregate(model::Variant variant, const LossParts& parts) {
    auto need = [](const std::optional<double>& part, const char* name) {
        require(part.has_value(), std::string("aggregate: missing required loss term ") + name);
        return *part;
    };
    switch (variant) {
        case model::Variant::MSI:
        case model::Variant::MULTI_TASK:
            return need(parts.query, "query") + need(parts.transcription, "transcription") +
                   need(parts.separation, "separation");
        case model::Variant::MSI_DIS:
            return need(parts.query, "query") + need(parts.transcription, "transcription") +
                   need(parts.pti, "pti");
        case model::Variant::MSS_ONLY:
            return need(parts.query, "query") + need(parts.separation, "separation");
        case model::Variant::AMT_ONLY:
            return need(parts.query, "query") + need(parts.transcription, "transcription");
    }
    throw Error("aggregate: bad variant");
}

} // namespace umss::losses
