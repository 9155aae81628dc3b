#pragma once

#include <optional>

#include "umss/model/network.hpp"

namespace umss::losses {

inline constexpr double kQueryMargin = 0.125;
inline constexpr double kLogEps = 1e-8;

// Contrastive structure for one anchor: the positive shares the anchor's
// instrument, negatives do not. C is the number of sources in the batch.
struct QueryBatch {
    nn::Var anchor;
    nn::Var positive;
    std::vector<nn::Var> negatives;
    int source_count = 2;
    double margin = kQueryMargin;
};

// (1/C) { ||a - p||_2 + sum_j max(m - ||a - q_j||_2, 0) }
nn::Var query_loss(const QueryBatch& batch);

// Frame-wise categorical cross-entropy; truth rows one-hot, pred rows
// probabilities. Mean over frames; probability clamp keeps it finite.
nn::Var transcription_loss(const nn::Var& truth, const nn::Var& pred);

// Mean absolute difference over all entries.
nn::Var separation_loss(const nn::Var& s_true, const nn::Var& s_pred);

// Pitch-translation invariance: timbre from the shifted mixture, pitch from
// the unshifted branch, reconstruction compared against the unshifted
// target. With a zero shift this equals separation_loss on the same inputs.
nn::Var pti_loss(model::Model& m, const nn::Var& s_true, const nn::Var& mix_shifted,
                 const nn::Var& roll_or_pred, const nn::Var& q, bool training);

struct LossParts {
    std::optional<double> query;
    std::optional<double> transcription;
    std::optional<double> separation;
    std::optional<double> pti;
};

// Unit-weight aggregate per variant; missing required part is an error.
//   msi / multi_task: query + transcription + separation
//   msi_dis:          query + transcription + pti
//   mss_only:         query + separation
//   amt_only:         query + transcription
double aggregate(model::Variant variant, const LossParts& parts);

} // namespace umss::losses
