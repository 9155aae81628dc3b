#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "umss/data/sampler.hpp"
#include "umss/losses/losses.hpp"
#include "umss/model/checkpoint.hpp"

namespace umss::train {

class Adam {
public:
    Adam(nn::ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    void step();
    int64_t t() const { return t_; }
    std::map<std::string, nn::Tensor>& m() { return m_; }
    std::map<std::string, nn::Tensor>& v() { return v_; }
    void set_t(int64_t t) { t_ = t; }

private:
    nn::ParamStore* store_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::map<std::string, nn::Tensor> m_, v_;
};

struct StepMetrics {
    int64_t step = 0;
    losses::LossParts parts;
    double total = 0.0;
};

// Owns the model, optimizer and sampling state for one training run.
// Keeps per-epoch checkpoints and an append-only metrics log.
class Trainer {
public:
    Trainer(model::PipelineConfig cfg, const std::vector<data::Track>& train_tracks,
            std::string out_dir);

    // Resume from a checkpoint produced with the same config.
    void restore(const std::string& checkpoint_path);

    StepMetrics step();
    void run(const std::function<void(int epoch, const StepMetrics&)>& on_epoch = {});
    void save_epoch_checkpoint(int epoch);

    model::Model& net() { return *model_; }
    int64_t global_step() const { return step_; }
    int epoch() const { return epoch_; }
    const model::PipelineConfig& config() const { return cfg_; }
    std::string checkpoint_path(int epoch) const;

private:
    model::PipelineConfig cfg_;
    const std::vector<data::Track>* tracks_;
    std::string out_dir_;
    std::unique_ptr<model::Model> model_;
    std::unique_ptr<Adam> adam_;
    data::SamplerConfig sampler_cfg_;
    std::unique_ptr<data::PairSampler> sampler_;
    Rng sampler_rng_;
    int64_t step_ = 0;
    int epoch_ = 0;
};

// One line per optimization step: step, variant, each loss term, total.
void append_metrics(const std::string& path, const std::string& variant,
                    const StepMetrics& m);

} // namespace umss::train
