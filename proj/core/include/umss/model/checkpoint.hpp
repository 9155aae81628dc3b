#pragma once

#include <map>

#include "umss/model/network.hpp"

namespace umss::model {

// Self-describing training snapshot: config echo, parameter and buffer
// tensors by name, optimizer moments, counters, sampler RNG state.
struct TrainState {
    PipelineConfig pipeline;
    int epoch = 0;
    int64_t step = 0;
    int64_t adam_t = 0;
    std::string sampler_rng;
    std::map<std::string, nn::Tensor> params;
    std::map<std::string, nn::Tensor> buffers;
    std::map<std::string, nn::Tensor> adam_m;
    std::map<std::string, nn::Tensor> adam_v;
};

void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

TrainState snapshot_model(const Model& m, const PipelineConfig& cfg);
// Copies parameters and buffers into the model; the stored model config
// must match the instantiated one exactly.
void restore_model(const TrainState& state, Model& m);
// Convenience: load + instantiate in one step.
Model model_from_checkpoint(const std::string& path, PipelineConfig* cfg_out = nullptr);

} // namespace umss::model
