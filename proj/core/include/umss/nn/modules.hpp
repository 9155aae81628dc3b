#pragma once

#include <map>
#include <string>

#include "umss/nn/ops.hpp"
#include "umss/rng.hpp"

namespace umss::nn {

// Named parameter table. Modules register their tensors here so the
// optimizer, checkpoints and tests can address them by path.
class ParamStore {
public:
    Var add(const std::string& name, Tensor init) {
        require(!params_.count(name), "duplicate parameter name: " + name);
        Var v = make_param(std::move(init));
        params_[name] = v;
        return v;
    }
    Tensor* add_buffer(const std::string& name, Tensor init) {
        require(!buffers_.count(name), "duplicate buffer name: " + name);
        buffers_[name] = std::move(init);
        return &buffers_[name];
    }
    const std::map<std::string, Var>& params() const { return params_; }
    std::map<std::string, Tensor>& buffers() { return buffers_; }
    const std::map<std::string, Tensor>& buffers() const { return buffers_; }
    Var at(const std::string& name) const {
        auto it = params_.find(name);
        require(it != params_.end(), "unknown parameter: " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    int64_t total_size() const {
        int64_t n = 0;
        for (const auto& [_, v] : params_) n += v->value.size();
        return n;
    }
    void zero_grads() {
        for (auto& [_, v] : params_)
            if (!v->grad.empty()) v->grad.zero();
    }

private:
    std::map<std::string, Var> params_;
    std::map<std::string, Tensor> buffers_;
};

struct Conv2d {
    Var w, b;
    int pad_t = 0, pad_f = 0;
    bool circular_t = false;

    Conv2d() = default;
    // Kaiming-normal weights, zero bias, 'same' padding for odd kernels.
    Conv2d(ParamStore& store, const std::string& name, int c_in, int c_out,
           int kh, int kw, Rng& rng, bool circular_time = false);
    Var forward(const Var& x) const { return conv2d(x, w, b, pad_t, pad_f, circular_t); }
};

struct BatchNorm2d {
    Var gamma, beta;
    Tensor* running_mean = nullptr;
    Tensor* running_var = nullptr;

    BatchNorm2d() = default;
    BatchNorm2d(ParamStore& store, const std::string& name, int channels);
    Var forward(const Var& x, bool training) const {
        return batch_norm(x, gamma, beta, running_mean, running_var, training);
    }
};

struct Linear {
    Var w, b;

    Linear() = default;
    Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
           double weight_scale = -1.0, double bias_value = 0.0);
    Var forward(const Var& x) const { return linear(x, w, b); }
};

} // namespace umss::nn
