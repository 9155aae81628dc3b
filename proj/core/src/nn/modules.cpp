#include "umss/nn/modules.hpp"

#include <cmath>

namespace umss::nn {

Conv2d::Conv2d(ParamStore& store, const std::string& name, int c_in, int c_out,
               int kh, int kw, Rng& rng, bool circular_time) {
    const double std = std::sqrt(2.0 / (static_cast<double>(c_in) * kh * kw));
    w = store.add(name + ".w", Tensor::randn({c_out, c_in, kh, kw}, rng, std));
    b = store.add(name + ".b", Tensor::zeros({c_out}));
    pad_t = (kh - 1) / 2;
    pad_f = (kw - 1) / 2;
    circular_t = circular_time;
}

BatchNorm2d::BatchNorm2d(ParamStore& store, const std::string& name, int channels) {
    gamma = store.add(name + ".gamma", Tensor::full({channels}, 1.0));
    beta = store.add(name + ".beta", Tensor::zeros({channels}));
    running_mean = store.add_buffer(name + ".running_mean", Tensor::zeros({channels}));
    running_var = store.add_buffer(name + ".running_var", Tensor::full({channels}, 1.0));
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
               double weight_scale, double bias_value) {
    const double std = weight_scale > 0.0 ? weight_scale
                                          : std::sqrt(1.0 / static_cast<double>(in));
    w = store.add(name + ".w", Tensor::randn({in, out}, rng, std));
    b = store.add(name + ".b", Tensor::full({out}, bias_value));
}

} // namespace umss::nn
