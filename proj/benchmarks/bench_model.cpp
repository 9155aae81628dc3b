#include <benchmark/benchmark.h>

#include "umss/losses/losses.hpp"
#include "umss/model/network.hpp"

using namespace umss;
using namespace umss::nn;

namespace {

// Desk-scale toy topology: 4 levels, F=129 padded to 144.
model::ModelConfig toy_model(model::Variant v) {
    model::ModelConfig m;
    m.variant = v;
    m.freq_bins = 129;
    m.enc_channels = {8, 16, 24, 32};
    m.bottleneck_channels = 32;
    m.pitch_rep_width = 32;
    m.query_channels = 8;
    m.transcriptor_channels = 16;
    return m;
}

Tensor random_spec(int n, int t, int f, Rng& rng) {
    Tensor x({n, 1, t, f});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = std::fabs(rng.normal(0.0, 0.5));
    return x;
}

} // namespace

static void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(1);
    const int n = static_cast<int>(state.range(0));
    Var x = make_constant(random_spec(n, 81, 144, rng));
    Var w = make_param(Tensor::randn({16, 1, 3, 3}, rng, 0.1));
    Var b = make_param(Tensor::zeros({16}));
    for (auto _ : state) {
        Var y = conv2d(x, w, b, 1, 1);
        benchmark::DoNotOptimize(y->value.data());
    }
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(4);

static void BM_MsiForward(benchmark::State& state) {
    Rng init(2);
    model::Model net(toy_model(model::Variant::MSI), init);
    Rng rng(3);
    Var mix = make_constant(random_spec(4, 81, 129, rng));
    Var query = make_constant(random_spec(4, 41, 129, rng));
    for (auto _ : state) {
        model::ForwardResult fwd = net.forward(mix, query, nullptr, false);
        benchmark::DoNotOptimize(fwd.spec->value.data());
    }
}
BENCHMARK(BM_MsiForward);

static void BM_MsiTrainStep(benchmark::State& state) {
    Rng init(4);
    model::Model net(toy_model(model::Variant::MSI), init);
    Rng rng(5);
    Var mix = make_constant(random_spec(4, 81, 129, rng));
    Var target = make_constant(random_spec(4, 81, 129, rng));
    Var query = make_constant(random_spec(4, 41, 129, rng));
    Tensor rolls({4, 81, 89});
    for (int i = 0; i < 4 * 81; ++i) rolls[i * 89 + (i % 89)] = 1.0;
    for (auto _ : state) {
        net.params().zero_grads();
        model::ForwardResult fwd = net.forward(mix, query, nullptr, true);
        Var loss = add(losses::separation_loss(target, fwd.spec),
                       losses::transcription_loss(make_constant(rolls), fwd.roll));
        backward(loss);
        benchmark::DoNotOptimize(loss->value[0]);
    }
}
BENCHMARK(BM_MsiTrainStep);

BENCHMARK_MAIN();
