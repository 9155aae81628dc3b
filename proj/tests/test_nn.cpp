#include <doctest.h>

#include <functional>

#include "umss/nn/modules.hpp"
#include "umss/nn/ops.hpp"

using namespace umss;
using namespace umss::nn;

namespace {

// Central-difference check of every input element against the analytic
// gradient of loss = sum(f(inputs) .* weights).
double max_grad_error(const std::function<Var(const std::vector<Var>&)>& f,
                      std::vector<Var> inputs, Rng& rng, double eps = 1e-6) {
    for (Var& input : inputs) input->grad = Tensor(); // drop accumulation from earlier checks
    Var out = f(inputs);
    Tensor w = Tensor::randn(out->value.shape(), rng);
    Var loss = sum_all(mul(out, make_constant(w)));
    backward(loss);

    double worst = 0.0;
    for (Var& input : inputs) {
        for (int64_t j = 0; j < input->value.size(); ++j) {
            const double saved = input->value[j];
            input->value[j] = saved + eps;
            const double lp = (mul(f(inputs), make_constant(w)))->value.array().sum();
            input->value[j] = saved - eps;
            const double lm = (mul(f(inputs), make_constant(w)))->value.array().sum();
            input->value[j] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double analytic = input->grad.empty() ? 0.0 : input->grad[j];
            const double denom = std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
            worst = std::max(worst, std::fabs(numeric - analytic) / denom);
        }
    }
    return worst;
}

Var param_randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    return make_param(Tensor::randn(std::move(shape), rng, scale));
}

} // namespace

TEST_CASE("elementwise op gradients") {
    Rng rng(100);
    auto a = param_randn({3, 4}, rng);
    auto b = param_randn({3, 4}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return add(v[0], v[1]); }, {a, b}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return sub(v[0], v[1]); }, {a, b}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return mul(v[0], v[1]); }, {a, b}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return scale(v[0], -2.5); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return add_scalar(v[0], 0.7); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return tanh_op(v[0]); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return square(v[0]); }, {a}, rng) < 1e-6);
}

TEST_CASE("relu and abs gradients away from the kink") {
    Rng rng(101);
    Tensor t = Tensor::randn({4, 5}, rng);
    for (int64_t i = 0; i < t.size(); ++i)
        if (std::fabs(t[i]) < 0.05) t[i] = 0.1; // keep clear of the nondifferentiable point
    auto a = make_param(t);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return relu(v[0]); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return abs_op(v[0]); }, {a}, rng) < 1e-6);
}

TEST_CASE("log_clamped gradient and clamp behavior") {
    Rng rng(102);
    Tensor t({6});
    for (int i = 0; i < 6; ++i) t[i] = 0.05 + 0.2 * i;
    auto a = make_param(t);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return log_clamped(v[0], 1e-8); }, {a},
                         rng) < 1e-6);
    auto z = make_constant(Tensor::zeros({2}));
    Var lz = log_clamped(z, 1e-8);
    CHECK(lz->value[0] == doctest::Approx(std::log(1e-8)));
}

TEST_CASE("reduction and distance gradients") {
    Rng rng(103);
    auto a = param_randn({2, 3}, rng);
    auto b = param_randn({2, 3}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return sum_all(v[0]); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return mean_all(v[0]); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return l2_distance(v[0], v[1]); }, {a, b},
                         rng) < 1e-6);
}

TEST_CASE("shape op gradients") {
    Rng rng(104);
    auto a = param_randn({3, 4}, rng);
    auto b = param_randn({4}, rng);
    auto c = param_randn({4}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return reshape(v[0], {4, 3}); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return select_row(v[0], 2); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return stack_rows({v[0], v[1]}); }, {b, c},
                         rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return slice_last(v[0], 1, 2); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return pad_last(v[0], 7); }, {a}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return crop_last(v[0], 2); }, {a}, rng) < 1e-6);

    auto fa = param_randn({2, 3, 2, 4}, rng);
    auto fb = param_randn({2, 2, 2, 4}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return concat_channels(v[0], v[1]); },
                         {fa, fb}, rng) < 1e-6);
}

TEST_CASE("matmul and linear gradients") {
    Rng rng(105);
    auto a = param_randn({2, 3, 4}, rng);
    auto w = param_randn({4, 5}, rng);
    auto b = param_randn({5}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return matmul(v[0], v[1]); }, {a, w}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return linear(v[0], v[1], v[2]); },
                         {a, w, b}, rng) < 1e-6);
}

TEST_CASE("conv2d: identity kernel reproduces the input") {
    Tensor x({1, 1, 3, 4});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    Tensor w = Tensor::zeros({1, 1, 3, 3});
    w[4] = 1.0; // center tap
    Var out = conv2d(make_constant(x), make_constant(w), make_constant(Tensor::zeros({1})), 1, 1);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(out->value[i] == x[i]);
}

TEST_CASE("conv2d gradients (3x3 same and 1x1)") {
    Rng rng(106);
    auto x = param_randn({2, 3, 4, 5}, rng);
    auto w = param_randn({2, 3, 3, 3}, rng, 0.5);
    auto b = param_randn({2}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], 1, 1); },
                         {x, w, b}, rng) < 1e-6);
    auto w1 = param_randn({4, 3, 1, 1}, rng, 0.5);
    auto b1 = param_randn({4}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], 0, 0); },
                         {x, w1, b1}, rng) < 1e-6);
    CHECK(max_grad_error(
              [](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], 1, 1, true); },
              {x, w, b}, rng) < 1e-6);
}

TEST_CASE("conv2d: circular time padding wraps the first and last frames") {
    Tensor x({1, 1, 3, 1});
    x[0] = 1.0;
    x[1] = 2.0;
    x[2] = 4.0;
    Tensor w = Tensor::zeros({1, 1, 3, 1});
    w[0] = 1.0; // tap on the previous frame
    Var out = conv2d(make_constant(x), make_constant(w), make_constant(Tensor::zeros({1})), 1, 0,
                     true);
    CHECK(out->value[0] == 4.0); // frame -1 wraps to the last frame
    CHECK(out->value[1] == 1.0);
    CHECK(out->value[2] == 2.0);
}

TEST_CASE("maxpool2d: values and gradient") {
    Tensor x({1, 1, 2, 4});
    double vals[] = {1, 5, 2, 0, 3, -1, 7, 4};
    for (int i = 0; i < 8; ++i) x[i] = vals[i];
    Var out = maxpool2d(make_constant(x), 2, 2);
    CHECK(out->value.shape() == std::vector<int>{1, 1, 1, 2});
    CHECK(out->value[0] == 5.0);
    CHECK(out->value[1] == 7.0);

    Rng rng(107);
    auto xp = param_randn({2, 2, 4, 6}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return maxpool2d(v[0], 2, 2); }, {xp}, rng) < 1e-6);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return maxpool2d(v[0], 1, 2); }, {xp}, rng) < 1e-6);
}

TEST_CASE("upsample_freq repeats bins and routes gradients") {
    Tensor x({1, 1, 1, 3});
    x[0] = 1.0;
    x[1] = 2.0;
    x[2] = 3.0;
    Var out = upsample_freq(make_constant(x), 2);
    CHECK(out->value.shape() == std::vector<int>{1, 1, 1, 6});
    CHECK(out->value[0] == 1.0);
    CHECK(out->value[1] == 1.0);
    CHECK(out->value[4] == 3.0);

    Rng rng(108);
    auto xp = param_randn({2, 2, 3, 4}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return upsample_freq(v[0], 2); }, {xp}, rng) < 1e-6);
}

TEST_CASE("batch_norm: normalizes per channel and passes gradcheck") {
    Rng rng(109);
    Tensor rm = Tensor::zeros({3});
    Tensor rv = Tensor::full({3}, 1.0);
    auto x = param_randn({2, 3, 4, 5}, rng);
    auto gamma = make_param(Tensor::full({3}, 1.0));
    auto beta = make_param(Tensor::zeros({3}));

    Var out = batch_norm(x, gamma, beta, &rm, &rv, true);
    // Per-channel mean ~0, variance ~1 after normalization.
    const int plane = 4 * 5;
    for (int c = 0; c < 3; ++c) {
        double s = 0, ss = 0;
        for (int n = 0; n < 2; ++n)
            for (int i = 0; i < plane; ++i) {
                const double v = out->value[(n * 3 + c) * plane + i];
                s += v;
                ss += v * v;
            }
        const double mean = s / (2 * plane);
        CHECK(std::fabs(mean) < 1e-10);
        CHECK(ss / (2 * plane) == doctest::Approx(1.0).epsilon(1e-3));
    }

    auto g2 = param_randn({3}, rng);
    auto b2 = param_randn({3}, rng);
    CHECK(max_grad_error(
              [&rm, &rv](const std::vector<Var>& v) {
                  return batch_norm(v[0], v[1], v[2], &rm, &rv, true);
              },
              {x, g2, b2}, rng) < 1e-5);
    CHECK(max_grad_error(
              [&rm, &rv](const std::vector<Var>& v) {
                  return batch_norm(v[0], v[1], v[2], &rm, &rv, false);
              },
              {x, g2, b2}, rng) < 1e-6);
}

TEST_CASE("film_channel and film_time gradients") {
    Rng rng(110);
    auto x = param_randn({2, 3, 4, 5}, rng);
    auto gc = param_randn({2, 3}, rng);
    auto bc = param_randn({2, 3}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return film_channel(v[0], v[1], v[2]); },
                         {x, gc, bc}, rng) < 1e-6);
    auto gt = param_randn({2, 4, 3}, rng);
    auto bt = param_randn({2, 4, 3}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return film_time(v[0], v[1], v[2]); },
                         {x, gt, bt}, rng) < 1e-6);
}

TEST_CASE("softmax_last: rows sum to one, gradcheck passes") {
    Rng rng(111);
    auto x = param_randn({3, 7}, rng);
    Var out = softmax_last(x);
    for (int r = 0; r < 3; ++r) {
        double s = 0;
        for (int c = 0; c < 7; ++c) s += out->value[r * 7 + c];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(max_grad_error([](const std::vector<Var>& v) { return softmax_last(v[0]); }, {x}, rng) < 1e-6);
}

TEST_CASE("mean_time and frame_features gradients") {
    Rng rng(112);
    auto x3 = param_randn({2, 5, 3}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return mean_time(v[0]); }, {x3}, rng) < 1e-6);
    auto x4 = param_randn({2, 3, 4, 5}, rng);
    CHECK(max_grad_error([](const std::vector<Var>& v) { return frame_features(v[0]); }, {x4}, rng) < 1e-6);
}

TEST_CASE("backward accumulates when a node is reused") {
    auto a = make_param(Tensor::full({2}, 3.0));
    Var y = add(mul(a, a), a); // y = a^2 + a, dy/da = 2a + 1 = 7
    Var loss = sum_all(y);
    backward(loss);
    CHECK(a->grad[0] == doctest::Approx(7.0));
    CHECK(a->grad[1] == doctest::Approx(7.0));
}

TEST_CASE("shape mismatches raise errors") {
    Rng rng(113);
    auto a = param_randn({2, 3}, rng);
    auto b = param_randn({3, 2}, rng);
    CHECK_THROWS_AS(add(a, b), Error);
    CHECK_THROWS_AS(matmul(a, a), Error);
    auto x = param_randn({1, 2, 3, 4}, rng);
    auto g = param_randn({1, 3}, rng);
    CHECK_THROWS_AS(film_channel(x, g, g), Error);
}
