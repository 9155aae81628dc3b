#include "umss/nn/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace umss::nn {

namespace {
// Parallelism lives at the batch level (see conv2d); nested GEMM threads
// only add contention at these tensor sizes.
struct EigenThreadSetup {
    EigenThreadSetup() { Eigen::setNbThreads(1); }
} eigen_thread_setup;
} // namespace

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        require(d >= 0, "negative tensor dimension");
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_size(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    require(shape_size(shape_) == static_cast<int64_t>(data_.size()),
            "tensor shape/data size mismatch");
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
    return t;
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
    require(shape_size(new_shape) == size(), "reshape size mismatch");
    Tensor t = *this;
    t.shape_ = std::move(new_shape);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace umss::nn
