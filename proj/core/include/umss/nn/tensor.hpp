#pragma once

#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <new>
#include <vector>

#include <Eigen/Core>

#include "umss/common.hpp"
#include "umss/rng.hpp"

namespace umss::nn {

// 32-byte aligned storage. Vector kernels pick different prologue paths per
// pointer alignment; pinning the alignment keeps results bitwise
// reproducible across allocations.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}
    T* allocate(size_t n) {
        void* p = ::operator new(n * sizeof(T), std::align_val_t(32));
        return static_cast<T*>(p);
    }
    void deallocate(T* p, size_t) noexcept { ::operator delete(p, std::align_val_t(32)); }
    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

using AlignedDoubles = std::vector<double, AlignedAllocator<double>>;

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<MatrixRM>;
using CMapMat = Eigen::Map<const MatrixRM>;
using MapArr = Eigen::Map<Eigen::ArrayXd>;
using CMapArr = Eigen::Map<const Eigen::ArrayXd>;

// Dense row-major tensor of doubles. Shapes are small vectors of ints;
// data is flat and viewed through Eigen maps for linear algebra.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    MapArr array() { return MapArr(data_.data(), size()); }
    CMapArr array() const { return CMapArr(data_.data(), size()); }

    // 2-D matrix view with an explicit split of the shape into rows x cols.
    MapMat matrix(int64_t rows, int64_t cols) {
        require(rows * cols == size(), "tensor matrix view size mismatch");
        return MapMat(data_.data(), rows, cols);
    }
    CMapMat matrix(int64_t rows, int64_t cols) const {
        require(rows * cols == size(), "tensor matrix view size mismatch");
        return CMapMat(data_.data(), rows, cols);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    Tensor reshaped(std::vector<int> new_shape) const;

    bool all_finite() const;

private:
    std::vector<int> shape_;
    AlignedDoubles data_;
};

int64_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

} // namespace umss::nn
