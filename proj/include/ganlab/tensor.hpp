#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ganlab/error.hpp"

namespace ganlab {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ')';
    return os.str();
}

// Dense row-major array. Rank-2 tensors are (rows, cols); a scalar is {1}.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
        check_extents();
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_str(shape_));
    }

    static Tensor scalar(T value) { return Tensor({1}, std::vector<T>{value}); }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> data) {
        return Tensor({rows, cols}, std::move(data));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const {
        require_rank2();
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank2();
        return shape_[1];
    }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * shape_[1], shape_[1]); }
    std::span<const T> row(std::size_t r) const {
        return std::span<const T>(data_).subspan(r * shape_[1], shape_[1]);
    }

    T item() const {
        if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
        return data_[0];
    }

    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != numel())
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        return Tensor(std::move(shape), data_);
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T x) { return std::isfinite(x); });
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(), [](T x) { return static_cast<U>(x); });
        return Tensor<U>(shape_, std::move(out));
    }

    // Rows `indices` of a rank-2 tensor, in the given order.
    Tensor gather_rows(std::span<const std::size_t> indices) const {
        const std::size_t c = cols();
        Tensor out({indices.size(), c});
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] >= shape_[0]) throw ShapeError("row index out of range");
            std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * c), c,
                        out.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
        }
        return out;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void check_extents() const {
        for (std::size_t e : shape_)
            if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
    }
    void require_rank2() const {
        if (shape_.size() != 2) throw ShapeError("expected a matrix, got shape " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<T> data_;
};

// Dense kernels. Reductions run in a fixed order for a given shape, so
// results are bit-reproducible within a build. The matrix products are
// backed by Eigen (src/kernels.cpp).
namespace kernels {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// C = A B
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// C = A^T B
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b);

// C = A B^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    const std::size_t r = a.rows(), c = a.cols();
    Tensor<T> t({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) t(j, i) = a(i, j);
    return t;
}

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x) {
    require_same_shape(acc, x, "add");
    auto a = acc.data();
    auto b = x.data();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    T s{0};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
T l2_norm(std::span<const T> a) {
    return std::sqrt(dot(a, a));
}

template <typename T>
T sum(std::span<const T> a) {
    T s{0};
    for (T x : a) s += x;
    return s;
}

}  // namespace kernels
}  // namespace ganlab
