#include <Eigen/Core>

#include "ganlab/error.hpp"
#include "ganlab/tensor.hpp"

namespace ganlab::kernels {

namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Operands are staged in Eigen-owned storage. Eigen picks its vectorized
// split from pointer alignment, so heap addresses would otherwise leak into
// the summation order.
template <typename T>
RowMajor<T> staged(const Tensor<T>& t) {
    return Eigen::Map<const RowMajor<T>>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                                         static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
Tensor<T> unstage(const RowMajor<T>& m) {
    return Tensor<T>({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                     std::vector<T>(m.data(), m.data() + m.size()));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || b.rows() != a.cols())
        throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    RowMajor<T> c(a.rows(), b.cols());
    c.noalias() = staged(a) * staged(b);
    return unstage(c);
}

template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || b.rows() != a.rows())
        throw ShapeError("matmul_tn: " + shape_str(a.shape()) + "^T x " + shape_str(b.shape()));
    RowMajor<T> c(a.cols(), b.cols());
    c.noalias() = staged(a).transpose() * staged(b);
    return unstage(c);
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
        throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
    RowMajor<T> c(a.rows(), b.rows());
    c.noalias() = staged(a) * staged(b).transpose();
    return unstage(c);
}

template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> matmul_tn(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul_tn(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> matmul_nt(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul_nt(const Tensor<double>&, const Tensor<double>&);

}  // namespace ganlab::kernels
