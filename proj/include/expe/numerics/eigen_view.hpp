#pragma once

#include <Eigen/Core>

namespace expe::num {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatView = Eigen::Map<RowMatrix<T>>;

template <typename T>
using ConstMatView = Eigen::Map<const RowMatrix<T>>;

// Row-major matrix whose consecutive rows are `stride` elements apart.
template <typename T>
using StridedView = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;

template <typename T>
using ConstStridedView = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;

}  // namespace expe::num
