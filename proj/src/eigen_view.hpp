#pragma once

#include <Eigen/Core>

#include "ct3d/tensor.hpp"

namespace ct3d::num::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

inline MatrixView view(Tensor2& t) {
  return MatrixView(t.data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
}

inline ConstMatrixView view(const Tensor2& t) {
  return ConstMatrixView(t.data(), static_cast<Eigen::Index>(t.rows()),
                         static_cast<Eigen::Index>(t.cols()));
}

}  // namespace ct3d::num::detail
