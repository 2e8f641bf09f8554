#ifndef KADMM_SRC_EIGEN_MAP_HPP
#define KADMM_SRC_EIGEN_MAP_HPP

#include <Eigen/Dense>

#include "kadmm/matrix.hpp"

namespace kadmm::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

inline ConstMap map(ConstMatrixView v) {
  return {v.data.data(), static_cast<Eigen::Index>(v.rows), static_cast<Eigen::Index>(v.cols)};
}
inline MutMap map(MatrixView v) {
  return {v.data.data(), static_cast<Eigen::Index>(v.rows), static_cast<Eigen::Index>(v.cols)};
}

}  // namespace kadmm::detail

#endif  // KADMM_SRC_EIGEN_MAP_HPP
