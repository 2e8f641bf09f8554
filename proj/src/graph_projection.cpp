#include "kadmm/graph_projection.hpp"

#include <cmath>

#include "eigen_map.hpp"
#include "kadmm/errors.hpp"

namespace kadmm {

FactorCache buildCache(ConstMatrixView z, std::size_t block) {
  if (!allFinite(z)) throw ConfigError("buildCache: non-finite feature block");
  FactorCache cache{block, DenseMatrix(z.cols, z.cols)};
  auto gram = detail::map(cache.lower.view());
  gram.noalias() = detail::map(z).transpose() * detail::map(z);
  gram.diagonal().array() += 1.0;
  // In-place factorization; eigenvalues are >= 1 so this cannot fail on finite input.
  Eigen::LLT<Eigen::Ref<detail::RowMatrix>> llt(gram);
  if (llt.info() != Eigen::Success) throw ConfigError("buildCache: Cholesky factorization failed");
  gram.triangularView<Eigen::StrictlyUpper>().setZero();
  return cache;
}

void solveCached(const FactorCache& cache, MatrixView rhs) {
  if (rhs.rows != cache.dim()) throw DimensionError("solveCached: rhs rows do not match the factor");
  const auto lower = detail::map(cache.lower.view());
  auto x = detail::map(rhs);
  lower.triangularView<Eigen::Lower>().solveInPlace(x);
  lower.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
}

GraphProjection graphProject(const FactorCache& cache, ConstMatrixView z, ConstMatrixView rhsW,
                             ConstMatrixView rhsO) {
  if (z.cols != cache.dim() || rhsW.rows != z.cols || rhsO.rows != z.rows || rhsW.cols != rhsO.cols)
    throw DimensionError("graphProject: shape mismatch");
  GraphProjection out{DenseMatrix(rhsW), DenseMatrix(z.rows, rhsW.cols)};
  multiplyTransposedAdd(z, rhsO, out.weights.view());
  solveCached(cache, out.weights.view());
  multiply(z, out.weights, out.outputs.view());
  return out;
}

double projectionResidual(ConstMatrixView z, ConstMatrixView w, ConstMatrixView o) {
  DenseMatrix zw = multiply(z, w);
  return std::sqrt(squaredDistance(zw, o));
}

}  // namespace kadmm
