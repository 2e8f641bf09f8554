#ifndef KADMM_GRAPH_PROJECTION_HPP
#define KADMM_GRAPH_PROJECTION_HPP

#include <cstddef>

#include "kadmm/matrix.hpp"

namespace kadmm {

/// Lower Cholesky factor L of Z^T Z + I for one block, L L^T = Z^T Z + I.
/// Built once and never modified afterwards.
struct FactorCache {
  std::size_t block = 0;
  DenseMatrix lower;  // s_j x s_j, zero above the diagonal

  std::size_t dim() const noexcept { return lower.rows(); }
  bool ready() const noexcept { return !lower.empty(); }
};

FactorCache buildCache(ConstMatrixView z, std::size_t block = 0);

/// rhs <- (Z^T Z + I)^{-1} rhs, two triangular solves in place.
void solveCached(const FactorCache& cache, MatrixView rhs);

struct GraphProjection {
  DenseMatrix weights;  // s_j x m
  DenseMatrix outputs;  // n_i x m
};

/// Euclidean projection of (rhsO, rhsW) onto {(O, W) : O = Z W}:
/// W = (Z^T Z + I)^{-1} (rhsW + Z^T rhsO), O = Z W.
GraphProjection graphProject(const FactorCache& cache, ConstMatrixView z, ConstMatrixView rhsW,
                             ConstMatrixView rhsO);

/// ||O - Z W||_fro.
double projectionResidual(ConstMatrixView z, ConstMatrixView w, ConstMatrixView o);

}  // namespace kadmm

#endif  // KADMM_GRAPH_PROJECTION_HPP
