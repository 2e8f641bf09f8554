#ifndef KADMM_FEATURES_HPP
#define KADMM_FEATURES_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kadmm/matrix.hpp"

namespace kadmm {

enum class KernelKind : std::uint32_t { gaussian = 0 };

/// Implicit representation of the random feature map z(.): everything needed
/// to regenerate any block Z_ij = T[X_i, j] on demand.
struct TransformDescriptor {
  KernelKind kernel = KernelKind::gaussian;
  double sigma = 1.0;                   // bandwidth
  std::vector<std::size_t> colOffsets;  // C + 1 offsets over s features
  std::uint64_t seed = 0;

  /// Balanced column blocks.
  static TransformDescriptor gaussian(std::size_t features, std::size_t blocks, double sigma, std::uint64_t seed);

  std::size_t features() const noexcept { return colOffsets.empty() ? 0 : colOffsets.back(); }
  std::size_t blocks() const noexcept { return colOffsets.empty() ? 0 : colOffsets.size() - 1; }
  std::size_t blockSize(std::size_t j) const { return colOffsets.at(j + 1) - colOffsets.at(j); }
  void validate() const;

  friend bool operator==(const TransformDescriptor&, const TransformDescriptor&) = default;
};

/// Random parameters of column block j: omega is d x s_j with N(0, 1/sigma^2)
/// entries, offset holds s_j phases uniform on [0, 2*pi).
struct BlockTransformParams {
  DenseMatrix omega;
  std::vector<double> offset;
};

/// Deterministic in (seed, j, d, s_j); blocks draw from disjoint Philox streams.
BlockTransformParams blockParams(const TransformDescriptor& desc, std::size_t j, std::size_t inputDim);

/// out = sqrt(2/s) * cos(xi * omega + 1 b^T), out is n_i x s_j. Omega is
/// regenerated in narrow column panels, so only O(d) scratch is used.
void transformInto(const TransformDescriptor& desc, std::size_t j, ConstMatrixView xi, MatrixView out);
/// Same map from explicitly materialized parameters.
void transformInto(const TransformDescriptor& desc, const BlockTransformParams& params, ConstMatrixView xi,
                   MatrixView out);
DenseMatrix transform(const TransformDescriptor& desc, ConstMatrixView xi, std::size_t j);

/// All s features of every row of x (column blocks concatenated). Intended for
/// small inputs and tests; the solver never materializes this.
DenseMatrix transformAll(const TransformDescriptor& desc, ConstMatrixView x);

/// exp(-||x - y||^2 / (2 sigma^2)).
double gaussianKernel(std::span<const double> x, std::span<const double> y, double sigma);

struct ApproximationStats {
  double maxAbsErr = 0.0;
  double rmsErr = 0.0;
  std::size_t pairs = 0;
};

/// Compares z(x)^T z(y) with the exact kernel over `pairs` row pairs drawn
/// uniformly (with replacement) from x.
ApproximationStats approximationReport(const TransformDescriptor& desc, ConstMatrixView x, std::size_t pairs,
                                       std::uint64_t sampleSeed = 0);

}  // namespace kadmm

#endif  // KADMM_FEATURES_HPP
