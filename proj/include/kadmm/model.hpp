#ifndef KADMM_MODEL_HPP
#define KADMM_MODEL_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kadmm/dataset.hpp"
#include "kadmm/features.hpp"
#include "kadmm/matrix.hpp"
#include "kadmm/prox.hpp"

namespace kadmm {

/// Trained predictor f(x) = W^T z(x): consensus weights plus the recipe for z.
struct Model {
  DenseMatrix weights;  // s x m
  TransformDescriptor transform;
  std::size_t inputDim = 0;
  LossKind loss = LossKind::squared;
  LabelEncoding labels;

  std::size_t features() const noexcept { return weights.rows(); }
  std::size_t outputs() const noexcept { return weights.cols(); }
  /// Throws ModelFormatError when the pieces do not fit together.
  void validate() const;
};

/// Binary layout, all little-endian:
///   "KADMMMDL" u32 version u32 loss u32 kernel u32 labelMode
///   u64 inputDim u64 s u64 m f64 sigma u64 seed
///   u64 C, (C+1) x u64 column offsets
///   u64 classes, classes x f64 labels
///   s*m x f64 weights, row-major
std::vector<unsigned char> serializeModel(const Model& model);
Model deserializeModel(std::span<const unsigned char> bytes);

void saveModel(const std::string& path, const Model& model);
Model loadModel(const std::string& path);

}  // namespace kadmm

#endif  // KADMM_MODEL_HPP
