#include "kadmm/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "eigen_map.hpp"
#include "kadmm/errors.hpp"
#include "kadmm/layout.hpp"
#include "kadmm/random.hpp"

namespace kadmm {

namespace {
constexpr std::uint32_t kOmegaStream = 0;
constexpr std::uint32_t kOffsetStream = 1;

Philox4x32::Key keyFor(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

Philox4x32::Counter counterFor(std::uint64_t index, std::size_t block, std::uint32_t stream) {
  return {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
          static_cast<std::uint32_t>(block), stream};
}
}  // namespace

TransformDescriptor TransformDescriptor::gaussian(std::size_t features, std::size_t blocks, double sigma,
                                                  std::uint64_t seed) {
  TransformDescriptor desc{KernelKind::gaussian, sigma, balancedOffsets(features, blocks), seed};
  desc.validate();
  return desc;
}

void TransformDescriptor::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("kernel bandwidth sigma must be positive");
  if (colOffsets.size() < 2) throw ConfigError("transform needs at least one column block");
  validateOffsets(colOffsets, colOffsets.back(), "column offsets");
  if (blocks() > 0xFFFFFFFFu) throw ConfigError("too many column blocks");
}

namespace {

void checkBlock(const TransformDescriptor& desc, std::size_t j) {
  if (j >= desc.blocks())
    throw ConfigError("column block " + std::to_string(j) + " out of range (C=" + std::to_string(desc.blocks()) +
                      ")");
}

// Column c of omega: entries (2p, 2p+1) come from Gaussian pair c*ceil(d/2) + p,
// so any column can be generated without the others.
void omegaColumn(const Philox4x32::Key& key, std::size_t j, std::size_t c, double invSigma, std::span<double> out,
                 std::size_t stride) {
  const std::size_t d = out.empty() ? 0 : (out.size() - 1) / stride + 1;
  const std::uint64_t pairsPerColumn = (d + 1) / 2;
  for (std::uint64_t p = 0; p < pairsPerColumn; ++p) {
    const auto [g0, g1] = gaussianPair(counterFor(c * pairsPerColumn + p, j, kOmegaStream), key);
    out[2 * p * stride] = g0 * invSigma;
    if (2 * p + 1 < d) out[(2 * p + 1) * stride] = g1 * invSigma;
  }
}

double offsetEntry(const Philox4x32::Key& key, std::size_t j, std::size_t c) {
  const auto r = Philox4x32::generate(counterFor(c, j, kOffsetStream), key);
  return 2.0 * std::numbers::pi * uniformFromBits(r[0], r[1]);
}

constexpr std::size_t kPanel = 16;

}  // namespace

BlockTransformParams blockParams(const TransformDescriptor& desc, std::size_t j, std::size_t inputDim) {
  checkBlock(desc, j);
  const std::size_t sj = desc.blockSize(j);
  const auto key = keyFor(desc.seed);
  BlockTransformParams params{DenseMatrix(inputDim, sj), std::vector<double>(sj)};
  auto omega = params.omega.data();
  for (std::size_t c = 0; c < sj; ++c) {
    if (inputDim > 0) omegaColumn(key, j, c, 1.0 / desc.sigma, omega.subspan(c, (inputDim - 1) * sj + 1), sj);
    params.offset[c] = offsetEntry(key, j, c);
  }
  return params;
}

void transformInto(const TransformDescriptor& desc, std::size_t j, ConstMatrixView xi, MatrixView out) {
  checkBlock(desc, j);
  const std::size_t sj = desc.blockSize(j);
  const std::size_t d = xi.cols;
  if (d == 0) throw DimensionError("transform: input has no columns");
  if (out.rows != xi.rows || out.cols != sj) throw DimensionError("transform: output shape");
  const auto key = keyFor(desc.seed);
  const double invSigma = 1.0 / desc.sigma;
  // Omega is generated kPanel columns at a time and never held in full.
  std::vector<double> panel(d * kPanel);
  std::vector<double> offset(sj);
  const auto x = detail::map(xi);
  auto z = detail::map(out);
  for (std::size_t c0 = 0; c0 < sj; c0 += kPanel) {
    const std::size_t w = std::min(kPanel, sj - c0);
    for (std::size_t c = 0; c < w; ++c) {
      omegaColumn(key, j, c0 + c, invSigma, std::span(panel).subspan(c, (d - 1) * w + 1), w);
      offset[c0 + c] = offsetEntry(key, j, c0 + c);
    }
    const detail::ConstMap omega(panel.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(w));
    z.middleCols(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(w)).noalias() = x * omega;
  }
  const double amplitude = std::sqrt(2.0 / static_cast<double>(desc.features()));
  for (std::size_t r = 0; r < out.rows; ++r) {
    double* row = out.data.data() + r * out.cols;
    for (std::size_t c = 0; c < out.cols; ++c) row[c] = amplitude * std::cos(row[c] + offset[c]);
  }
}

void transformInto(const TransformDescriptor& desc, const BlockTransformParams& params, ConstMatrixView xi,
                   MatrixView out) {
  if (xi.cols != params.omega.rows())
    throw DimensionError("transform: input has " + std::to_string(xi.cols) + " columns, expected " +
                         std::to_string(params.omega.rows()));
  if (out.rows != xi.rows || out.cols != params.omega.cols()) throw DimensionError("transform: output shape");
  multiply(xi, params.omega, out);
  const double amplitude = std::sqrt(2.0 / static_cast<double>(desc.features()));
  for (std::size_t r = 0; r < out.rows; ++r) {
    double* row = out.data.data() + r * out.cols;
    for (std::size_t c = 0; c < out.cols; ++c) row[c] = amplitude * std::cos(row[c] + params.offset[c]);
  }
}

DenseMatrix transform(const TransformDescriptor& desc, ConstMatrixView xi, std::size_t j) {
  checkBlock(desc, j);
  DenseMatrix z(xi.rows, desc.blockSize(j));
  transformInto(desc, j, xi, z.view());
  return z;
}

DenseMatrix transformAll(const TransformDescriptor& desc, ConstMatrixView x) {
  std::vector<DenseMatrix> blocks;
  blocks.reserve(desc.blocks());
  for (std::size_t j = 0; j < desc.blocks(); ++j) blocks.push_back(transform(desc, x, j));
  return concatColumns(blocks);
}

double gaussianKernel(std::span<const double> x, std::span<const double> y, double sigma) {
  if (x.size() != y.size()) throw DimensionError("gaussianKernel: dimension mismatch");
  double dist = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) dist += (x[k] - y[k]) * (x[k] - y[k]);
  return std::exp(-dist / (2.0 * sigma * sigma));
}

ApproximationStats approximationReport(const TransformDescriptor& desc, ConstMatrixView x, std::size_t pairs,
                                       std::uint64_t sampleSeed) {
  if (pairs == 0) throw ConfigError("approximationReport needs at least one pair");
  if (x.rows == 0) throw DimensionError("approximationReport: empty sample");
  desc.validate();
  std::mt19937_64 rng(sampleSeed);
  std::uniform_int_distribution<std::size_t> pick(0, x.rows - 1);
  // Rows 2k and 2k+1 of `sample` form pair k.
  DenseMatrix sample(2 * pairs, x.cols);
  for (std::size_t k = 0; k < 2 * pairs; ++k) {
    const auto src = x.row(pick(rng));
    std::copy(src.begin(), src.end(), sample.data().begin() + k * x.cols);
  }
  std::vector<double> approx(pairs, 0.0);
  for (std::size_t j = 0; j < desc.blocks(); ++j) {
    const DenseMatrix z = transform(desc, sample, j);
    for (std::size_t k = 0; k < pairs; ++k) {
      const auto a = z.row(2 * k), b = z.row(2 * k + 1);
      double dot = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * b[c];
      approx[k] += dot;
    }
  }
  ApproximationStats stats;
  stats.pairs = pairs;
  double sumSq = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const double exact = gaussianKernel(sample.row(2 * k), sample.row(2 * k + 1), desc.sigma);
    const double err = std::abs(approx[k] - exact);
    stats.maxAbsErr = std::max(stats.maxAbsErr, err);
    sumSq += err * err;
  }
  stats.rmsErr = std::sqrt(sumSq / static_cast<double>(pairs));
  return stats;
}

}  // namespace kadmm
