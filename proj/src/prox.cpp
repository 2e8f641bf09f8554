#include "kadmm/prox.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kadmm/errors.hpp"

namespace kadmm {

LossKind parseLossKind(std::string_view name) {
  if (name == "squared") return LossKind::squared;
  if (name == "hinge") return LossKind::hinge;
  if (name == "absolute" || name == "l1") return LossKind::absolute;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

std::string_view lossName(LossKind kind) {
  switch (kind) {
    case LossKind::squared: return "squared";
    case LossKind::hinge: return "hinge";
    case LossKind::absolute: return "absolute";
  }
  return "unknown";
}

namespace {
void checkScale(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("prox scale must be finite and nonnegative");
}
void checkHingeLabel(double y) {
  if (y != 1.0 && y != -1.0) throw LabelError("hinge loss needs targets in {-1, +1}, got " + std::to_string(y));
}
}  // namespace

double lossValue(LossKind kind, double y, double output) {
  switch (kind) {
    case LossKind::squared: return (y - output) * (y - output);
    case LossKind::hinge: return std::max(1.0 - y * output, 0.0);
    case LossKind::absolute: return std::abs(y - output);
  }
  return 0.0;
}

double softThreshold(double t, double lambda) {
  if (t > lambda) return t - lambda;
  if (t < -lambda) return t + lambda;
  return 0.0;
}

double proxHinge(double v, double y, double lambda) {
  checkScale(lambda);
  checkHingeLabel(y);
  const double margin = y * v;
  if (margin > 1.0) return v;
  if (margin < 1.0 - lambda) return v + lambda * y;
  return y;
}

double proxSquared(double v, double y, double lambda) {
  checkScale(lambda);
  return (v + 2.0 * lambda * y) / (1.0 + 2.0 * lambda);
}

double proxAbsolute(double v, double y, double lambda) {
  checkScale(lambda);
  return y + softThreshold(v - y, lambda);
}

double proxLoss(LossKind kind, double v, double y, double lambda) {
  switch (kind) {
    case LossKind::squared: return proxSquared(v, y, lambda);
    case LossKind::hinge: return proxHinge(v, y, lambda);
    case LossKind::absolute: return proxAbsolute(v, y, lambda);
  }
  return v;
}

void proxLossInto(ConstMatrixView a, ConstMatrixView y, LossSpec loss, double scale, MatrixView out) {
  if (a.rows != y.rows || a.cols != y.cols || out.rows != a.rows || out.cols != a.cols)
    throw DimensionError("proxLoss: shape mismatch");
  checkScale(scale);
  for (std::size_t k = 0; k < a.data.size(); ++k) out.data[k] = proxLoss(loss.kind, a.data[k], y.data[k], scale);
}

DenseMatrix proxLossMatrix(ConstMatrixView a, ConstMatrixView y, LossSpec loss, double scale) {
  DenseMatrix out(a.rows, a.cols);
  proxLossInto(a, y, loss, scale, out.view());
  return out;
}

void proxRegularizerInto(ConstMatrixView w, double scale, MatrixView out) {
  if (out.rows != w.rows || out.cols != w.cols) throw DimensionError("proxRegularizer: shape mismatch");
  checkScale(scale);
  const double shrink = 1.0 / (1.0 + 2.0 * scale);
  for (std::size_t k = 0; k < w.data.size(); ++k) out.data[k] = w.data[k] * shrink;
}

DenseMatrix proxRegularizer(ConstMatrixView w, RegularizerSpec /*reg*/, double scale) {
  DenseMatrix out(w.rows, w.cols);
  proxRegularizerInto(w, scale, out.view());
  return out;
}

}  // namespace kadmm
