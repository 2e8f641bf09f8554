#ifndef KADMM_PROX_HPP
#define KADMM_PROX_HPP

#include <string_view>

#include "kadmm/matrix.hpp"

namespace kadmm {

enum class LossKind { squared, hinge, absolute };

LossKind parseLossKind(std::string_view name);
std::string_view lossName(LossKind kind);

/// Per-entry loss V(y, o). Hinge expects y in {-1, +1}.
struct LossSpec {
  LossKind kind = LossKind::squared;
};

/// r(W) = ||W||_fro^2, weighted by lambda in the objective.
struct RegularizerSpec {
  double lambda = 0.0;
};

/// Value of the per-entry loss: (y-o)^2, max(1 - y*o, 0) or |y - o|.
double lossValue(LossKind kind, double y, double output);

double softThreshold(double t, double lambda);

// Scalar proximal maps: argmin_x 1/2 (x - v)^2 + lambda * V(y, x).

/// v if y*v > 1; v + lambda*y if y*v < 1 - lambda; y otherwise.
double proxHinge(double v, double y, double lambda);
/// (v + 2*lambda*y) / (1 + 2*lambda).
double proxSquared(double v, double y, double lambda);
/// y + softThreshold(v - y, lambda).
double proxAbsolute(double v, double y, double lambda);

double proxLoss(LossKind kind, double v, double y, double lambda);

/// Entrywise prox of the loss: out(r,c) = prox(a(r,c), y(r,c), scale).
/// `out` may alias `a`.
void proxLossInto(ConstMatrixView a, ConstMatrixView y, LossSpec loss, double scale, MatrixView out);
DenseMatrix proxLossMatrix(ConstMatrixView a, ConstMatrixView y, LossSpec loss, double scale);

/// prox of scale * ||W||_fro^2: W / (1 + 2*scale).
void proxRegularizerInto(ConstMatrixView w, double scale, MatrixView out);
DenseMatrix proxRegularizer(ConstMatrixView w, RegularizerSpec reg, double scale);

}  // namespace kadmm

#endif  // KADMM_PROX_HPP
