#include "doctest.h"

#include <cmath>
#include <random>

#include "kadmm/errors.hpp"
#include "kadmm/prox.hpp"
#include "oracle.hpp"

using namespace kadmm;

namespace {

double objectiveAt(LossKind loss, double x, double v, double y, double lambda) {
  return 0.5 * (x - v) * (x - v) + lambda * lossValue(loss, y, x);
}

}  // namespace

TEST_CASE("scalar proxes agree with a numerical minimizer") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(-5, 5), lam(0, 3);
  std::bernoulli_distribution sign;
  for (LossKind loss : {LossKind::squared, LossKind::hinge, LossKind::absolute}) {
    CAPTURE(lossName(loss));
    for (int i = 0; i < 500; ++i) {
      const double vi = v(rng), li = lam(rng);
      const double yi = loss == LossKind::hinge ? (sign(rng) ? 1.0 : -1.0) : v(rng);
      const double x = proxLoss(loss, vi, yi, li);
      CHECK(std::abs(x - oracle::bruteForceProx(loss, vi, yi, li)) <= 1e-7);
      // no nearby point does better
      for (double dx : {-1e-4, 1e-4}) CHECK(objectiveAt(loss, x, vi, yi, li) <= objectiveAt(loss, x + dx, vi, yi, li));
    }
  }
}

TEST_CASE("hinge prox branches") {
  // y*v > 1: already outside the margin, unchanged
  CHECK(proxHinge(1.5, 1.0, 0.5) == 1.5);
  CHECK(proxHinge(-2.0, -1.0, 0.5) == -2.0);
  // y*v < 1 - lambda: shifted by lambda*y
  CHECK(proxHinge(0.25, 1.0, 0.5) == 0.75);
  CHECK(proxHinge(0.0, -1.0, 0.5) == -0.5);
  // otherwise clamped onto the margin
  CHECK(proxHinge(0.75, 1.0, 0.5) == 1.0);
  CHECK(proxHinge(-0.6, -1.0, 0.5) == -1.0);
  // boundaries
  CHECK(proxHinge(1.0, 1.0, 0.5) == 1.0);
  CHECK(proxHinge(0.5, 1.0, 0.5) == 1.0);
  CHECK_THROWS_AS(proxHinge(0.0, 0.5, 1.0), LabelError);
}

TEST_CASE("squared and absolute closed forms") {
  CHECK(proxSquared(3.0, 1.0, 0.5) == 2.0);
  CHECK(proxSquared(3.0, 1.0, 0.0) == 3.0);
  CHECK(proxAbsolute(3.0, 1.0, 0.5) == 2.5);
  CHECK(proxAbsolute(1.2, 1.0, 0.5) == 1.0);
  CHECK(proxAbsolute(-3.0, 1.0, 0.5) == -2.5);
  CHECK(softThreshold(0.3, 0.5) == 0.0);
  CHECK(softThreshold(-0.8, 0.5) == doctest::Approx(-0.3));
  CHECK_THROWS_AS(proxSquared(0, 0, -1), ConfigError);
  CHECK_THROWS_AS(proxAbsolute(0, 0, std::nan("")), ConfigError);
}

TEST_CASE("matrix prox is entrywise and may run in place") {
  DenseMatrix a{{1.0, -2.0}, {0.5, 3.0}};
  const DenseMatrix y{{1.0, -1.0}, {1.0, 1.0}};
  const auto out = proxLossMatrix(a, y, {LossKind::hinge}, 0.5);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(out(r, c) == proxHinge(a(r, c), y(r, c), 0.5));
  proxLossInto(a, y, {LossKind::hinge}, 0.5, a.view());
  CHECK(a == out);
  CHECK_THROWS_AS(proxLossMatrix(a, DenseMatrix(1, 2), {LossKind::squared}, 1.0), DimensionError);
}

TEST_CASE("regularizer prox shrinks uniformly") {
  const DenseMatrix w{{2.0, -4.0}};
  const auto out = proxRegularizer(w, {1.0}, 0.5);
  CHECK(out == DenseMatrix{{1.0, -2.0}});
}

TEST_CASE("loss names") {
  CHECK(parseLossKind("hinge") == LossKind::hinge);
  CHECK(parseLossKind("l1") == LossKind::absolute);
  CHECK_THROWS_AS(parseLossKind("logistic"), ConfigError);
}
