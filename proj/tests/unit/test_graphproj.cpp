#include "doctest.h"

#include <Eigen/Dense>

#include "kadmm/errors.hpp"
#include "kadmm/graph_projection.hpp"
#include "test_data.hpp"

using namespace kadmm;

namespace {

Eigen::MatrixXd eig(ConstMatrixView v) {
  Eigen::MatrixXd out(v.rows, v.cols);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t c = 0; c < v.cols; ++c) out(r, c) = v(r, c);
  return out;
}

// Distance of (O, W) from (rhsO, rhsW), the quantity the projection minimizes.
double distance(ConstMatrixView o, ConstMatrixView w, ConstMatrixView rhsO, ConstMatrixView rhsW) {
  return squaredDistance(o, rhsO) + squaredDistance(w, rhsW);
}

}  // namespace

TEST_CASE("projection with Z = 0 keeps W and zeroes O") {
  std::mt19937_64 rng(1);
  const DenseMatrix z(4, 3);
  const auto rw = testing::gaussianMatrix(3, 2, rng), ro = testing::gaussianMatrix(4, 2, rng);
  const auto p = graphProject(buildCache(z), z, rw, ro);
  CHECK(maxAbsDiff(p.weights, rw) <= 1e-15);
  CHECK(maxAbs(p.outputs) == 0.0);
}

TEST_CASE("projection with Z = I averages") {
  std::mt19937_64 rng(2);
  const DenseMatrix z{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const auto rw = testing::gaussianMatrix(3, 2, rng), ro = testing::gaussianMatrix(3, 2, rng);
  const auto p = graphProject(buildCache(z), z, rw, ro);
  for (std::size_t i = 0; i < rw.size(); ++i) {
    CHECK(p.weights.data()[i] == doctest::Approx(0.5 * (rw.data()[i] + ro.data()[i])));
    CHECK(p.outputs.data()[i] == p.weights.data()[i]);
  }
}

TEST_CASE("projection matches a least-squares oracle and is optimal") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> dim(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = dim(rng), s = dim(rng), m = 1 + trial % 3;
    const auto z = testing::gaussianMatrix(n, s, rng);
    const auto rw = testing::gaussianMatrix(s, m, rng), ro = testing::gaussianMatrix(n, m, rng);
    const auto p = graphProject(buildCache(z), z, rw, ro);

    // min ||[Z; I] W - [rhsO; rhsW]|| solved by QR
    Eigen::MatrixXd a(n + s, s), b(n + s, m);
    a << eig(z), Eigen::MatrixXd::Identity(s, s);
    b << eig(ro), eig(rw);
    const Eigen::MatrixXd w = a.colPivHouseholderQr().solve(b);
    CHECK((eig(p.weights) - w).norm() <= 1e-10 * (1.0 + w.norm()));
    CHECK(projectionResidual(z, p.weights, p.outputs) <= 1e-12 * (1.0 + frobeniusNorm(p.outputs)));

    const double best = distance(p.outputs, p.weights, ro, rw);
    for (int k = 0; k < 10; ++k) {
      auto w2 = p.weights;
      const auto step = testing::gaussianMatrix(s, m, rng, 1e-3);
      axpy(1.0, step, w2.view());
      CHECK(best <= distance(multiply(z, w2), w2, ro, rw));
    }
  }
}

TEST_CASE("cached factor reproduces Z^T Z + I") {
  std::mt19937_64 rng(4);
  const auto z = testing::gaussianMatrix(9, 5, rng);
  const auto cache = buildCache(z, 3);
  CHECK(cache.block == 3);
  CHECK(cache.ready());
  const Eigen::MatrixXd l = eig(cache.lower);
  const Eigen::MatrixXd g = eig(z).transpose() * eig(z) + Eigen::MatrixXd::Identity(5, 5);
  CHECK((l * l.transpose() - g).norm() <= 1e-12 * g.norm());
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = r + 1; c < 5; ++c) CHECK(cache.lower(r, c) == 0.0);

  auto rhs = testing::gaussianMatrix(5, 2, rng);
  const auto original = rhs;
  solveCached(cache, rhs.view());
  CHECK((g * eig(rhs) - eig(original)).norm() <= 1e-12 * (1.0 + eig(original).norm()));
}

TEST_CASE("shape mismatches are rejected") {
  const DenseMatrix z(4, 3);
  const auto cache = buildCache(z);
  CHECK_THROWS_AS(graphProject(cache, z, DenseMatrix(2, 1), DenseMatrix(4, 1)), DimensionError);
  CHECK_THROWS_AS(graphProject(cache, z, DenseMatrix(3, 1), DenseMatrix(4, 2)), DimensionError);
}
