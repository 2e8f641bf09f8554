#include "oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "kadmm/errors.hpp"

namespace kadmm::oracle {

namespace {

using Mat = Eigen::MatrixXd;

Mat toEigen(ConstMatrixView v) {
  Mat out(v.rows, v.cols);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t c = 0; c < v.cols; ++c) out(r, c) = v(r, c);
  return out;
}

DenseMatrix fromEigen(const Mat& m) {
  DenseMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

void guard(std::size_t value, std::size_t limit, const char* what) {
  if (value > limit)
    throw SizeGuardError(std::string(what) + " = " + std::to_string(value) + " exceeds the oracle limit " +
                         std::to_string(limit));
}

double lossOf(LossKind loss, double y, double o) {
  switch (loss) {
    case LossKind::squared: return (y - o) * (y - o);
    case LossKind::hinge: return std::max(0.0, 1.0 - y * o);
    case LossKind::absolute: return std::abs(y - o);
  }
  return 0.0;
}

Mat proxMatrix(LossKind loss, const Mat& v, const Mat& y, double lambda) {
  Mat out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r)
    for (Eigen::Index c = 0; c < v.cols(); ++c) out(r, c) = referenceProx(loss, v(r, c), y(r, c), lambda);
  return out;
}

}  // namespace

double referenceProx(LossKind loss, double v, double y, double lambda) {
  switch (loss) {
    case LossKind::squared: return (v + 2.0 * lambda * y) / (1.0 + 2.0 * lambda);
    case LossKind::hinge: {
      // Minimize 1/2 (x - v)^2 + lambda max(0, 1 - y x) on the three pieces.
      const double margin = y * v;
      if (margin > 1.0) return v;
      if (margin < 1.0 - lambda) return v + lambda * y;
      return y;
    }
    case LossKind::absolute: {
      const double t = v - y;
      if (t > lambda) return v - lambda;
      if (t < -lambda) return v + lambda;
      return y;
    }
  }
  return v;
}

double bruteForceProx(LossKind loss, double v, double y, double lambda, double resolution) {
  // Extended precision: comparing objective values only locates a smooth
  // minimum to about sqrt(eps * |f|), which in double is too coarse.
  using Real = long double;
  auto f = [&](Real x) {
    Real value = 0.0L;
    switch (loss) {
      case LossKind::squared: value = (y - x) * (y - x); break;
      case LossKind::hinge: value = std::max(Real(0), 1.0L - y * x); break;
      case LossKind::absolute: value = std::abs(y - x); break;
    }
    return 0.5L * (x - v) * (x - v) + lambda * value;
  };
  // The minimizer sits between v and the loss's own minimizer, at most lambda
  // further out for the Lipschitz losses.
  const Real lo = std::min(v, y) - lambda - 1.0, hi = std::max(v, y) + lambda + 1.0;
  constexpr int kGrid = 4096;
  const Real h = (hi - lo) / kGrid;
  int best = 0;
  for (int k = 1; k <= kGrid; ++k)
    if (f(lo + k * h) < f(lo + best * h)) best = k;
  Real a = lo + std::max(best - 1, 0) * h, b = lo + std::min(best + 1, kGrid) * h;
  const Real invPhi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  Real c = b - invPhi * (b - a), d = a + invPhi * (b - a);
  Real fc = f(c), fd = f(d);
  while (b - a > resolution) {
    if (fc <= fd) {
      b = d, d = c, fd = fc;
      c = b - invPhi * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + invPhi * (b - a), fd = f(d);
    }
  }
  return static_cast<double>(0.5L * (a + b));
}

DenseMatrix ridgeDirect(ConstMatrixView z, ConstMatrixView y, double lambda) {
  guard(z.rows, kDenseLimit, "n");
  guard(z.cols, kDenseLimit, "s");
  if (z.rows != y.rows) throw DimensionError("ridgeDirect: row mismatch");
  const Mat Z = toEigen(z), Y = toEigen(y);
  const double n = static_cast<double>(z.rows);
  Mat A = Z.transpose() * Z / n;
  A.diagonal().array() += lambda;
  const Mat b = Z.transpose() * Y / n;
  Eigen::LDLT<Mat> ldlt(A);
  Mat W = ldlt.solve(b);
  // One step of iterative refinement.
  W += ldlt.solve(b - A * W);
  return fromEigen(W);
}

DenseMatrix ridgeGradient(ConstMatrixView z, ConstMatrixView y, ConstMatrixView w, double lambda) {
  const Mat Z = toEigen(z), Y = toEigen(y), W = toEigen(w);
  const double n = static_cast<double>(z.rows);
  return fromEigen(2.0 / n * Z.transpose() * (Z * W - Y) + 2.0 * lambda * W);
}

double explicitObjective(ConstMatrixView z, ConstMatrixView y, ConstMatrixView w, LossKind loss, double lambda) {
  const Mat Z = toEigen(z), Y = toEigen(y), W = toEigen(w);
  const Mat P = Z * W;
  double sum = 0.0;
  for (Eigen::Index r = 0; r < P.rows(); ++r)
    for (Eigen::Index c = 0; c < P.cols(); ++c) sum += lossOf(loss, Y(r, c), P(r, c));
  return sum / static_cast<double>(z.rows) + lambda * W.squaredNorm();
}

DenseMatrix gaussianGram(ConstMatrixView a, ConstMatrixView b, double sigma) {
  if (a.cols != b.cols) throw DimensionError("gaussianGram: dimension mismatch");
  DenseMatrix k(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double dist = 0.0;
      for (std::size_t c = 0; c < a.cols; ++c) dist += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
      k(i, j) = std::exp(-dist / (2.0 * sigma * sigma));
    }
  return k;
}

KernelRidge kernelRidgeDirect(ConstMatrixView x, ConstMatrixView y, double sigma, double lambda) {
  guard(x.rows, kDenseLimit, "n");
  if (x.rows != y.rows) throw DimensionError("kernelRidgeDirect: row mismatch");
  Mat K = toEigen(gaussianGram(x, x, sigma));
  K.diagonal().array() += static_cast<double>(x.rows) * lambda;
  const Mat Y = toEigen(y);
  Eigen::LDLT<Mat> ldlt(K);
  Mat alpha = ldlt.solve(Y);
  alpha += ldlt.solve(Y - K * alpha);
  return {DenseMatrix(x), fromEigen(alpha), sigma};
}

DenseMatrix kernelRidgePredict(const KernelRidge& model, ConstMatrixView x) {
  const Mat K = toEigen(gaussianGram(x, model.train, model.sigma));
  return fromEigen(K * toEigen(model.alpha));
}

double kernelRidgeResidual(const KernelRidge& model, ConstMatrixView y, double lambda) {
  Mat K = toEigen(gaussianGram(model.train, model.train, model.sigma));
  K.diagonal().array() += static_cast<double>(model.train.rows()) * lambda;
  return (K * toEigen(model.alpha) - toEigen(y)).norm();
}

std::vector<ReferenceIterate> referenceBlockSplitting(const ReferenceProblem& p, std::size_t iterations) {
  guard(p.z.rows(), kReferenceRows, "n");
  guard(p.z.cols(), kReferenceFeatures, "s");
  if (p.z.rows() != p.y.rows()) throw DimensionError("referenceBlockSplitting: row mismatch");
  const std::size_t R = p.rowOffsets.size() - 1, C = p.colOffsets.size() - 1;
  const Mat Z = toEigen(p.z), Y = toEigen(p.y);
  const Eigen::Index s = Z.cols(), m = Y.cols();
  const double n = static_cast<double>(Z.rows());
  const auto rows = [&](std::size_t i) {
    return std::pair{static_cast<Eigen::Index>(p.rowOffsets[i]),
                     static_cast<Eigen::Index>(p.rowOffsets[i + 1] - p.rowOffsets[i])};
  };
  const auto cols = [&](std::size_t j) {
    return std::pair{static_cast<Eigen::Index>(p.colOffsets[j]),
                     static_cast<Eigen::Index>(p.colOffsets[j + 1] - p.colOffsets[j])};
  };

  // Per (i, j): Z_ij, Q_ij = (Z_ij^T Z_ij + I)^{-1}, O_ij, Obar_ij, W_ij, mu_ij.
  std::vector<std::vector<Mat>> Zb(R), Q(R), Oij(R), Obarij(R), Wij(R), muij(R);
  std::vector<Mat> O(R), Obar(R), nu(R);
  for (std::size_t i = 0; i < R; ++i) {
    const auto [r0, ni] = rows(i);
    O[i] = Obar[i] = nu[i] = Mat::Zero(ni, m);
    for (std::size_t j = 0; j < C; ++j) {
      const auto [c0, sj] = cols(j);
      Zb[i].push_back(Z.block(r0, c0, ni, sj));
      Q[i].push_back((Zb[i][j].transpose() * Zb[i][j] + Mat::Identity(sj, sj)).inverse());
      Oij[i].push_back(Mat::Zero(ni, m));
      Obarij[i].push_back(Mat::Zero(ni, m));
      Wij[i].push_back(Mat::Zero(sj, m));
      muij[i].push_back(Mat::Zero(sj, m));
    }
  }
  Mat W = Mat::Zero(s, m), mu = Mat::Zero(s, m), Wbar = Mat::Zero(s, m);

  std::vector<ReferenceIterate> trace;
  for (std::size_t it = 0; it < iterations; ++it) {
    // Prox steps.
    for (std::size_t i = 0; i < R; ++i) {
      const auto [r0, ni] = rows(i);
      O[i] = proxMatrix(p.loss, Obar[i] - nu[i], Y.block(r0, 0, ni, m), 1.0 / p.rho);
    }
    W = (Wbar - mu) / (1.0 + 2.0 * p.lambda * n / p.rho);

    // Graph projections of (Wbar_j - mu_ij, Obar_ij + nu_i).
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) {
        const auto [c0, sj] = cols(j);
        const Mat c = Wbar.block(c0, 0, sj, m) - muij[i][j];
        const Mat d = Obarij[i][j] + nu[i];
        Wij[i][j] = Q[i][j] * (c + Zb[i][j].transpose() * d);
        Oij[i][j] = Zb[i][j] * Wij[i][j];
      }

    // Averaging over the R + 1 copies of each W_j.
    Mat sum = W;
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) {
        const auto [c0, sj] = cols(j);
        sum.block(c0, 0, sj, m) += Wij[i][j];
      }
    Wbar = sum / static_cast<double>(R + 1);

    // Exchange over the C pieces of each O_i.
    std::vector<Mat> delta(R);
    for (std::size_t i = 0; i < R; ++i) {
      delta[i] = O[i];
      for (std::size_t j = 0; j < C; ++j) delta[i] -= Oij[i][j];
      Obar[i] = Mat::Zero(O[i].rows(), m);
      for (std::size_t j = 0; j < C; ++j) {
        Obarij[i][j] = Oij[i][j] + delta[i] / static_cast<double>(C + 1);
        Obar[i] += Obarij[i][j];
      }
    }

    // Scaled dual updates.
    mu += W - Wbar;
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t j = 0; j < C; ++j) {
        const auto [c0, sj] = cols(j);
        muij[i][j] += Wij[i][j] - Wbar.block(c0, 0, sj, m);
      }
      nu[i] += O[i] - Obar[i];
    }

    ReferenceIterate snap;
    for (std::size_t i = 0; i < R; ++i) {
      snap.O.push_back(fromEigen(O[i]));
      snap.Obar.push_back(fromEigen(Obar[i]));
      snap.nu.push_back(fromEigen(nu[i]));
      snap.delta.push_back(fromEigen(delta[i]));
      Mat stackedW(s, m), stackedMu(s, m), stackedU(s, m);
      for (std::size_t j = 0; j < C; ++j) {
        const auto [c0, sj] = cols(j);
        stackedW.block(c0, 0, sj, m) = Wij[i][j];
        stackedMu.block(c0, 0, sj, m) = muij[i][j];
        stackedU.block(c0, 0, sj, m) = Zb[i][j].transpose() * Oij[i][j];
      }
      snap.Wij.push_back(fromEigen(stackedW));
      snap.muij.push_back(fromEigen(stackedMu));
      snap.Uij.push_back(fromEigen(stackedU));
    }
    snap.W = fromEigen(W);
    snap.mu = fromEigen(mu);
    snap.Wbar = fromEigen(Wbar);
    trace.push_back(std::move(snap));
  }
  return trace;
}

std::vector<ConsensusIterate> textbookConsensus(ConstMatrixView z, ConstMatrixView y, LossKind loss, double rho,
                                                double lambda, std::size_t iterations) {
  guard(z.rows, kReferenceRows, "n");
  guard(z.cols, kReferenceFeatures, "s");
  const Mat Z = toEigen(z), Y = toEigen(y);
  const Eigen::Index n = Z.rows(), s = Z.cols(), m = Y.cols();
  const Mat Q = (Z.transpose() * Z + Mat::Identity(s, s)).inverse();

  // x = (O, W, Og, Wg); z-variables Obar, Wbar shared by both copies;
  // duals nuO, nuG for O and Og, muW, muG for W and Wg.
  Mat Obar = Mat::Zero(n, m), Wbar = Mat::Zero(s, m);
  Mat nuO = Obar, nuG = Obar, muW = Wbar, muG = Wbar;
  std::vector<ConsensusIterate> trace;
  for (std::size_t it = 0; it < iterations; ++it) {
    // x-update: separable prox of f at z - dual.
    const Mat O = proxMatrix(loss, Obar - nuO, Y, 1.0 / rho);
    const Mat W = (Wbar - muW) / (1.0 + 2.0 * lambda * static_cast<double>(n) / rho);
    const Mat Wg = Q * ((Wbar - muG) + Z.transpose() * (Obar - nuG));
    const Mat Og = Z * Wg;
    // z-update: projection of x + dual onto the consensus set.
    Obar = ((O + nuO) + (Og + nuG)) / 2.0;
    Wbar = ((W + muW) + (Wg + muG)) / 2.0;
    // Dual update.
    nuO += O - Obar;
    nuG += Og - Obar;
    muW += W - Wbar;
    muG += Wg - Wbar;
    trace.push_back({fromEigen(O), fromEigen(W), fromEigen(Og), fromEigen(Wg), fromEigen(Obar), fromEigen(Wbar),
                     fromEigen(nuO), fromEigen(muW)});
  }
  return trace;
}

}  // namespace kadmm::oracle
