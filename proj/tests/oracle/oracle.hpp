#ifndef KADMM_TESTS_ORACLE_HPP
#define KADMM_TESTS_ORACLE_HPP

#include <cstddef>
#include <vector>

#include "kadmm/matrix.hpp"
#include "kadmm/prox.hpp"

// Direct solvers and a literal block-splitting iteration used as ground truth
// by the tests. All of them refuse problems beyond desk scale.
namespace kadmm::oracle {

inline constexpr std::size_t kDenseLimit = 2000;
inline constexpr std::size_t kReferenceRows = 200;
inline constexpr std::size_t kReferenceFeatures = 60;

/// argmin (1/n)||ZW - Y||^2 + lambda ||W||^2 via (Z^T Z/n + lambda I) W = Z^T Y/n.
DenseMatrix ridgeDirect(ConstMatrixView z, ConstMatrixView y, double lambda);
/// Gradient of the ridge objective: (2/n) Z^T (ZW - Y) + 2 lambda W.
DenseMatrix ridgeGradient(ConstMatrixView z, ConstMatrixView y, ConstMatrixView w, double lambda);
/// (1/n) sum V(y, ZW) + lambda ||W||^2 with Z given explicitly.
double explicitObjective(ConstMatrixView z, ConstMatrixView y, ConstMatrixView w, LossKind loss, double lambda);

struct KernelRidge {
  DenseMatrix train;  // n x d
  DenseMatrix alpha;  // n x m
  double sigma = 1.0;
};

DenseMatrix gaussianGram(ConstMatrixView a, ConstMatrixView b, double sigma);
/// Solves (K + n lambda I) alpha = Y.
KernelRidge kernelRidgeDirect(ConstMatrixView x, ConstMatrixView y, double sigma, double lambda);
/// f(x) = sum_i alpha_i k(x, x_i).
DenseMatrix kernelRidgePredict(const KernelRidge& model, ConstMatrixView x);
/// ||(K + n lambda I) alpha - Y||_fro.
double kernelRidgeResidual(const KernelRidge& model, ConstMatrixView y, double lambda);

struct ReferenceProblem {
  DenseMatrix z;  // n x s, fully materialized
  DenseMatrix y;  // n x m
  std::vector<std::size_t> rowOffsets;
  std::vector<std::size_t> colOffsets;
  LossKind loss = LossKind::squared;
  double rho = 1.0;     // penalty on the summed loss
  double lambda = 0.0;  // of the 1/n-scaled objective
};

/// State after one iteration of the unsimplified block-splitting updates.
struct ReferenceIterate {
  std::vector<DenseMatrix> O, Obar, nu;  // per row block, n_i x m
  std::vector<DenseMatrix> delta;        // per row block, O_i - sum_j O_ij
  std::vector<DenseMatrix> Wij, muij;    // per row block, s x m (blocks j stacked)
  std::vector<DenseMatrix> Uij;          // per row block, Z_ij^T O_ij stacked
  DenseMatrix W, mu, Wbar;               // s x m
};

/// Every O_ij, Obar_ij, W_ij and mu_ij is kept explicitly; the graph
/// projections use explicit inverses of Z_ij^T Z_ij + I.
std::vector<ReferenceIterate> referenceBlockSplitting(const ReferenceProblem& problem, std::size_t iterations);

struct ConsensusIterate {
  DenseMatrix O, W;        // prox outputs
  DenseMatrix Og, Wg;      // graph projection outputs
  DenseMatrix Obar, Wbar;  // consensus variables
  DenseMatrix nu, mu;      // scaled duals of O and W
};

/// Textbook x / z / dual ADMM for R = C = 1: x = (O, W, O', W') with
/// f = loss + regularizer + graph indicator, z the projection onto
/// {O = O', W = W'}, all four duals kept.
std::vector<ConsensusIterate> textbookConsensus(ConstMatrixView z, ConstMatrixView y, LossKind loss, double rho,
                                                double lambda, std::size_t iterations);

/// Scalar proxes written out independently of the library.
double referenceProx(LossKind loss, double v, double y, double lambda);

/// argmin_x 1/2 (x - v)^2 + lambda V(y, x) found numerically: a coarse grid
/// over a bracket that must contain the minimizer, then golden-section search
/// on the best cell until it is narrower than `resolution`.
double bruteForceProx(LossKind loss, double v, double y, double lambda, double resolution = 1e-9);

}  // namespace kadmm::oracle

#endif  // KADMM_TESTS_ORACLE_HPP
