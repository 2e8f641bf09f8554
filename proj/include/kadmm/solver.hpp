#ifndef KADMM_SOLVER_HPP
#define KADMM_SOLVER_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kadmm/comm.hpp"
#include "kadmm/dataset.hpp"
#include "kadmm/features.hpp"
#include "kadmm/graph_projection.hpp"
#include "kadmm/matrix.hpp"
#include "kadmm/model.hpp"
#include "kadmm/prox.hpp"

namespace kadmm {

struct SolverConfig {
  /// ADMM penalty applied to the summed loss sum_i V(y_i, o_i); the equivalent
  /// penalty for the 1/n-scaled objective is rho/n.
  double rho = 1.0;
  double lambda = 1e-3;
  std::size_t maxIter = 100;
  std::size_t rowSplits = 1;  // R
  std::size_t threads = 1;    // t, per rank
  LossSpec loss;
  TransformDescriptor transform;  // s, C, sigma and seed
  /// Early stop once both primal residuals fall below tol * (1 + ||Wbar||);
  /// 0 runs exactly maxIter iterations.
  double tol = 0.0;
  /// Accumulate Z*Wbar during the column loop to report the objective. Costs
  /// one extra n_i x m buffer per rank.
  bool trackObjective = true;

  std::size_t features() const noexcept { return transform.features(); }
  std::size_t colSplits() const noexcept { return transform.blocks(); }
  void validate() const;
};

/// C = max(ceil(kappa * s / d), ceil(s / 4096)), clamped to [1, s].
std::size_t defaultColumnSplits(std::size_t s, std::size_t d, double kappa = 1.0);

/// Seconds per phase. transform and prediction are summed over threads; the
/// others are wall time of the calling rank.
struct PhaseTimes {
  double transform = 0.0;
  double graphProjectionLoop = 0.0;
  double prox = 0.0;
  double communication = 0.0;
  double barrier = 0.0;
  double prediction = 0.0;
};

struct IterationReport {
  std::size_t iteration = 0;  // 1-based
  /// Objective at the consensus Wbar the iteration started from (NaN when
  /// objective tracking is off).
  double objective = 0.0;
  double primalResidualO = 0.0;  // sqrt(sum_i ||O_i - Obar_i||^2)
  double primalResidualW = 0.0;  // sqrt(sum_i ||W'_i - Wbar||^2), new Wbar
  PhaseTimes phases;
  bool converged = false;
};

/// One line of space-separated key=value pairs.
std::string formatReport(const IterationReport& report);
IterationReport parseReport(std::string_view line);

/// Everything one rank keeps between iterations.
struct WorkerState {
  int rank = 0;
  int ranks = 1;
  std::size_t globalRows = 0;  // n, summed over ranks
  std::size_t iteration = 0;   // completed iterations

  // n_i x m
  DenseMatrix O, Obar, nu, deltaBar;
  // s x m
  DenseMatrix Wbar, Wp, mup, U;
  // s x m, rank 0 only (empty elsewhere). Rank 0's own prox output
  // W = (Wbar - mu) / (1 + 2 lambda n / rho) is never stored: it is rebuilt
  // from Wbar and mu, which stay fixed until the reduce.
  DenseMatrix mu;
  std::vector<FactorCache> caches;  // one per column block, built in iteration 1

  // Scratch: Delta, the prediction accumulator, and per-thread Z_ij / O'.
  DenseMatrix delta, predictions;
  std::vector<DenseMatrix> zWork, oWork;
};

WorkerState initWorker(const SolverConfig& config, ConstMatrixView xi, ConstMatrixView yi, Communicator& comm);

/// One outer iteration. Collective: every rank must call it.
IterationReport iterate(WorkerState& state, const SolverConfig& config, ConstMatrixView xi, ConstMatrixView yi,
                        Communicator& comm);

using IterationObserver = std::function<void(const WorkerState&, const IterationReport&)>;

struct WorkerResult {
  DenseMatrix weights;  // final consensus Wbar
  std::vector<IterationReport> reports;
};

/// initWorker followed by iterate until maxIter or early stop.
WorkerResult runWorker(const SolverConfig& config, ConstMatrixView xi, ConstMatrixView yi, Communicator& comm,
                       const IterationObserver& observer = {});

struct SolveResult {
  Model model;
  std::vector<IterationReport> reports;
};

/// Runs R in-process ranks (one thread each) on balanced row blocks of x.
/// `encoding` must describe y's columns; by default y is treated as
/// regression targets. The observer is called on every rank's thread.
SolveResult solve(const SolverConfig& config, ConstMatrixView x, ConstMatrixView y,
                  const std::optional<LabelEncoding>& encoding = std::nullopt,
                  const IterationObserver& observer = {});

/// Scores Z(x) * W, computed by row chunks and column blocks.
DenseMatrix predict(const Model& model, ConstMatrixView x);
DenseMatrix predictScores(ConstMatrixView weights, const TransformDescriptor& transform, ConstMatrixView x);
std::vector<double> predictLabels(const Model& model, ConstMatrixView x);

/// (1/n) sum_i sum_k V(y_ik, f(x_i)_k) + lambda * ||W||_fro^2.
double objective(ConstMatrixView weights, const TransformDescriptor& transform, ConstMatrixView x,
                 ConstMatrixView y, LossSpec loss, double lambda);
double objective(const Model& model, ConstMatrixView x, ConstMatrixView y, double lambda);

struct MemoryShape {
  double n = 0, d = 0, m = 0, s = 0;
  double rowSplits = 1;  // R
  double colSplits = 1;  // C
  double threads = 1;    // t
  double nodes = 1;      // N
};

struct MemoryEstimate {
  double floatsPerProcess = 0.0;
  double floatsPerNode = 0.0;
  double bytesPerProcess() const noexcept { return 8.0 * floatsPerProcess; }
  double bytesPerNode() const noexcept { return 8.0 * floatsPerNode; }
};

/// Per process: 4nm/R + 5sm + nd/R + nm/R + tns/(RC) + tsm/C + nmt/R + nm/R + s^2/C
/// floats; a node hosts R/N processes.
MemoryEstimate memoryEstimate(const MemoryShape& shape);
/// For a concrete run: n/R and s/C become the largest row and column block,
/// which matters when the splits are uneven.
MemoryEstimate memoryEstimate(const SolverConfig& config, std::size_t n, std::size_t d, std::size_t m,
                              std::size_t nodes = 1);

}  // namespace kadmm

#endif  // KADMM_SOLVER_HPP
