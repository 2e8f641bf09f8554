#include "kadmm/solver.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>

#include "kadmm/errors.hpp"
#include "kadmm/layout.hpp"

namespace kadmm {

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

MatrixView rowsOf(DenseMatrix& m, std::size_t begin, std::size_t count) { return m.rowRange(begin, begin + count); }
ConstMatrixView rowsOf(const DenseMatrix& m, std::size_t begin, std::size_t count) {
  return m.rowRange(begin, begin + count);
}

/// First `rows * cols` entries of a scratch buffer viewed as rows x cols.
MatrixView scratch(DenseMatrix& buffer, std::size_t rows, std::size_t cols) {
  return {buffer.data().first(rows * cols), rows, cols};
}

void checkHingeTargets(ConstMatrixView y) {
  for (double v : y.data)
    if (v != 1.0 && v != -1.0) throw LabelError("hinge loss needs targets in {-1, +1}, got " + std::to_string(v));
}

}  // namespace

void SolverConfig::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("rho must be positive and finite");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be nonnegative and finite");
  if (rowSplits < 1) throw ConfigError("row splits R must be at least 1");
  if (threads < 1) throw ConfigError("threads t must be at least 1");
  if (!(tol >= 0.0)) throw ConfigError("tol must be nonnegative");
  transform.validate();
}

std::size_t defaultColumnSplits(std::size_t s, std::size_t d, double kappa) {
  if (s == 0) throw ConfigError("number of random features must be positive");
  if (d == 0) throw ConfigError("input dimension must be positive");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  const auto byDim = static_cast<std::size_t>(std::ceil(kappa * static_cast<double>(s) / static_cast<double>(d)));
  const std::size_t byCache = (s + 4095) / 4096;
  return std::clamp<std::size_t>(std::max(byDim, byCache), 1, s);
}

// ---------------------------------------------------------------------------
// Report lines

namespace {

void appendNumber(std::string& out, const char* key, double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  out += ' ';
  out += key;
  out += '=';
  out.append(buf, end);
}

double parseNumber(std::string_view text, std::string_view key) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError("bad value '" + std::string(text) + "' for " + std::string(key), 0);
  return value;
}

}  // namespace

std::string formatReport(const IterationReport& r) {
  std::string out = "iter=" + std::to_string(r.iteration);
  appendNumber(out, "objective", r.objective);
  appendNumber(out, "primal_residual_o", r.primalResidualO);
  appendNumber(out, "primal_residual_w", r.primalResidualW);
  appendNumber(out, "transform", r.phases.transform);
  appendNumber(out, "graph_projection_loop", r.phases.graphProjectionLoop);
  appendNumber(out, "prox", r.phases.prox);
  appendNumber(out, "communication", r.phases.communication);
  appendNumber(out, "barrier", r.phases.barrier);
  appendNumber(out, "prediction", r.phases.prediction);
  out += r.converged ? " converged=1" : " converged=0";
  return out;
}

IterationReport parseReport(std::string_view line) {
  IterationReport r;
  unsigned seen = 0;
  const auto field = [&](std::string_view key, std::string_view value) {
    struct Slot {
      const char* name;
      double* target;
    };
    const Slot slots[] = {{"objective", &r.objective},
                          {"primal_residual_o", &r.primalResidualO},
                          {"primal_residual_w", &r.primalResidualW},
                          {"transform", &r.phases.transform},
                          {"graph_projection_loop", &r.phases.graphProjectionLoop},
                          {"prox", &r.phases.prox},
                          {"communication", &r.phases.communication},
                          {"barrier", &r.phases.barrier},
                          {"prediction", &r.phases.prediction}};
    if (key == "iter") {
      const double v = parseNumber(value, key);
      if (v < 0 || v != std::floor(v)) throw ParseError("bad iteration number", 0);
      r.iteration = static_cast<std::size_t>(v);
      seen |= 1u;
      return;
    }
    if (key == "converged") {
      if (value != "0" && value != "1") throw ParseError("converged must be 0 or 1", 0);
      r.converged = value == "1";
      seen |= 2u;
      return;
    }
    for (std::size_t k = 0; k < std::size(slots); ++k) {
      if (key == slots[k].name) {
        *slots[k].target = parseNumber(value, key);
        seen |= 4u << k;
        return;
      }
    }
    throw ParseError("unknown report field '" + std::string(key) + "'", 0);
  };
  std::size_t pos = 0;
  while (pos < line.size()) {
    if (line[pos] == ' ') {
      ++pos;
      continue;
    }
    const std::size_t end = std::min(line.find(' ', pos), line.size());
    const std::string_view token = line.substr(pos, end - pos);
    const std::size_t eq = token.find('=');
    if (eq == std::string_view::npos) throw ParseError("report token without '=': " + std::string(token), 0);
    field(token.substr(0, eq), token.substr(eq + 1));
    pos = end;
  }
  if (seen != (1u << 11) - 1) throw ParseError("report line is missing fields", 0);
  return r;
}

// ---------------------------------------------------------------------------
// Worker

WorkerState initWorker(const SolverConfig& config, ConstMatrixView xi, ConstMatrixView yi, Communicator& comm) {
  config.validate();
  if (static_cast<std::size_t>(comm.size()) != config.rowSplits)
    throw ConfigError("communicator has " + std::to_string(comm.size()) + " ranks but R=" +
                      std::to_string(config.rowSplits));
  if (xi.rows != yi.rows)
    throw DimensionError("row block has " + std::to_string(xi.rows) + " inputs but " + std::to_string(yi.rows) +
                         " targets");
  if (xi.rows == 0) throw DimensionError("row block is empty");
  if (xi.cols == 0 || yi.cols == 0) throw DimensionError("inputs and targets need at least one column");
  if (config.loss.kind == LossKind::hinge) checkHingeTargets(yi);

  const std::size_t ni = xi.rows, m = yi.cols, s = config.features();
  const std::size_t C = config.colSplits();
  std::size_t maxBlock = 0;
  for (std::size_t j = 0; j < C; ++j) maxBlock = std::max(maxBlock, config.transform.blockSize(j));

  WorkerState st;
  st.rank = comm.rank();
  st.ranks = comm.size();

  // Global n for the loss and regularizer scaling.
  DenseMatrix count(1, 1, static_cast<double>(ni));
  DenseMatrix total(1, 1);
  comm.reduceSum(count, total, 0);
  comm.broadcast(total, 0);
  st.globalRows = static_cast<std::size_t>(total(0, 0));

  for (DenseMatrix* mat : {&st.O, &st.Obar, &st.nu, &st.deltaBar, &st.delta}) mat->resize(ni, m);
  for (DenseMatrix* mat : {&st.Wbar, &st.Wp, &st.mup, &st.U}) mat->resize(s, m);
  if (st.rank == 0) st.mu.resize(s, m);
  if (config.trackObjective) st.predictions.resize(ni, m);
  st.caches.resize(C);
  const std::size_t workers = std::min(config.threads, C);
  st.zWork.resize(workers);
  st.oWork.resize(workers);
  for (std::size_t k = 0; k < workers; ++k) {
    st.zWork[k].resize(ni, maxBlock);
    st.oWork[k].resize(ni, m);
  }
  return st;
}

namespace {

// Steps 13-24 for all column blocks, spread over the per-thread workspaces.
// Blocks are claimed in increasing j; the shared updates of Delta, Obar and
// the prediction accumulator are committed strictly in j order, so the result
// does not depend on the thread count.
void columnLoop(WorkerState& st, const SolverConfig& config, ConstMatrixView xi, PhaseTimes& phases) {
  const std::size_t C = config.colSplits();
  const std::size_t ni = xi.rows;
  const double share = 1.0 / static_cast<double>(C + 1);
  const auto& offsets = config.transform.colOffsets;
  const ConstMatrixView g = st.deltaBar;  // holds Dbar/(C+1) + nu during the loop

  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::condition_variable turn;
  std::size_t committed = 0;
  bool failed = false;
  std::exception_ptr error;
  std::vector<double> transformSeconds(st.zWork.size(), 0.0), predictSeconds(st.zWork.size(), 0.0);

  const auto work = [&](std::size_t tid) {
    try {
      for (std::size_t j = next++; j < C; j = next++) {
        const std::size_t c0 = offsets[j], sj = offsets[j + 1] - offsets[j];
        const MatrixView z = scratch(st.zWork[tid], ni, sj);
        const MatrixView op = st.oWork[tid].view();

        auto start = Clock::now();
        transformInto(config.transform, j, xi, z);
        transformSeconds[tid] += secondsSince(start);
        if (!st.caches[j].ready()) st.caches[j] = buildCache(z, j);

        // W'_j = Q_ij [Wbar_j - mu'_j + U_j + Z^T (Dbar/(C+1) + nu)]
        const MatrixView wj = rowsOf(st.Wp, c0, sj);
        const auto wbar = rowsOf(std::as_const(st.Wbar), c0, sj).data;
        const auto mup = rowsOf(std::as_const(st.mup), c0, sj).data;
        const MatrixView uj = rowsOf(st.U, c0, sj);
        for (std::size_t k = 0; k < wj.data.size(); ++k) wj.data[k] = wbar[k] - mup[k] + uj.data[k];
        multiplyTransposedAdd(z, g, wj);
        solveCached(st.caches[j], wj);
        multiply(z, wj, op);          // O'
        multiplyTransposed(z, op, uj);  // U_j = Z^T O'

        std::unique_lock lock(mutex);
        turn.wait(lock, [&] { return committed == j || failed; });
        if (failed) return;
        axpy(-1.0, op, st.delta.view());
        axpy(share, op, st.Obar.view());
        if (config.trackObjective) {
          start = Clock::now();
          multiplyAdd(z, rowsOf(std::as_const(st.Wbar), c0, sj), st.predictions.view());
          predictSeconds[tid] += secondsSince(start);
        }
        ++committed;
        turn.notify_all();
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!error) error = std::current_exception();
      failed = true;
      turn.notify_all();
    }
  };

  {
    std::vector<std::jthread> helpers;
    for (std::size_t tid = 1; tid < st.zWork.size(); ++tid) helpers.emplace_back(work, tid);
    work(0);
  }
  if (error) std::rethrow_exception(error);
  for (std::size_t tid = 0; tid < st.zWork.size(); ++tid) {
    phases.transform += transformSeconds[tid];
    phases.prediction += predictSeconds[tid];
  }
}

bool stateFinite(const WorkerState& st) {
  for (const DenseMatrix* mat : {&st.O, &st.Obar, &st.nu, &st.deltaBar, &st.Wbar, &st.Wp, &st.mup, &st.U,
                                 &st.mu})
    if (!allFinite(*mat)) return false;
  return true;
}

}  // namespace

IterationReport iterate(WorkerState& st, const SolverConfig& config, ConstMatrixView xi, ConstMatrixView yi,
                        Communicator& comm) {
  if (xi.rows != st.O.rows() || yi.rows != st.O.rows() || yi.cols != st.O.cols())
    throw DimensionError("iterate: data does not match the worker state");
  IterationReport report;
  report.iteration = st.iteration + 1;
  const std::size_t C = config.colSplits();
  const double n = static_cast<double>(st.globalRows);
  const double R = static_cast<double>(st.ranks);
  const bool root = st.rank == 0;

  // Step 4: O = prox_{l/rho}(Obar - nu).
  auto start = Clock::now();
  {
    const auto obar = std::as_const(st.Obar).data(), nu = std::as_const(st.nu).data(), y = yi.data;
    auto o = st.O.data();
    const double scale = 1.0 / config.rho;
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = proxLoss(config.loss.kind, obar[k] - nu[k], y[k], scale);
  }
  // Steps 5-6 (W = prox_{lambda r / rho}(Wbar - mu) on rank 0) are deferred
  // to just before the reduce; Wbar and mu do not change in between.
  const double regularizer = root ? config.lambda * squaredNorm(st.Wbar) : 0.0;
  report.phases.prox = secondsSince(start);

  // Steps 11-12, and the rhs term shared by every block: Dbar/(C+1) + nu.
  copyInto(st.O, st.delta.view());
  const double keep = static_cast<double>(C) / static_cast<double>(C + 1);
  {
    const auto o = st.O.data(), nu = st.nu.data();
    auto obar = st.Obar.data(), dbar = st.deltaBar.data();
    for (std::size_t k = 0; k < o.size(); ++k) {
      obar[k] = keep * o[k];
      dbar[k] = dbar[k] / static_cast<double>(C + 1) + nu[k];
    }
  }
  if (config.trackObjective) st.predictions.setZero();

  // Steps 13-24.
  start = Clock::now();
  columnLoop(st, config, xi, report.phases);
  report.phases.graphProjectionLoop = secondsSince(start);
  // Step 25: Dbar = Delta (the old buffer becomes next iteration's scratch).
  std::swap(st.deltaBar, st.delta);

  start = Clock::now();
  comm.barrier();
  report.phases.barrier = secondsSince(start);

  // Rank 0 overwrites Wbar with its own W and parks mu + W in mu, so the
  // reduce can accumulate into Wbar without another s x m buffer.
  if (root) {
    start = Clock::now();
    const double shrink = 1.0 / (1.0 + 2.0 * config.lambda * n / config.rho);
    auto wbar = st.Wbar.data(), mu = st.mu.data();
    for (std::size_t k = 0; k < wbar.size(); ++k) {
      const double w = (wbar[k] - mu[k]) * shrink;
      mu[k] += w;
      wbar[k] = w;
    }
    report.phases.prox += secondsSince(start);
  }

  // Steps 26-32: Wbar = (W + sum_i W'_i) / (R + 1), then broadcast.
  start = Clock::now();
  comm.reduceAdd(st.Wp, st.Wbar, 0);
  if (root) scale(1.0 / (R + 1.0), st.Wbar.view());
  comm.broadcast(st.Wbar, 0);
  report.phases.communication = secondsSince(start);

  // Dual updates with the new consensus.
  double localW = 0.0;
  {
    const auto wp = st.Wp.data(), wbar = st.Wbar.data();
    auto mup = st.mup.data();
    for (std::size_t k = 0; k < mup.size(); ++k) {
      const double diff = wp[k] - wbar[k];
      mup[k] += diff;
      localW += diff * diff;
    }
  }
  if (root) axpy(-1.0, st.Wbar, st.mu.view());  // (mu + W) - Wbar
  double localO = 0.0;
  {
    const auto o = st.O.data(), obar = st.Obar.data();
    auto nu = st.nu.data();
    for (std::size_t k = 0; k < nu.size(); ++k) {
      const double diff = o[k] - obar[k];
      nu[k] += diff;
      localO += diff * diff;
    }
  }
  double lossSum = 0.0;
  if (config.trackObjective) {
    const auto p = std::as_const(st.predictions).data(), y = yi.data;
    for (std::size_t k = 0; k < p.size(); ++k) lossSum += lossValue(config.loss.kind, y[k], p[k]);
  }
  ++st.iteration;

  start = Clock::now();
  DenseMatrix stats(1, 4, 0.0), totals(1, 4);
  stats(0, 0) = lossSum;
  stats(0, 1) = localO;
  stats(0, 2) = localW;
  stats(0, 3) = stateFinite(st) && std::isfinite(lossSum) ? 0.0 : 1.0;
  comm.reduceSum(stats, totals, 0);
  DenseMatrix control(1, 5, 0.0);
  if (root) {
    const double rO = std::sqrt(totals(0, 1)), rW = std::sqrt(totals(0, 2));
    const double threshold = config.tol * (1.0 + frobeniusNorm(st.Wbar));
    control(0, 0) = config.trackObjective ? totals(0, 0) / n + regularizer : std::numeric_limits<double>::quiet_NaN();
    control(0, 1) = rO;
    control(0, 2) = rW;
    control(0, 3) = totals(0, 3) > 0.0 ? 1.0 : 0.0;
    control(0, 4) = config.tol > 0.0 && rO < threshold && rW < threshold ? 1.0 : 0.0;
  }
  comm.broadcast(control, 0);
  report.phases.communication += secondsSince(start);

  if (control(0, 3) != 0.0) throw DivergenceError(report.iteration);
  report.objective = control(0, 0);
  report.primalResidualO = control(0, 1);
  report.primalResidualW = control(0, 2);
  report.converged = control(0, 4) != 0.0;
  return report;
}

WorkerResult runWorker(const SolverConfig& config, ConstMatrixView xi, ConstMatrixView yi, Communicator& comm,
                       const IterationObserver& observer) {
  WorkerState st = initWorker(config, xi, yi, comm);
  WorkerResult result;
  for (std::size_t k = 0; k < config.maxIter; ++k) {
    const IterationReport report = iterate(st, config, xi, yi, comm);
    if (observer) observer(st, report);
    result.reports.push_back(report);
    if (report.converged) break;
  }
  result.weights = std::move(st.Wbar);
  return result;
}

SolveResult solve(const SolverConfig& config, ConstMatrixView x, ConstMatrixView y,
                  const std::optional<LabelEncoding>& encoding, const IterationObserver& observer) {
  config.validate();
  if (x.rows != y.rows) throw DimensionError("inputs and targets have different row counts");
  const LabelEncoding labels = encoding.value_or(LabelEncoding::regression(y.cols));
  if (labels.outputs() != y.cols)
    throw ConfigError("label encoding has " + std::to_string(labels.outputs()) + " outputs but targets have " +
                      std::to_string(y.cols) + " columns");
  if (config.rowSplits > x.rows) throw ConfigError("more row splits than examples");
  const BlockLayout layout = BlockLayout::balanced(x.rows, config.rowSplits, config.features(), config.colSplits());
  const std::size_t R = config.rowSplits;

  InProcessGroup group(static_cast<int>(R));
  std::vector<WorkerResult> results(R);
  std::vector<std::exception_ptr> errors(R);
  const auto runRank = [&](std::size_t i) {
    try {
      auto comm = group.communicator(static_cast<int>(i));
      results[i] = runWorker(config, rowBlock(x, layout, i), rowBlock(y, layout, i), *comm, observer);
    } catch (const std::exception& e) {
      errors[i] = std::current_exception();
      group.abort("rank " + std::to_string(i) + " failed: " + e.what());
    } catch (...) {
      errors[i] = std::current_exception();
      group.abort("rank " + std::to_string(i) + " failed");
    }
  };
  {
    std::vector<std::jthread> ranks;
    for (std::size_t i = 1; i < R; ++i) ranks.emplace_back(runRank, i);
    runRank(0);
  }
  // Prefer the root cause over the CommErrors it triggered on other ranks.
  std::exception_ptr first;
  for (const auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const CommError&) {
      if (!first) first = e;
    } catch (...) {
      std::rethrow_exception(e);
    }
  }
  if (first) std::rethrow_exception(first);

  SolveResult out;
  out.model.weights = std::move(results[0].weights);
  out.model.transform = config.transform;
  out.model.inputDim = x.cols;
  out.model.loss = config.loss.kind;
  out.model.labels = labels;
  out.reports = std::move(results[0].reports);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction and objective

DenseMatrix predictScores(ConstMatrixView weights, const TransformDescriptor& transform, ConstMatrixView x) {
  transform.validate();
  if (weights.rows != transform.features()) throw DimensionError("weights do not match the transform");
  constexpr std::size_t kChunk = 1024;
  DenseMatrix scores(x.rows, weights.cols);
  if (x.rows == 0) return scores;
  std::size_t maxBlock = 0;
  for (std::size_t j = 0; j < transform.blocks(); ++j) maxBlock = std::max(maxBlock, transform.blockSize(j));
  DenseMatrix zBuffer(std::min(kChunk, x.rows), maxBlock);
  for (std::size_t r0 = 0; r0 < x.rows; r0 += kChunk) {
    const std::size_t rows = std::min(kChunk, x.rows - r0);
    for (std::size_t j = 0; j < transform.blocks(); ++j) {
      const std::size_t c0 = transform.colOffsets[j], sj = transform.blockSize(j);
      const MatrixView z = scratch(zBuffer, rows, sj);
      transformInto(transform, j, x.rowRange(r0, r0 + rows), z);
      multiplyAdd(z, weights.rowRange(c0, c0 + sj), scores.rowRange(r0, r0 + rows));
    }
  }
  return scores;
}

DenseMatrix predict(const Model& model, ConstMatrixView x) {
  if (x.cols != model.inputDim)
    throw DimensionError("input has " + std::to_string(x.cols) + " columns but the model expects " +
                         std::to_string(model.inputDim));
  return predictScores(model.weights, model.transform, x);
}

std::vector<double> predictLabels(const Model& model, ConstMatrixView x) {
  return decodeLabels(predict(model, x), model.labels);
}

double objective(ConstMatrixView weights, const TransformDescriptor& transform, ConstMatrixView x,
                 ConstMatrixView y, LossSpec loss, double lambda) {
  if (x.rows != y.rows || y.cols != weights.cols) throw DimensionError("objective: shape mismatch");
  if (x.rows == 0) throw DimensionError("objective: no examples");
  const DenseMatrix scores = predictScores(weights, transform, x);
  double sum = 0.0;
  for (std::size_t k = 0; k < y.data.size(); ++k) sum += lossValue(loss.kind, y.data[k], scores.data()[k]);
  return sum / static_cast<double>(x.rows) + lambda * squaredNorm(weights);
}

double objective(const Model& model, ConstMatrixView x, ConstMatrixView y, double lambda) {
  if (x.cols != model.inputDim) throw DimensionError("objective: input dimension mismatch");
  return objective(model.weights, model.transform, x, y, LossSpec{model.loss}, lambda);
}

// ---------------------------------------------------------------------------
// Memory model

MemoryEstimate memoryEstimate(const MemoryShape& p) {
  if (p.rowSplits < 1 || p.colSplits < 1 || p.threads < 1 || p.nodes < 1)
    throw ConfigError("memory estimate needs R, C, t, N >= 1");
  if (p.nodes > p.rowSplits) throw ConfigError("more nodes than processes");
  const double n = p.n, d = p.d, m = p.m, s = p.s, R = p.rowSplits, C = p.colSplits, t = p.threads;
  MemoryEstimate e;
  e.floatsPerProcess = 4 * n * m / R + 5 * s * m + n * d / R + n * m / R + t * n * s / (R * C) + t * s * m / C +
                       n * m * t / R + n * m / R + s * s / C;
  e.floatsPerNode = e.floatsPerProcess * R / p.nodes;
  return e;
}

MemoryEstimate memoryEstimate(const SolverConfig& config, std::size_t n, std::size_t d, std::size_t m,
                              std::size_t nodes) {
  const std::size_t R = config.rowSplits, C = config.colSplits();
  if (R < 1 || C < 1 || config.threads < 1 || nodes < 1) throw ConfigError("memory estimate needs R, C, t, N >= 1");
  if (nodes > R) throw ConfigError("more nodes than processes");
  // Same terms as the shape version, but n/R and s/C are the largest blocks of
  // the actual split, so uneven splits are not undercounted.
  const double ni = static_cast<double>((n + R - 1) / R);
  double sb = 0.0;
  for (std::size_t j = 0; j < C; ++j) sb = std::max(sb, static_cast<double>(config.transform.blockSize(j)));
  const double s = static_cast<double>(config.features()), t = static_cast<double>(config.threads);
  const double dd = static_cast<double>(d), mm = static_cast<double>(m), cc = static_cast<double>(C);
  MemoryEstimate e;
  e.floatsPerProcess = 4 * ni * mm + 5 * s * mm + ni * dd + ni * mm + t * ni * sb + t * sb * mm + ni * mm * t +
                       ni * mm + cc * sb * sb;
  e.floatsPerNode = e.floatsPerProcess * static_cast<double>(R) / static_cast<double>(nodes);
  return e;
}

}  // namespace kadmm
