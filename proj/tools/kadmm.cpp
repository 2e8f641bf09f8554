// Command-line front end: train, predict, launch, kernel-check, memory.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kadmm/comm.hpp"
#include "kadmm/dataset.hpp"
#include "kadmm/errors.hpp"
#include "kadmm/features.hpp"
#include "kadmm/layout.hpp"
#include "kadmm/model.hpp"
#include "kadmm/solver.hpp"

namespace {

using namespace kadmm;

enum ExitCode : int { kOk = 0, kConfig = 2, kIo = 3, kDivergence = 4, kComm = 5, kInternal = 70 };

constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

struct DataOptions {
  std::string path;
  std::string format = "csv";
  int labelColumn = -1;
  std::size_t dimension = 0;
};

struct TrainOptions {
  DataOptions data;
  std::string loss = "squared";
  std::string task = "auto";
  double lambda = 1e-3;
  double rho = 1.0;
  std::size_t features = 1024;
  double sigma = 1.0;
  std::size_t rows = 1;
  std::size_t cols = 0;
  double kappa = 1.0;
  std::size_t threads = 1;
  std::size_t iters = 100;
  double tol = 0.0;
  std::uint64_t seed = 0;
  std::string backend = "inprocess";
  std::string rendezvous;
  int rank = 0;
  double timeout = 60.0;
  std::size_t nodes = 1;
  std::string out = "model.bin";
  std::string log;
  bool noObjective = false;
};

void addDataOptions(CLI::App& app, DataOptions& o, bool required = true) {
  auto* data = app.add_option("--data", o.path, "Input file");
  if (required) data->required();
  app.add_option("--format", o.format, "csv or svmlight")->check(CLI::IsMember({"csv", "svmlight"}));
  app.add_option("--label-column", o.labelColumn, "csv label column, negative counts from the end");
  app.add_option("--dim", o.dimension, "svmlight input dimension (0 infers it)");
}

void addTrainOptions(CLI::App& app, TrainOptions& o) {
  addDataOptions(app, o.data);
  app.add_option("--loss", o.loss, "squared, hinge or absolute (l1)");
  app.add_option("--task", o.task, "auto, regression or classification")
      ->check(CLI::IsMember({"auto", "regression", "classification"}));
  app.add_option("--lambda", o.lambda, "Regularization strength");
  app.add_option("--rho", o.rho, "ADMM penalty on the summed loss");
  app.add_option("--features", o.features, "Number of random features s");
  app.add_option("--sigma", o.sigma, "Gaussian kernel bandwidth");
  app.add_option("--rows", o.rows, "Row splits R (ranks)");
  app.add_option("--cols", o.cols, "Column splits C (0: ceil(kappa*s/d))");
  app.add_option("--kappa", o.kappa, "Multiplier for the default C");
  app.add_option("--threads", o.threads, "Threads per rank t");
  app.add_option("--iters", o.iters, "Outer iterations");
  app.add_option("--tol", o.tol, "Early-stop tolerance on the primal residuals (0: off)");
  app.add_option("--seed", o.seed, "Random feature seed");
  app.add_option("--backend", o.backend, "inprocess or socket")->check(CLI::IsMember({"inprocess", "socket"}));
  app.add_option("--rendezvous", o.rendezvous, "host:port of rank 0 (socket backend)");
  app.add_option("--rank", o.rank, "This process's rank (socket backend)");
  app.add_option("--timeout", o.timeout, "Collective timeout in seconds");
  app.add_option("--nodes", o.nodes, "Nodes N used for the per-node memory estimate");
  app.add_option("--out", o.out, "Model output path");
  app.add_option("--log", o.log, "Iteration log path (default: <out>.log)");
  app.add_flag("--no-objective", o.noObjective, "Skip objective tracking (saves one n_i x m buffer per rank)");
}

LoadOptions loadOptions(const DataOptions& o, bool hasLabels = true) {
  LoadOptions load;
  load.format = parseDataFormat(o.format);
  load.labelColumn = o.labelColumn;
  load.hasLabels = hasLabels;
  load.dimension = o.dimension;
  return load;
}

std::chrono::milliseconds timeoutOf(double seconds) {
  if (!(seconds > 0.0)) throw ConfigError("timeout must be positive");
  return std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0));
}

void printMemory(const MemoryEstimate& e, std::size_t nodes) {
  std::printf("memory estimate: %.0f floats per process (%.3f GiB), %.0f floats per node on %zu node(s) (%.3f GiB)\n",
              e.floatsPerProcess, e.bytesPerProcess() / kGiB, e.floatsPerNode, nodes, e.bytesPerNode() / kGiB);
  std::fflush(stdout);
}

int runTrain(const TrainOptions& o) {
  const LossKind loss = parseLossKind(o.loss);
  const Backend backend = parseBackend(o.backend);
  const Dataset data = loadDataset(o.data.path, loadOptions(o.data));
  const std::size_t n = data.features.rows(), d = data.features.cols();

  const bool classify = o.task == "classification" || (o.task == "auto" && loss == LossKind::hinge);
  const LabelEncoding encoding = classify ? LabelEncoding::oneVsAll(data.labels) : LabelEncoding::regression();
  const DenseMatrix y = encodeLabels(data.labels, encoding);

  SolverConfig config;
  config.rho = o.rho;
  config.lambda = o.lambda;
  config.maxIter = o.iters;
  config.rowSplits = o.rows;
  config.threads = o.threads;
  config.loss.kind = loss;
  config.tol = o.tol;
  config.trackObjective = !o.noObjective;
  if (o.features == 0) throw ConfigError("--features must be positive");
  const std::size_t cols = o.cols ? o.cols : defaultColumnSplits(o.features, d, o.kappa);
  if (cols > o.features) throw ConfigError("--cols exceeds --features");
  config.transform = TransformDescriptor::gaussian(o.features, cols, o.sigma, o.seed);
  config.validate();
  if (o.rows > n) throw ConfigError("more row splits than examples");
  if (o.nodes < 1 || o.nodes > o.rows) throw ConfigError("--nodes must lie in [1, R]");

  const bool writer = backend == Backend::inprocess || o.rank == 0;
  if (writer) {
    std::printf("n=%zu d=%zu m=%zu s=%zu R=%zu C=%zu t=%zu\n", n, d, y.cols(), o.features, o.rows, cols, o.threads);
    printMemory(memoryEstimate(config, n, d, y.cols(), o.nodes), o.nodes);
  }

  const std::string logPath = o.log.empty() ? o.out + ".log" : o.log;
  std::ofstream log;
  if (writer) {
    log.open(logPath, std::ios::trunc);
    if (!log) throw IoError("cannot open log '" + logPath + "'");
  }
  const IterationObserver observer = [&](const WorkerState& st, const IterationReport& report) {
    if (st.rank != 0) return;
    log << formatReport(report) << '\n' << std::flush;
  };

  Model model;
  if (backend == Backend::inprocess) {
    model = solve(config, data.features, y, encoding, observer).model;
  } else {
    if (o.rendezvous.empty()) throw ConfigError("--rendezvous is required with the socket backend");
    const auto [host, port] = parseRendezvous(o.rendezvous);
    if (o.rank < 0 || static_cast<std::size_t>(o.rank) >= o.rows) throw ConfigError("--rank must lie in [0, R)");
    SocketOptions socket;
    socket.host = host;
    socket.port = port;
    socket.rank = o.rank;
    socket.size = static_cast<int>(o.rows);
    socket.timeout = timeoutOf(o.timeout);
    auto comm = SocketCommunicator::create(socket);
    const BlockLayout layout = BlockLayout::balanced(n, o.rows, o.features, cols);
    const auto i = static_cast<std::size_t>(o.rank);
    WorkerResult result = runWorker(config, rowBlock(data.features, layout, i), rowBlock(y, layout, i), *comm, observer);
    if (o.rank != 0) return kOk;
    model.weights = std::move(result.weights);
    model.transform = config.transform;
    model.inputDim = d;
    model.loss = loss;
    model.labels = encoding;
  }

  saveModel(o.out, model);
  const double finalObjective = objective(model, data.features, y, o.lambda);
  std::printf("objective=%.17g\nmodel=%s\nlog=%s\n", finalObjective, o.out.c_str(), logPath.c_str());
  return kOk;
}

struct PredictOptions {
  DataOptions data;
  std::string model;
  std::string out = "-";
};

int runPredict(const PredictOptions& o) {
  const Model model = loadModel(o.model);
  LoadOptions load = loadOptions(o.data, false);
  load.allowEmpty = true;
  Dataset data;
  if (load.format == DataFormat::svmlight) {
    load.hasLabels = true;
    if (load.dimension == 0) load.dimension = model.inputDim;
    data = loadDataset(o.data.path, load);
  } else {
    // Unlabeled rows have d columns, labeled ones d + 1.
    Dataset raw = loadDataset(o.data.path, load);
    const std::size_t cols = raw.features.cols();
    if (raw.features.rows() == 0 || cols == model.inputDim) {
      data = std::move(raw);
    } else if (cols == model.inputDim + 1) {
      load.hasLabels = true;
      data = loadDataset(o.data.path, load);
    } else {
      throw DimensionError("data has " + std::to_string(cols) + " columns; the model expects " +
                           std::to_string(model.inputDim) + " features (plus an optional label)");
    }
  }

  std::vector<double> predictions;
  if (data.features.rows() > 0) {
    if (data.features.cols() != model.inputDim)
      throw DimensionError("data has " + std::to_string(data.features.cols()) + " features; the model expects " +
                           std::to_string(model.inputDim));
    predictions = predictLabels(model, data.features);
  }

  std::ofstream file;
  if (o.out != "-") {
    file.open(o.out, std::ios::trunc);
    if (!file) throw IoError("cannot open '" + o.out + "' for writing");
  }
  std::ostream& out = o.out == "-" ? std::cout : file;
  for (double p : predictions) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, p);
    out.write(buf, end - buf).put('\n');
  }
  out.flush();

  if (!data.labels.empty() && !predictions.empty()) {
    std::FILE* report = o.out == "-" ? stderr : stdout;
    if (model.labels.mode == LabelMode::oneVsAll) {
      std::size_t hits = 0;
      for (std::size_t k = 0; k < predictions.size(); ++k) hits += predictions[k] == data.labels[k];
      std::fprintf(report, "accuracy=%.4f\n", static_cast<double>(hits) / static_cast<double>(predictions.size()));
    } else {
      double sq = 0.0;
      for (std::size_t k = 0; k < predictions.size(); ++k)
        sq += (predictions[k] - data.labels[k]) * (predictions[k] - data.labels[k]);
      std::fprintf(report, "rmse=%.6g\n", std::sqrt(sq / static_cast<double>(predictions.size())));
    }
  }
  return kOk;
}

struct KernelCheckOptions {
  DataOptions data;
  bool unlabeled = false;
  std::size_t features = 1024;
  std::size_t cols = 1;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  std::size_t pairs = 1000;
};

int runKernelCheck(const KernelCheckOptions& o) {
  const Dataset data = loadDataset(o.data.path, loadOptions(o.data, !o.unlabeled));
  const auto desc = TransformDescriptor::gaussian(o.features, o.cols, o.sigma, o.seed);
  const ApproximationStats stats = approximationReport(desc, data.features, o.pairs, o.seed + 1);
  std::printf("s=%zu sigma=%g pairs=%zu max_abs_err=%.6g rms_err=%.6g\n", o.features, o.sigma, stats.pairs,
              stats.maxAbsErr, stats.rmsErr);
  return kOk;
}

struct MemoryOptions {
  MemoryShape shape;
};

int runMemory(const MemoryOptions& o) {
  const MemoryEstimate e = memoryEstimate(o.shape);
  printMemory(e, static_cast<std::size_t>(o.shape.nodes));
  std::printf("bytes_per_process=%.0f bytes_per_node=%.0f\n", e.bytesPerProcess(), e.bytesPerNode());
  return kOk;
}

// Picks a currently free TCP port on host.
std::uint16_t freePort(const std::string& host) {
  RendezvousListener probe(host, 0);
  return probe.port();
}

int runLaunch(const TrainOptions& o, const std::vector<std::string>& forwarded) {
  if (o.rows < 1) throw ConfigError("--rows must be at least 1");
  std::string rendezvous = o.rendezvous;
  if (rendezvous.empty()) rendezvous = "127.0.0.1:" + std::to_string(freePort("127.0.0.1"));
  parseRendezvous(rendezvous);

  std::vector<pid_t> children;
  const auto killAll = [&] {
    for (pid_t pid : children)
      if (pid > 0) ::kill(pid, SIGTERM);
  };
  for (std::size_t rank = 0; rank < o.rows; ++rank) {
    std::vector<std::string> args{"kadmm", "train"};
    args.insert(args.end(), forwarded.begin(), forwarded.end());
    for (const char* extra : {"--backend", "socket", "--rank"}) args.emplace_back(extra);
    args.push_back(std::to_string(rank));
    if (o.rendezvous.empty()) {
      args.emplace_back("--rendezvous");
      args.push_back(rendezvous);
    }
    std::fflush(nullptr);
    const pid_t pid = ::fork();
    if (pid < 0) {
      killAll();
      throw CommError("fork failed", static_cast<int>(rank));
    }
    if (pid == 0) {
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv("/proc/self/exe", argv.data());
      std::perror("execv");
      ::_exit(kInternal);
    }
    children.push_back(pid);
  }

  int status = kOk;
  std::size_t running = children.size();
  while (running > 0) {
    int raw = 0;
    const pid_t pid = ::waitpid(-1, &raw, 0);
    if (pid < 0) break;
    const auto it = std::find(children.begin(), children.end(), pid);
    if (it == children.end()) continue;
    const auto rank = static_cast<std::size_t>(it - children.begin());
    *it = -1;
    --running;
    const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : kComm;
    if (code != kOk && status == kOk) {
      std::fprintf(stderr, "rank %zu failed with exit code %d; stopping the other ranks\n", rank, code);
      // A rank killed by the launcher or by a peer's failure shows up as a
      // communication failure; keep the first concrete cause.
      status = code == kConfig || code == kIo || code == kDivergence ? code : kComm;
      killAll();
    }
  }
  return status;
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const CommError& e) {
    std::fprintf(stderr, "error: communication failure: %s\n", e.what());
    return kComm;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDivergence;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const ModelFormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const Error& e) {
    // ConfigError, DimensionError, LabelError.
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel machines trained with block-splitting ADMM on random features"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* trainCmd = app.add_subcommand("train", "Train a model");
  addTrainOptions(*trainCmd, train);

  PredictOptions predict;
  auto* predictCmd = app.add_subcommand("predict", "Predict with a saved model");
  addDataOptions(*predictCmd, predict.data);
  predictCmd->add_option("--model", predict.model, "Model file")->required();
  predictCmd->add_option("--out", predict.out, "Predictions file, '-' for stdout");

  TrainOptions launch;
  auto* launchCmd = app.add_subcommand("launch", "Run train as R socket-backend processes on this host");
  addTrainOptions(*launchCmd, launch);

  KernelCheckOptions check;
  auto* checkCmd = app.add_subcommand("kernel-check", "Compare z(x)^T z(y) with the exact Gaussian kernel");
  addDataOptions(*checkCmd, check.data);
  checkCmd->add_flag("--unlabeled", check.unlabeled, "Every csv column is a feature");
  checkCmd->add_option("--features", check.features, "Number of random features s");
  checkCmd->add_option("--cols", check.cols, "Column blocks C");
  checkCmd->add_option("--sigma", check.sigma, "Kernel bandwidth");
  checkCmd->add_option("--seed", check.seed, "Random feature seed");
  checkCmd->add_option("--pairs", check.pairs, "Number of sampled row pairs");

  MemoryOptions memory;
  auto* memoryCmd = app.add_subcommand("memory", "Evaluate the per-process and per-node memory model");
  memoryCmd->add_option("--examples", memory.shape.n, "Examples")->required();
  memoryCmd->add_option("--input-dim", memory.shape.d, "Input dimension")->required();
  memoryCmd->add_option("--outputs", memory.shape.m, "Outputs")->required();
  memoryCmd->add_option("--features", memory.shape.s, "Random features s")->required();
  memoryCmd->add_option("--rows", memory.shape.rowSplits, "R");
  memoryCmd->add_option("--cols", memory.shape.colSplits, "C");
  memoryCmd->add_option("--threads", memory.shape.threads, "t");
  memoryCmd->add_option("--nodes", memory.shape.nodes, "N");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*trainCmd) return guarded([&] { return runTrain(train); });
  if (*predictCmd) return guarded([&] { return runPredict(predict); });
  if (*checkCmd) return guarded([&] { return runKernelCheck(check); });
  if (*memoryCmd) return guarded([&] { return runMemory(memory); });
  if (*launchCmd) {
    return guarded([&] {
      if (launchCmd->count("--backend") || launchCmd->count("--rank"))
        throw ConfigError("launch sets --backend and --rank itself");
      // Forward everything after the subcommand name unchanged.
      std::vector<std::string> forwarded;
      bool seen = false;
      for (int k = 1; k < argc; ++k) {
        if (!seen) {
          seen = std::string(argv[k]) == "launch";
          continue;
        }
        forwarded.emplace_back(argv[k]);
      }
      return runLaunch(launch, forwarded);
    });
  }
  return kConfig;
}
