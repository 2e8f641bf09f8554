#include "doctest.h"

#include <atomic>
#include <chrono>
#include <functional>
#include <future>
#include <thread>

#include "kadmm/comm.hpp"
#include "kadmm/errors.hpp"
#include "test_data.hpp"

using namespace kadmm;
using namespace std::chrono_literals;

namespace {

using RankBody = std::function<void(Communicator&)>;

// Runs body on every rank of an in-process group, one thread each, and
// rethrows the first failure.
void runInProcess(int size, const RankBody& body, std::chrono::milliseconds timeout = 10s) {
  InProcessGroup group(size, timeout);
  std::vector<std::future<void>> ranks;
  for (int r = 0; r < size; ++r)
    ranks.push_back(std::async(std::launch::async, [&, r] {
      auto comm = group.communicator(r);
      body(*comm);
    }));
  for (auto& f : ranks) f.get();
}

void runSockets(int size, const RankBody& body, std::chrono::milliseconds timeout = 10s) {
  RendezvousListener listener("127.0.0.1", 0);
  const auto port = listener.port();
  std::vector<std::future<void>> ranks;
  ranks.push_back(std::async(std::launch::async, [&, l = std::move(listener)]() mutable {
    auto comm = SocketCommunicator::root(std::move(l), size, timeout);
    body(*comm);
  }));
  for (int r = 1; r < size; ++r)
    ranks.push_back(std::async(std::launch::async, [&, r] {
      auto comm = SocketCommunicator::join("127.0.0.1", port, r, size, timeout);
      body(*comm);
    }));
  for (auto& f : ranks) f.get();
}

DenseMatrix contributionOf(int rank, std::size_t rows, std::size_t cols) {
  std::mt19937_64 rng(100 + rank);
  return testing::gaussianMatrix(rows, cols, rng);
}

void collectivesAgree(const std::function<void(int, const RankBody&)>& run) {
  constexpr int kSize = 3;
  DenseMatrix expected = contributionOf(0, 17, 5);
  for (int r = 1; r < kSize; ++r) axpy(1.0, contributionOf(r, 17, 5), expected.view());

  for (int root = 0; root < kSize; ++root) {
    CAPTURE(root);
    run(kSize, [&](Communicator& comm) {
      CHECK(comm.size() == kSize);
      DenseMatrix buffer = comm.rank() == root ? contributionOf(root, 17, 5) : DenseMatrix(17, 5);
      comm.broadcast(buffer, root);
      CHECK(buffer == contributionOf(root, 17, 5));

      DenseMatrix result = comm.rank() == root ? DenseMatrix(17, 5) : DenseMatrix();
      comm.reduceSum(contributionOf(comm.rank(), 17, 5), result, root);
      // summed in ascending rank order, so the result is bit-exact
      if (comm.rank() == root) CHECK(result == expected);
      else CHECK(result.empty());

      const auto sum = comm.reduceSum(contributionOf(comm.rank(), 17, 5), root);
      if (comm.rank() == root) CHECK(sum == expected);
      comm.barrier();
    });
  }
}

}  // namespace

TEST_CASE("in-process collectives") { collectivesAgree([](int n, const RankBody& b) { runInProcess(n, b); }); }

TEST_CASE("socket collectives") { collectivesAgree([](int n, const RankBody& b) { runSockets(n, b); }); }

TEST_CASE("single rank is a no-op") {
  runInProcess(1, [](Communicator& comm) {
    DenseMatrix a{{1, 2}};
    comm.broadcast(a, 0);
    CHECK(comm.reduceSum(a, 0) == a);
    comm.barrier();
  });
}

TEST_CASE("barrier waits for the slowest rank") {
  for (auto run : {+[](int n, const RankBody& b) { runInProcess(n, b); },
                   +[](int n, const RankBody& b) { runSockets(n, b); }}) {
    std::atomic<int> arrived{0};
    run(3, [&](Communicator& comm) {
      std::this_thread::sleep_for(std::chrono::milliseconds(60 * comm.rank()));
      arrived.fetch_add(1);
      comm.barrier();
      CHECK(arrived.load() == 3);
    });
  }
}

TEST_CASE("reduce traffic is proportional to the payload") {
  runInProcess(2, [](Communicator& comm) {
    const DenseMatrix w(40, 10, 1.0);
    DenseMatrix out = comm.rank() == 0 ? DenseMatrix(40, 10) : DenseMatrix();
    const auto before = comm.bytesSent() + comm.bytesReceived();
    comm.reduceSum(w, out, 0);
    const auto moved = comm.bytesSent() + comm.bytesReceived() - before;
    CHECK(moved >= 8 * 400);
    CHECK(moved <= 2 * 8 * 400);
  });
  runSockets(2, [](Communicator& comm) {
    const DenseMatrix w(40, 10, 1.0);
    DenseMatrix out = comm.rank() == 0 ? DenseMatrix(40, 10) : DenseMatrix();
    const auto before = comm.bytesSent() + comm.bytesReceived();
    comm.reduceSum(w, out, 0);
    const auto moved = comm.bytesSent() + comm.bytesReceived() - before;
    CHECK(moved >= 8 * 400);
    CHECK(moved <= 2 * 8 * 400 + 256);
  });
}

TEST_CASE("in-process timeout names the missing rank") {
  InProcessGroup group(3, 200ms);
  auto c0 = group.communicator(0), c1 = group.communicator(1);
  auto other = std::async(std::launch::async, [&] {
    try {
      c1->barrier();
    } catch (const CommError&) {
    }
  });
  try {
    c0->barrier();
    FAIL("expected a timeout");
  } catch (const CommError& e) {
    CHECK(e.rank() == 2);
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
  other.get();
}

TEST_CASE("socket rendezvous timeout names the missing rank") {
  RendezvousListener listener("127.0.0.1", 0);
  const auto port = listener.port();
  auto joined = std::async(std::launch::async, [&] { return SocketCommunicator::join("127.0.0.1", port, 1, 3, 2s); });
  try {
    SocketCommunicator::root(std::move(listener), 3, 300ms);
    FAIL("expected a timeout");
  } catch (const CommError& e) {
    CHECK(e.rank() == 2);
  }
  CHECK_THROWS_AS(joined.get(), CommError);
}

TEST_CASE("abort fails pending collectives") {
  InProcessGroup group(2, 10s);
  auto c0 = group.communicator(0);
  auto waiting = std::async(std::launch::async, [&] { c0->barrier(); });
  std::this_thread::sleep_for(50ms);
  group.abort("peer failed");
  CHECK_THROWS_AS(waiting.get(), CommError);
}

TEST_CASE("mismatched shapes and bad roots") {
  CHECK_THROWS_AS(runInProcess(2,
                               [](Communicator& comm) {
                                 DenseMatrix a(1, 1);
                                 comm.broadcast(a, 5);
                               }),
                  ConfigError);
  CHECK_THROWS_AS(runInProcess(1, [](Communicator& comm) {
                    DenseMatrix out(2, 2);
                    comm.reduceSum(DenseMatrix(1, 1), out, 0);
                  }),
                  CommError);
}

TEST_CASE("listening on a busy port fails") {
  RendezvousListener first("127.0.0.1", 0);
  CHECK_THROWS_AS(RendezvousListener("127.0.0.1", first.port()), CommError);
}

TEST_CASE("rendezvous addresses") {
  CHECK(parseRendezvous("127.0.0.1:5000") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 5000});
  CHECK_THROWS(parseRendezvous("localhost"));
  CHECK_THROWS(parseRendezvous("host:99999"));
  CHECK(parseBackend("socket") == Backend::socket);
  CHECK_THROWS_AS(parseBackend("mpi"), ConfigError);
}
