#include "kadmm/comm.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <thread>

#include "kadmm/errors.hpp"

namespace kadmm {

Backend parseBackend(std::string_view name) {
  if (name == "inprocess") return Backend::inprocess;
  if (name == "socket") return Backend::socket;
  throw ConfigError("unknown backend '" + std::string(name) + "'");
}

namespace {
void checkRoot(int root, int size) {
  if (root < 0 || root >= size) throw ConfigError("collective root " + std::to_string(root) + " out of range");
}
void checkSameShape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw CommError(std::string(what) + ": buffer shapes differ across ranks", -1);
}
}  // namespace

void Communicator::reduceSum(const DenseMatrix& contribution, DenseMatrix& result, int root) {
  if (rank() == root) result.setZero();
  reduceAdd(contribution, result, root);
}

DenseMatrix Communicator::reduceSum(const DenseMatrix& contribution, int root) {
  DenseMatrix sum;
  if (rank() == root) sum = DenseMatrix(contribution.rows(), contribution.cols());
  reduceSum(contribution, sum, root);
  return sum;
}

// ---------------------------------------------------------------------------
// In-process backend

struct InProcessHub {
  InProcessHub(int n, std::chrono::milliseconds t)
      : size(n), timeout(t), present(static_cast<std::size_t>(n), false), slots(static_cast<std::size_t>(n), nullptr) {}

  // Waits for every rank. A non-null `publish` is stored in the rank's slot,
  // where it stays readable until that rank's next publishing call; the
  // collectives follow each publishing sync with a plain one, so readers are
  // done before any slot changes.
  void sync(int rank, const DenseMatrix* publish) {
    std::unique_lock lock(mutex);
    if (failed) throw CommError(failure, failedRank);
    const std::uint64_t myGeneration = generation;
    if (publish) slots[static_cast<std::size_t>(rank)] = publish;
    present[static_cast<std::size_t>(rank)] = true;
    if (++arrived == size) {
      arrived = 0;
      std::fill(present.begin(), present.end(), false);
      ++generation;
      cv.notify_all();
      return;
    }
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    const bool released = cv.wait_until(lock, deadline, [&] { return generation != myGeneration || failed; });
    if (generation != myGeneration) return;
    if (!released && !failed) {
      std::string missing;
      for (int r = 0; r < size; ++r) {
        if (present[static_cast<std::size_t>(r)]) continue;
        if (failedRank < 0) failedRank = r;
        missing += (missing.empty() ? "" : ", ") + std::to_string(r);
      }
      failed = true;
      failure = "collective timed out waiting for rank " + missing;
      cv.notify_all();
    }
    throw CommError(failure, failedRank);
  }

  void abort(const std::string& reason) {
    std::lock_guard lock(mutex);
    if (!failed) {
      failed = true;
      failure = reason;
    }
    cv.notify_all();
  }

  const int size;
  const std::chrono::milliseconds timeout;
  std::mutex mutex;
  std::condition_variable cv;
  std::uint64_t generation = 0;
  int arrived = 0;
  std::vector<bool> present;
  std::vector<const DenseMatrix*> slots;
  bool failed = false;
  int failedRank = -1;
  std::string failure;
};

namespace {

class InProcessCommunicator final : public Communicator {
 public:
  InProcessCommunicator(std::shared_ptr<InProcessHub> hub, int rank) : hub_(std::move(hub)), rank_(rank) {}

  int rank() const noexcept override { return rank_; }
  int size() const noexcept override { return hub_->size; }
  Backend backend() const noexcept override { return Backend::inprocess; }

  void broadcast(DenseMatrix& buffer, int root) override {
    checkRoot(root, size());
    if (size() == 1) return;
    hub_->sync(rank_, &buffer);
    const std::uint64_t bytes = buffer.size() * sizeof(double);
    if (rank_ != root) {
      const DenseMatrix& source = *hub_->slots[static_cast<std::size_t>(root)];
      checkSameShape(source, buffer, "broadcast");
      std::copy(source.data().begin(), source.data().end(), buffer.data().begin());
      bytesReceived_ += bytes;
    } else {
      bytesSent_ += bytes * static_cast<std::uint64_t>(size() - 1);
    }
    hub_->sync(rank_, nullptr);
  }

  void reduceAdd(const DenseMatrix& contribution, DenseMatrix& result, int root) override {
    checkRoot(root, size());
    if (rank_ == root) checkSameShape(contribution, result, "reduce");
    if (size() == 1) {
      axpy(1.0, contribution, result.view());
      return;
    }
    hub_->sync(rank_, &contribution);
    const std::uint64_t bytes = contribution.size() * sizeof(double);
    if (rank_ == root) {
      for (int r = 0; r < size(); ++r) {
        const DenseMatrix& part = *hub_->slots[static_cast<std::size_t>(r)];
        checkSameShape(part, result, "reduce");
        axpy(1.0, part, result.view());
      }
      bytesReceived_ += bytes * static_cast<std::uint64_t>(size() - 1);
    } else {
      bytesSent_ += bytes;
    }
    hub_->sync(rank_, nullptr);
  }

  void barrier() override {
    if (size() == 1) return;
    hub_->sync(rank_, nullptr);
  }

 private:
  std::shared_ptr<InProcessHub> hub_;
  int rank_;
};

}  // namespace

InProcessGroup::InProcessGroup(int size, std::chrono::milliseconds timeout) {
  if (size < 1) throw ConfigError("communicator size must be at least 1");
  hub_ = std::make_shared<InProcessHub>(size, timeout);
}

InProcessGroup::~InProcessGroup() = default;

int InProcessGroup::size() const noexcept { return hub_->size; }

std::unique_ptr<Communicator> InProcessGroup::communicator(int rank) {
  if (rank < 0 || rank >= hub_->size) throw ConfigError("rank " + std::to_string(rank) + " out of range");
  return std::make_unique<InProcessCommunicator>(hub_, rank);
}

void InProcessGroup::abort(const std::string& reason) { hub_->abort(reason); }

// ---------------------------------------------------------------------------
// Socket backend

namespace {

enum Tag : std::uint32_t {
  kHello = 1,
  kWelcome = 2,
  kBroadcast = 3,
  kReduce = 4,
  kReduceResult = 5,
  kBarrier = 6,
  kRelease = 7,
};

constexpr std::size_t kHeaderBytes = 16;

using Clock = std::chrono::steady_clock;

std::string errnoText() { return std::strerror(errno); }

void putLe(unsigned char* out, std::uint64_t value, std::size_t bytes) {
  for (std::size_t k = 0; k < bytes; ++k) out[k] = static_cast<unsigned char>(value >> (8 * k));
}

std::uint64_t getLe(const unsigned char* in, std::size_t bytes) {
  std::uint64_t value = 0;
  for (std::size_t k = 0; k < bytes; ++k) value |= static_cast<std::uint64_t>(in[k]) << (8 * k);
  return value;
}

void writeAll(int fd, const void* data, std::size_t length, int peer) {
  const auto* p = static_cast<const unsigned char*>(data);
  while (length > 0) {
    const ssize_t n = ::send(fd, p, length, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK)
        throw CommError("timed out sending to rank " + std::to_string(peer), peer);
      throw CommError("send to rank " + std::to_string(peer) + " failed: " + errnoText(), peer);
    }
    p += n;
    length -= static_cast<std::size_t>(n);
  }
}

void readAll(int fd, void* data, std::size_t length, int peer, Clock::time_point deadline) {
  auto* p = static_cast<unsigned char*>(data);
  while (length > 0) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (remaining <= 0) throw CommError("timed out waiting for rank " + std::to_string(peer), peer);
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1'000'000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw CommError("poll failed: " + errnoText(), peer);
    }
    if (ready == 0) continue;
    const ssize_t n = ::recv(fd, p, length, 0);
    if (n == 0) throw CommError("rank " + std::to_string(peer) + " disconnected", peer);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw CommError("receive from rank " + std::to_string(peer) + " failed: " + errnoText(), peer);
    }
    p += n;
    length -= static_cast<std::size_t>(n);
  }
}

void sendFrame(int fd, std::uint32_t tag, std::uint32_t source, std::span<const double> payload, int peer) {
  std::array<unsigned char, kHeaderBytes> header{};
  putLe(header.data(), payload.size() * sizeof(double), 8);
  putLe(header.data() + 8, tag, 4);
  putLe(header.data() + 12, source, 4);
  writeAll(fd, header.data(), header.size(), peer);
  if constexpr (std::endian::native == std::endian::little) {
    writeAll(fd, payload.data(), payload.size() * sizeof(double), peer);
  } else {
    std::vector<unsigned char> bytes(payload.size() * sizeof(double));
    for (std::size_t k = 0; k < payload.size(); ++k)
      putLe(bytes.data() + 8 * k, std::bit_cast<std::uint64_t>(payload[k]), 8);
    writeAll(fd, bytes.data(), bytes.size(), peer);
  }
}

// Reads a frame header and checks tag, source and payload length.
void receiveHeader(int fd, std::uint32_t tag, int expectedSource, std::size_t payloadBytes, int peer,
                   Clock::time_point deadline) {
  std::array<unsigned char, kHeaderBytes> header{};
  readAll(fd, header.data(), header.size(), peer, deadline);
  const std::uint64_t length = getLe(header.data(), 8);
  const auto gotTag = static_cast<std::uint32_t>(getLe(header.data() + 8, 4));
  const auto gotSource = static_cast<int>(getLe(header.data() + 12, 4));
  if (gotTag != tag)
    throw CommError("protocol error: expected message tag " + std::to_string(tag) + " from rank " +
                        std::to_string(peer) + ", got " + std::to_string(gotTag),
                    peer);
  if (expectedSource >= 0 && gotSource != expectedSource)
    throw CommError("protocol error: unexpected source rank " + std::to_string(gotSource), peer);
  if (length != payloadBytes) throw CommError("buffer shape mismatch with rank " + std::to_string(peer), peer);
}

void fromLittleEndian(std::span<double> values) {
  if constexpr (std::endian::native != std::endian::little) {
    for (double& v : values) {
      unsigned char raw[8];
      std::memcpy(raw, &v, 8);
      v = std::bit_cast<double>(getLe(raw, 8));
    }
  }
}

void receiveFrame(int fd, std::uint32_t tag, int expectedSource, std::span<double> payload, int peer,
                  Clock::time_point deadline) {
  receiveHeader(fd, tag, expectedSource, payload.size() * sizeof(double), peer, deadline);
  readAll(fd, payload.data(), payload.size() * sizeof(double), peer, deadline);
  fromLittleEndian(payload);
}

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &result);
  if (rc != 0) throw CommError("cannot resolve '" + host + "': " + ::gai_strerror(rc), -1);
  return result;
}

void setSendTimeout(int fd, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

std::pair<std::string, std::uint16_t> parseRendezvous(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos) throw ConfigError("rendezvous must be host:port");
  const std::string_view portText = address.substr(colon + 1);
  unsigned port = 0;
  const auto [ptr, ec] = std::from_chars(portText.data(), portText.data() + portText.size(), port);
  if (ec != std::errc() || ptr != portText.data() + portText.size() || port > 65535)
    throw ConfigError("invalid rendezvous port '" + std::string(portText) + "'");
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

RendezvousListener::RendezvousListener(const std::string& host, std::uint16_t port) {
  addrinfo* info = resolve(host, port, true);
  fd_ = ::socket(info->ai_family, info->ai_socktype, info->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(info);
    throw CommError("socket() failed: " + errnoText(), -1);
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, info->ai_addr, info->ai_addrlen) != 0 || ::listen(fd_, 128) != 0) {
    const std::string reason = errnoText();
    ::freeaddrinfo(info);
    ::close(fd_);
    fd_ = -1;
    throw CommError("cannot listen on " + host + ":" + std::to_string(port) + ": " + reason, -1);
  }
  ::freeaddrinfo(info);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

RendezvousListener::~RendezvousListener() {
  if (fd_ >= 0) ::close(fd_);
}

RendezvousListener::RendezvousListener(RendezvousListener&& other) noexcept
    : fd_(other.fd_), port_(other.port_) {
  other.fd_ = -1;
}

int RendezvousListener::release() noexcept {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

SocketCommunicator::SocketCommunicator(int rank, int size, std::chrono::milliseconds timeout)
    : rank_(rank), size_(size), timeout_(timeout), peers_(static_cast<std::size_t>(size), -1) {}

SocketCommunicator::~SocketCommunicator() {
  for (int fd : peers_)
    if (fd >= 0) ::close(fd);
}

std::unique_ptr<SocketCommunicator> SocketCommunicator::root(RendezvousListener listener, int size,
                                                             std::chrono::milliseconds timeout) {
  if (size < 1) throw ConfigError("communicator size must be at least 1");
  std::unique_ptr<SocketCommunicator> comm(new SocketCommunicator(0, size, timeout));
  const int listenFd = listener.release();
  const auto deadline = Clock::now() + timeout;
  int joined = 1;
  try {
    while (joined < size) {
      const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (remaining <= 0) {
        std::string missing;
        for (int r = 1; r < size; ++r)
          if (comm->peers_[static_cast<std::size_t>(r)] < 0) missing += (missing.empty() ? "" : ", ") + std::to_string(r);
        int first = 1;
        while (comm->peers_[static_cast<std::size_t>(first)] >= 0) ++first;
        throw CommError("rendezvous timed out waiting for rank " + missing, first);
      }
      pollfd pfd{listenFd, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(remaining));
      if (ready <= 0) continue;
      const int fd = ::accept(listenFd, nullptr, nullptr);
      if (fd < 0) continue;
      setSendTimeout(fd, timeout);
      double hello = 0.0;
      std::array<unsigned char, kHeaderBytes> header{};
      try {
        readAll(fd, header.data(), header.size(), -1, deadline);
      } catch (const CommError&) {
        ::close(fd);
        continue;
      }
      const auto source = static_cast<int>(getLe(header.data() + 12, 4));
      if (getLe(header.data() + 8, 4) != kHello || getLe(header.data(), 8) != sizeof(double) || source <= 0 ||
          source >= size || comm->peers_[static_cast<std::size_t>(source)] >= 0) {
        ::close(fd);
        continue;
      }
      readAll(fd, &hello, sizeof hello, source, deadline);
      if (static_cast<int>(hello) != size) {
        ::close(fd);
        throw CommError("rank " + std::to_string(source) + " expects a group of " +
                            std::to_string(static_cast<int>(hello)) + " ranks",
                        source);
      }
      comm->peers_[static_cast<std::size_t>(source)] = fd;
      ++joined;
    }
  } catch (...) {
    ::close(listenFd);
    throw;
  }
  ::close(listenFd);
  const double ack = static_cast<double>(size);
  for (int r = 1; r < size; ++r) comm->send(r, kWelcome, std::span(&ack, 1));
  return comm;
}

std::unique_ptr<SocketCommunicator> SocketCommunicator::join(const std::string& host, std::uint16_t port, int rank,
                                                             int size, std::chrono::milliseconds timeout) {
  if (rank <= 0 || rank >= size) throw ConfigError("joining rank must lie in [1, size)");
  std::unique_ptr<SocketCommunicator> comm(new SocketCommunicator(rank, size, timeout));
  const auto deadline = Clock::now() + timeout;
  int fd = -1;
  while (fd < 0) {
    addrinfo* info = resolve(host, port, false);
    fd = ::socket(info->ai_family, info->ai_socktype, info->ai_protocol);
    if (fd >= 0 && ::connect(fd, info->ai_addr, info->ai_addrlen) != 0) {
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(info);
    if (fd >= 0) break;
    if (Clock::now() >= deadline)
      throw CommError("could not reach rank 0 at " + host + ":" + std::to_string(port), 0);
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  setSendTimeout(fd, timeout);
  comm->peers_[0] = fd;
  const double hello = static_cast<double>(size);
  comm->send(0, kHello, std::span(&hello, 1));
  double ack = 0.0;
  receiveFrame(fd, kWelcome, 0, std::span(&ack, 1), 0, deadline);
  return comm;
}

std::unique_ptr<SocketCommunicator> SocketCommunicator::create(const SocketOptions& options) {
  if (options.size < 1 || options.rank < 0 || options.rank >= options.size)
    throw ConfigError("rank " + std::to_string(options.rank) + " out of range for size " +
                      std::to_string(options.size));
  if (options.rank == 0)
    return root(RendezvousListener(options.host, options.port), options.size, options.timeout);
  return join(options.host, options.port, options.rank, options.size, options.timeout);
}

void SocketCommunicator::send(int peer, std::uint32_t tag, std::span<const double> payload) {
  const int fd = peers_[static_cast<std::size_t>(rank_ == 0 ? peer : 0)];
  sendFrame(fd, tag, static_cast<std::uint32_t>(rank_), payload, peer);
  bytesSent_ += kHeaderBytes + payload.size() * sizeof(double);
}

void SocketCommunicator::receive(int peer, std::uint32_t tag, std::span<double> payload) {
  const int fd = peers_[static_cast<std::size_t>(rank_ == 0 ? peer : 0)];
  receiveFrame(fd, tag, peer, payload, peer, Clock::now() + timeout_);
  bytesReceived_ += kHeaderBytes + payload.size() * sizeof(double);
}

void SocketCommunicator::receiveAdd(int peer, std::uint32_t tag, std::span<double> sum) {
  const int fd = peers_[static_cast<std::size_t>(rank_ == 0 ? peer : 0)];
  const auto deadline = Clock::now() + timeout_;
  receiveHeader(fd, tag, peer, sum.size() * sizeof(double), peer, deadline);
  std::array<double, 512> chunk;
  for (std::size_t begin = 0; begin < sum.size(); begin += chunk.size()) {
    const std::size_t count = std::min(chunk.size(), sum.size() - begin);
    readAll(fd, chunk.data(), count * sizeof(double), peer, deadline);
    fromLittleEndian(std::span(chunk.data(), count));
    for (std::size_t k = 0; k < count; ++k) sum[begin + k] += chunk[k];
  }
  bytesReceived_ += kHeaderBytes + sum.size() * sizeof(double);
}

void SocketCommunicator::broadcast(DenseMatrix& buffer, int root) {
  checkRoot(root, size_);
  if (size_ == 1) return;
  if (rank_ == 0) {
    if (root != 0) receive(root, kBroadcast, buffer.data());
    for (int r = 1; r < size_; ++r)
      if (r != root) send(r, kBroadcast, buffer.data());
  } else if (rank_ == root) {
    send(0, kBroadcast, buffer.data());
  } else {
    receive(0, kBroadcast, buffer.data());
  }
}

void SocketCommunicator::reduceAdd(const DenseMatrix& contribution, DenseMatrix& result, int root) {
  checkRoot(root, size_);
  if (rank_ == root) checkSameShape(contribution, result, "reduce");
  if (size_ == 1) {
    axpy(1.0, contribution, result.view());
    return;
  }
  if (rank_ != 0) {
    send(0, kReduce, contribution.data());
    if (rank_ == root) receiveAdd(0, kReduceResult, result.data());
    return;
  }
  // Rank 0 accumulates in ascending rank order, straight into the result when
  // it is the root and into a forwarded partial sum otherwise.
  if (root == 0) {
    axpy(1.0, contribution, result.view());
    for (int r = 1; r < size_; ++r) receiveAdd(r, kReduce, result.data());
    return;
  }
  DenseMatrix partial(contribution.view());
  for (int r = 1; r < size_; ++r) receiveAdd(r, kReduce, partial.data());
  send(root, kReduceResult, partial.data());
}

void SocketCommunicator::barrier() {
  if (size_ == 1) return;
  if (rank_ == 0) {
    for (int r = 1; r < size_; ++r) receive(r, kBarrier, {});
    for (int r = 1; r < size_; ++r) send(r, kRelease, {});
  } else {
    send(0, kBarrier, {});
    receive(0, kRelease, {});
  }
}

}  // namespace kadmm
