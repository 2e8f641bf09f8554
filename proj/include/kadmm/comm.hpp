#ifndef KADMM_COMM_HPP
#define KADMM_COMM_HPP

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kadmm/matrix.hpp"

namespace kadmm {

enum class Backend { inprocess, socket };

Backend parseBackend(std::string_view name);

inline constexpr std::chrono::milliseconds kDefaultCommTimeout{60'000};

/// Collectives among R ranks. Every rank must call the same collectives in
/// the same order with identically shaped buffers. A handle belongs to one
/// rank and is driven by a single thread.
class Communicator {
 public:
  virtual ~Communicator() = default;

  virtual int rank() const noexcept = 0;
  virtual int size() const noexcept = 0;
  virtual Backend backend() const noexcept = 0;

  /// After the call every rank's `buffer` holds root's values bit-for-bit.
  virtual void broadcast(DenseMatrix& buffer, int root) = 0;

  /// On root, result += sum of all contributions, added one rank at a time in
  /// ascending rank order. `result` must already have the contribution's shape
  /// and must not alias it; other ranks leave `result` untouched.
  virtual void reduceAdd(const DenseMatrix& contribution, DenseMatrix& result, int root) = 0;

  /// reduceAdd into a zeroed result: root gets c_0 + c_1 + ... exactly.
  void reduceSum(const DenseMatrix& contribution, DenseMatrix& result, int root);
  /// Convenience form: the sum on root, an empty matrix elsewhere.
  DenseMatrix reduceSum(const DenseMatrix& contribution, int root);

  /// No rank returns before all ranks have entered.
  virtual void barrier() = 0;

  /// Payload bytes (plus framing, for sockets) this rank sent / received.
  std::uint64_t bytesSent() const noexcept { return bytesSent_; }
  std::uint64_t bytesReceived() const noexcept { return bytesReceived_; }

 protected:
  std::uint64_t bytesSent_ = 0;
  std::uint64_t bytesReceived_ = 0;
};

struct InProcessHub;

/// R ranks living in one process, typically one thread per rank.
class InProcessGroup {
 public:
  explicit InProcessGroup(int size, std::chrono::milliseconds timeout = kDefaultCommTimeout);
  ~InProcessGroup();
  InProcessGroup(const InProcessGroup&) = delete;
  InProcessGroup& operator=(const InProcessGroup&) = delete;

  int size() const noexcept;
  /// Handle for `rank`; may outlive the group object.
  std::unique_ptr<Communicator> communicator(int rank);
  /// Fails every pending and future collective with `reason`.
  void abort(const std::string& reason);

 private:
  std::shared_ptr<InProcessHub> hub_;
};

/// Listening endpoint of rank 0. Port 0 binds an ephemeral port.
class RendezvousListener {
 public:
  RendezvousListener(const std::string& host, std::uint16_t port);
  ~RendezvousListener();
  RendezvousListener(RendezvousListener&& other) noexcept;
  RendezvousListener& operator=(RendezvousListener&&) = delete;
  RendezvousListener(const RendezvousListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  int release() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

struct SocketOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  int rank = 0;
  int size = 1;
  std::chrono::milliseconds timeout = kDefaultCommTimeout;
};

/// "host:port" -> (host, port).
std::pair<std::string, std::uint16_t> parseRendezvous(std::string_view address);

/// TCP star around rank 0. Frames are an 8-byte little-endian payload length,
/// a 4-byte tag, a 4-byte source rank, then little-endian float64 payload.
class SocketCommunicator final : public Communicator {
 public:
  /// Rank 0: accept size-1 peers on `listener`.
  static std::unique_ptr<SocketCommunicator> root(RendezvousListener listener, int size,
                                                  std::chrono::milliseconds timeout = kDefaultCommTimeout);
  /// Rank > 0: connect to rank 0, retrying until the timeout expires.
  static std::unique_ptr<SocketCommunicator> join(const std::string& host, std::uint16_t port, int rank, int size,
                                                  std::chrono::milliseconds timeout = kDefaultCommTimeout);
  /// Either of the above depending on options.rank.
  static std::unique_ptr<SocketCommunicator> create(const SocketOptions& options);

  ~SocketCommunicator() override;

  int rank() const noexcept override { return rank_; }
  int size() const noexcept override { return size_; }
  Backend backend() const noexcept override { return Backend::socket; }

  void broadcast(DenseMatrix& buffer, int root) override;
  /// With a root other than 0 the partial sum is formed on rank 0 and added
  /// to root's result in one step.
  void reduceAdd(const DenseMatrix& contribution, DenseMatrix& result, int root) override;
  void barrier() override;

 private:
  SocketCommunicator(int rank, int size, std::chrono::milliseconds timeout);

  void send(int peer, std::uint32_t tag, std::span<const double> payload);
  void receive(int peer, std::uint32_t tag, std::span<double> payload);
  /// Like receive, but adds the payload into `sum` chunk by chunk.
  void receiveAdd(int peer, std::uint32_t tag, std::span<double> sum);

  int rank_;
  int size_;
  std::chrono::milliseconds timeout_;
  std::vector<int> peers_;  // rank 0: fd per rank; others: fd of rank 0 at index 0
};

}  // namespace kadmm

#endif  // KADMM_COMM_HPP
