#ifndef KADMM_ERRORS_HPP
#define KADMM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kadmm {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument (bad rho, out-of-range block index, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operands whose shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number (0 if not applicable).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Model file with a bad magic/version, truncated payload or inconsistent shapes.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

/// Label outside the configured class set, or a non +/-1 target for hinge loss.
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Collective failed: timeout, disconnect or protocol violation. `rank()` is the
/// offending peer, or -1 when it cannot be attributed to a single rank.
class CommError : public Error {
 public:
  CommError(const std::string& what, int rank) : Error(what), rank_(rank) {}
  int rank() const noexcept { return rank_; }

 private:
  int rank_;
};

/// Non-finite ADMM state.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::size_t iteration)
      : Error("non-finite solver state at iteration " + std::to_string(iteration) +
              "; try a different rho"),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Oracle invoked on a problem larger than its desk-scale guard.
class SizeGuardError : public Error {
 public:
  using Error::Error;
};

}  // namespace kadmm

#endif  // KADMM_ERRORS_HPP
