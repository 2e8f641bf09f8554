#ifndef KADMM_MATRIX_HPP
#define KADMM_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace kadmm {

/// Non-owning, read-only view of a contiguous row-major matrix.
struct ConstMatrixView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return data.subspan(r * cols, cols); }
  /// Rows [begin, end).
  ConstMatrixView rowRange(std::size_t begin, std::size_t end) const;
};

/// Non-owning, mutable view of a contiguous row-major matrix.
struct MatrixView {
  std::span<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  MatrixView rowRange(std::size_t begin, std::size_t end) const;
  operator ConstMatrixView() const { return {data, rows, cols}; }
};

/// Row-major matrix of doubles. Every construction and destruction is
/// reported to the process-wide float counter in `memory`.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);
  explicit DenseMatrix(ConstMatrixView view);

  DenseMatrix(const DenseMatrix& other);
  DenseMatrix(DenseMatrix&& other) noexcept;
  DenseMatrix& operator=(const DenseMatrix& other);
  DenseMatrix& operator=(DenseMatrix&& other) noexcept;
  ~DenseMatrix();

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> row(std::size_t r) const { return data().subspan(r * cols_, cols_); }

  ConstMatrixView view() const noexcept { return {data_, rows_, cols_}; }
  MatrixView view() noexcept { return {data_, rows_, cols_}; }
  operator ConstMatrixView() const noexcept { return view(); }

  ConstMatrixView rowRange(std::size_t begin, std::size_t end) const { return view().rowRange(begin, end); }
  MatrixView rowRange(std::size_t begin, std::size_t end) { return view().rowRange(begin, end); }

  void setZero();
  /// Reshape to rows x cols, zero-filled.
  void resize(std::size_t rows, std::size_t cols);

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Accounting of floats held by live DenseMatrix objects in this process.
namespace memory {
std::size_t liveFloats() noexcept;
std::size_t peakFloats() noexcept;
/// Restart peak tracking from the current live count.
void resetPeak() noexcept;
}  // namespace memory

// Dense kernels. Output views must not alias inputs.

/// out = a * b
void multiply(ConstMatrixView a, ConstMatrixView b, MatrixView out);
DenseMatrix multiply(ConstMatrixView a, ConstMatrixView b);
/// out = a^T * b
void multiplyTransposed(ConstMatrixView a, ConstMatrixView b, MatrixView out);
DenseMatrix multiplyTransposed(ConstMatrixView a, ConstMatrixView b);
/// out += alpha * a * b
void multiplyAdd(ConstMatrixView a, ConstMatrixView b, MatrixView out, double alpha = 1.0);
/// out += alpha * a^T * b
void multiplyTransposedAdd(ConstMatrixView a, ConstMatrixView b, MatrixView out, double alpha = 1.0);

/// y += alpha * x (same shape).
void axpy(double alpha, ConstMatrixView x, MatrixView y);
void scale(double alpha, MatrixView x);
void copyInto(ConstMatrixView src, MatrixView dst);

DenseMatrix transpose(ConstMatrixView a);
DenseMatrix subtract(ConstMatrixView a, ConstMatrixView b);
/// Column block [begin, end) as a new matrix.
DenseMatrix columnRange(ConstMatrixView a, std::size_t begin, std::size_t end);
/// Horizontal concatenation of blocks with equal row counts.
DenseMatrix concatColumns(std::span<const DenseMatrix> blocks);

double frobeniusNorm(ConstMatrixView a);
double squaredNorm(ConstMatrixView a);
double squaredDistance(ConstMatrixView a, ConstMatrixView b);
double maxAbsDiff(ConstMatrixView a, ConstMatrixView b);
double maxAbs(ConstMatrixView a);
bool allFinite(ConstMatrixView a);

}  // namespace kadmm

#endif  // KADMM_MATRIX_HPP
