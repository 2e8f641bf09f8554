#include "kadmm/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "eigen_map.hpp"
#include "kadmm/errors.hpp"

namespace kadmm {

namespace memory {
namespace {
std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};
}  // namespace

static void acquire(std::size_t n) noexcept {
  if (n == 0) return;
  const std::size_t now = g_live.fetch_add(n, std::memory_order_relaxed) + n;
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}

static void release(std::size_t n) noexcept {
  if (n) g_live.fetch_sub(n, std::memory_order_relaxed);
}

std::size_t liveFloats() noexcept { return g_live.load(); }
std::size_t peakFloats() noexcept { return g_peak.load(); }
void resetPeak() noexcept { g_peak.store(g_live.load()); }
}  // namespace memory

ConstMatrixView ConstMatrixView::rowRange(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows) throw DimensionError("row range out of bounds");
  return {data.subspan(begin * cols, (end - begin) * cols), end - begin, cols};
}

MatrixView MatrixView::rowRange(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows) throw DimensionError("row range out of bounds");
  return {data.subspan(begin * cols, (end - begin) * cols), end - begin, cols};
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  memory::acquire(data_.size());
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw DimensionError("data length does not match rows*cols");
  memory::acquire(data_.size());
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  memory::acquire(data_.size());
}

DenseMatrix::DenseMatrix(ConstMatrixView view)
    : rows_(view.rows), cols_(view.cols), data_(view.data.begin(), view.data.end()) {
  memory::acquire(data_.size());
}

DenseMatrix::DenseMatrix(const DenseMatrix& other)
    : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
  memory::acquire(data_.size());
}

DenseMatrix::DenseMatrix(DenseMatrix&& other) noexcept
    : rows_(other.rows_), cols_(other.cols_), data_(std::move(other.data_)) {
  other.rows_ = other.cols_ = 0;
  other.data_.clear();
}

DenseMatrix& DenseMatrix::operator=(const DenseMatrix& other) {
  if (this != &other) {
    memory::release(data_.size());
    data_ = other.data_;
    rows_ = other.rows_;
    cols_ = other.cols_;
    memory::acquire(data_.size());
  }
  return *this;
}

DenseMatrix& DenseMatrix::operator=(DenseMatrix&& other) noexcept {
  if (this != &other) {
    memory::release(data_.size());
    data_ = std::move(other.data_);
    rows_ = other.rows_;
    cols_ = other.cols_;
    other.rows_ = other.cols_ = 0;
    other.data_.clear();
  }
  return *this;
}

DenseMatrix::~DenseMatrix() { memory::release(data_.size()); }

void DenseMatrix::setZero() { std::fill(data_.begin(), data_.end(), 0.0); }

void DenseMatrix::resize(std::size_t rows, std::size_t cols) {
  memory::release(data_.size());
  data_.assign(rows * cols, 0.0);
  rows_ = rows;
  cols_ = cols;
  memory::acquire(data_.size());
}

namespace {
void requireSameShape(ConstMatrixView a, ConstMatrixView b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols) throw DimensionError(std::string(what) + ": shape mismatch");
}
}  // namespace

void multiply(ConstMatrixView a, ConstMatrixView b, MatrixView out) {
  if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols)
    throw DimensionError("multiply: shape mismatch");
  detail::map(out).noalias() = detail::map(a) * detail::map(b);
}

DenseMatrix multiply(ConstMatrixView a, ConstMatrixView b) {
  DenseMatrix out(a.rows, b.cols);
  multiply(a, b, out.view());
  return out;
}

void multiplyTransposed(ConstMatrixView a, ConstMatrixView b, MatrixView out) {
  if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols)
    throw DimensionError("multiplyTransposed: shape mismatch");
  detail::map(out).noalias() = detail::map(a).transpose() * detail::map(b);
}

DenseMatrix multiplyTransposed(ConstMatrixView a, ConstMatrixView b) {
  DenseMatrix out(a.cols, b.cols);
  multiplyTransposed(a, b, out.view());
  return out;
}

void multiplyAdd(ConstMatrixView a, ConstMatrixView b, MatrixView out, double alpha) {
  if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols)
    throw DimensionError("multiplyAdd: shape mismatch");
  detail::map(out).noalias() += alpha * (detail::map(a) * detail::map(b));
}

void multiplyTransposedAdd(ConstMatrixView a, ConstMatrixView b, MatrixView out, double alpha) {
  if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols)
    throw DimensionError("multiplyTransposedAdd: shape mismatch");
  detail::map(out).noalias() += alpha * (detail::map(a).transpose() * detail::map(b));
}

void axpy(double alpha, ConstMatrixView x, MatrixView y) {
  requireSameShape(x, y, "axpy");
  for (std::size_t k = 0; k < x.data.size(); ++k) y.data[k] += alpha * x.data[k];
}

void scale(double alpha, MatrixView x) {
  for (double& v : x.data) v *= alpha;
}

void copyInto(ConstMatrixView src, MatrixView dst) {
  requireSameShape(src, dst, "copyInto");
  std::copy(src.data.begin(), src.data.end(), dst.data.begin());
}

DenseMatrix transpose(ConstMatrixView a) {
  DenseMatrix out(a.cols, a.rows);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = 0; c < a.cols; ++c) out(c, r) = a(r, c);
  return out;
}

DenseMatrix subtract(ConstMatrixView a, ConstMatrixView b) {
  requireSameShape(a, b, "subtract");
  DenseMatrix out(a);
  axpy(-1.0, b, out.view());
  return out;
}

DenseMatrix columnRange(ConstMatrixView a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols) throw DimensionError("column range out of bounds");
  DenseMatrix out(a.rows, end - begin);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = a(r, c);
  return out;
}

DenseMatrix concatColumns(std::span<const DenseMatrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw DimensionError("concatColumns: row count mismatch");
    cols += b.cols();
  }
  DenseMatrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < b.cols(); ++c) out(r, offset + c) = b(r, c);
    offset += b.cols();
  }
  return out;
}

double squaredNorm(ConstMatrixView a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return s;
}

double frobeniusNorm(ConstMatrixView a) { return std::sqrt(squaredNorm(a)); }

double squaredDistance(ConstMatrixView a, ConstMatrixView b) {
  requireSameShape(a, b, "squaredDistance");
  double s = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    const double d = a.data[k] - b.data[k];
    s += d * d;
  }
  return s;
}

double maxAbsDiff(ConstMatrixView a, ConstMatrixView b) {
  requireSameShape(a, b, "maxAbsDiff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) m = std::max(m, std::abs(a.data[k] - b.data[k]));
  return m;
}

double maxAbs(ConstMatrixView a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

bool allFinite(ConstMatrixView a) {
  return std::all_of(a.data.begin(), a.data.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace kadmm
