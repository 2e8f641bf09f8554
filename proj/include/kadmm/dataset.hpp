#ifndef KADMM_DATASET_HPP
#define KADMM_DATASET_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kadmm/matrix.hpp"

namespace kadmm {

enum class DataFormat { csv, svmlight };

DataFormat parseDataFormat(std::string_view name);

struct LoadOptions {
  DataFormat format = DataFormat::csv;
  /// csv: column holding the label, negative counts from the end (-1 = last).
  int labelColumn = -1;
  /// csv: when false every column is a feature and `labels` stays empty.
  bool hasLabels = true;
  /// svmlight: declared input dimension; 0 infers it from the largest index.
  std::size_t dimension = 0;
  /// When false an input without data rows is a parse error.
  bool allowEmpty = false;
};

struct Dataset {
  DenseMatrix features;        // n x d
  std::vector<double> labels;  // n entries, or empty when unlabeled
};

Dataset loadDataset(const std::string& path, const LoadOptions& options = {});
Dataset parseDataset(std::istream& in, const LoadOptions& options = {});

/// Writes features then the label as the last column, shortest round-trip
/// decimal form, no header.
void writeCsv(std::ostream& out, const Dataset& data);
void saveCsv(const std::string& path, const Dataset& data);

enum class LabelMode { regression, oneVsAll };

struct LabelEncoding {
  LabelMode mode = LabelMode::regression;
  std::vector<double> classLabels;  // ordered; empty in regression mode
  std::size_t targets = 1;          // regression outputs

  static LabelEncoding regression(std::size_t targets = 1) { return {LabelMode::regression, {}, targets}; }
  /// Sorted distinct values of `labels` as the class set.
  static LabelEncoding oneVsAll(std::span<const double> labels);

  /// Number of target columns m.
  std::size_t outputs() const noexcept { return mode == LabelMode::regression ? targets : classLabels.size(); }
  std::size_t classIndex(double label) const;
};

/// Regression (single target only): n x 1 raw values. One-vs-all: n x m matrix of +/-1 with the
/// +1 in the column of the row's class.
DenseMatrix encodeLabels(std::span<const double> labels, const LabelEncoding& encoding);

/// Regression: column 0 of `scores`. One-vs-all: class of the arg-max column,
/// ties going to the lowest class index.
std::vector<double> decodeLabels(ConstMatrixView scores, const LabelEncoding& encoding);

}  // namespace kadmm

#endif  // KADMM_DATASET_HPP
