#include "kadmm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kadmm/errors.hpp"

namespace kadmm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parseNumber(std::string_view token, std::size_t line) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
    throw ParseError("invalid number '" + std::string(token) + "'", line);
  if (!std::isfinite(value)) throw ParseError("non-finite value '" + std::string(token) + "'", line);
  return value;
}

Dataset parseCsv(std::istream& in, const LoadOptions& options) {
  std::vector<double> values;
  std::vector<double> labels;
  std::size_t cols = 0;  // columns in the file
  std::size_t rows = 0;
  std::size_t lineNo = 0;
  std::size_t labelCol = 0;
  std::string line;
  std::vector<double> fields;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const auto comma = text.find(',', start);
      fields.push_back(parseNumber(text.substr(start, comma == std::string_view::npos ? comma : comma - start), lineNo));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = fields.size();
      if (options.hasLabels) {
        const long idx = options.labelColumn < 0 ? static_cast<long>(cols) + options.labelColumn
                                                 : static_cast<long>(options.labelColumn);
        if (idx < 0 || idx >= static_cast<long>(cols))
          throw ParseError("label column out of range for " + std::to_string(cols) + " columns", lineNo);
        if (cols < 2) throw ParseError("need at least one feature column besides the label", lineNo);
        labelCol = static_cast<std::size_t>(idx);
      }
    } else if (fields.size() != cols) {
      throw ParseError("expected " + std::to_string(cols) + " columns, found " + std::to_string(fields.size()),
                       lineNo);
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (options.hasLabels && c == labelCol)
        labels.push_back(fields[c]);
      else
        values.push_back(fields[c]);
    }
    ++rows;
  }
  const std::size_t d = options.hasLabels ? cols - (rows ? 1 : 0) : cols;
  return {DenseMatrix(rows, rows ? d : 0, std::move(values)), std::move(labels)};
}

Dataset parseSvmlight(std::istream& in, const LoadOptions& options) {
  struct Entry {
    std::size_t row, col;
    double value;
  };
  std::vector<Entry> entries;
  std::vector<double> labels;
  std::size_t maxIndex = 0;
  std::size_t lineNo = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineNo;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    std::istringstream tokens{std::string(text)};
    std::string token;
    tokens >> token;
    labels.push_back(parseNumber(token, lineNo));
    const std::size_t row = labels.size() - 1;
    std::size_t previous = 0;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) throw ParseError("expected index:value, got '" + token + "'", lineNo);
      const std::string_view key = std::string_view(token).substr(0, colon);
      if (key == "qid") continue;
      std::size_t index = 0;
      const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
      if (ec != std::errc() || ptr != key.data() + key.size() || index == 0)
        throw ParseError("invalid feature index '" + std::string(key) + "'", lineNo);
      if (index <= previous) throw ParseError("feature indices must be increasing", lineNo);
      previous = index;
      if (options.dimension && index > options.dimension)
        throw DimensionError("line " + std::to_string(lineNo) + ": feature index " + std::to_string(index) +
                             " exceeds declared dimension " + std::to_string(options.dimension));
      maxIndex = std::max(maxIndex, index);
      entries.push_back({row, index - 1, parseNumber(std::string_view(token).substr(colon + 1), lineNo)});
    }
  }
  const std::size_t d = options.dimension ? options.dimension : maxIndex;
  DenseMatrix x(labels.size(), labels.empty() ? 0 : d);
  for (const auto& e : entries) x(e.row, e.col) = e.value;
  return {std::move(x), std::move(labels)};
}

}  // namespace

DataFormat parseDataFormat(std::string_view name) {
  if (name == "csv") return DataFormat::csv;
  if (name == "svmlight" || name == "libsvm") return DataFormat::svmlight;
  throw ConfigError("unknown data format '" + std::string(name) + "'");
}

Dataset parseDataset(std::istream& in, const LoadOptions& options) {
  Dataset data = options.format == DataFormat::csv ? parseCsv(in, options) : parseSvmlight(in, options);
  if (data.features.rows() == 0 && !options.allowEmpty) throw ParseError("input contains no data rows", 0);
  return data;
}

Dataset loadDataset(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return parseDataset(in, options);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void writeCsv(std::ostream& out, const Dataset& data) {
  const bool labeled = !data.labels.empty();
  if (labeled && data.labels.size() != data.features.rows())
    throw DimensionError("label count does not match row count");
  char buf[32];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  for (std::size_t r = 0; r < data.features.rows(); ++r) {
    for (std::size_t c = 0; c < data.features.cols(); ++c) {
      if (c) out.put(',');
      put(data.features(r, c));
    }
    if (labeled) {
      if (data.features.cols()) out.put(',');
      put(data.labels[r]);
    }
    out.put('\n');
  }
}

void saveCsv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  writeCsv(out, data);
  if (!out) throw IoError("write failed for '" + path + "'");
}

LabelEncoding LabelEncoding::oneVsAll(std::span<const double> labels) {
  LabelEncoding enc;
  enc.mode = LabelMode::oneVsAll;
  enc.classLabels.assign(labels.begin(), labels.end());
  std::sort(enc.classLabels.begin(), enc.classLabels.end());
  enc.classLabels.erase(std::unique(enc.classLabels.begin(), enc.classLabels.end()), enc.classLabels.end());
  return enc;
}

std::size_t LabelEncoding::classIndex(double label) const {
  const auto it = std::find(classLabels.begin(), classLabels.end(), label);
  if (it == classLabels.end()) {
    std::ostringstream msg;
    msg << "unknown label " << label;
    throw LabelError(msg.str());
  }
  return static_cast<std::size_t>(it - classLabels.begin());
}

DenseMatrix encodeLabels(std::span<const double> labels, const LabelEncoding& encoding) {
  if (encoding.mode == LabelMode::regression) {
    if (encoding.targets != 1) throw ConfigError("scalar labels cannot fill several regression targets");
    return DenseMatrix(labels.size(), 1, std::vector<double>(labels.begin(), labels.end()));
  }
  if (encoding.classLabels.empty()) throw ConfigError("one-vs-all encoding needs at least one class");
  DenseMatrix y(labels.size(), encoding.classLabels.size(), -1.0);
  for (std::size_t r = 0; r < labels.size(); ++r) y(r, encoding.classIndex(labels[r])) = 1.0;
  return y;
}

std::vector<double> decodeLabels(ConstMatrixView scores, const LabelEncoding& encoding) {
  std::vector<double> out(scores.rows);
  if (encoding.mode == LabelMode::regression) {
    if (scores.cols != 1) throw DimensionError("regression scores must have one column");
    for (std::size_t r = 0; r < scores.rows; ++r) out[r] = scores(r, 0);
    return out;
  }
  if (scores.cols != encoding.classLabels.size()) throw DimensionError("score columns do not match class count");
  for (std::size_t r = 0; r < scores.rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols; ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[r] = encoding.classLabels[best];
  }
  return out;
}

}  // namespace kadmm
