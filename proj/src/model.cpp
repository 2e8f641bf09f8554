#include "kadmm/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "kadmm/errors.hpp"

namespace kadmm {

namespace {

constexpr char kMagic[8] = {'K', 'A', 'D', 'M', 'M', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int k = 0; k < bytes; ++k) out_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> in) : in_(in) {}
  void raw(void* data, std::size_t n) {
    need(n);
    std::memcpy(data, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  /// Count of upcoming `width`-byte items, checked against the bytes left.
  std::size_t count(std::size_t width) {
    const std::uint64_t n = u64();
    if (n > (in_.size() - pos_) / width) throw ModelFormatError("model file is truncated");
    return static_cast<std::size_t>(n);
  }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ModelFormatError("model file is truncated");
  }
  std::uint64_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int k = 0; k < bytes; ++k) v |= static_cast<std::uint64_t>(in_[pos_ + k]) << (8 * k);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::span<const unsigned char> in_;
  std::size_t pos_ = 0;
};

std::uint32_t lossCode(LossKind kind) {
  switch (kind) {
    case LossKind::squared: return 0;
    case LossKind::hinge: return 1;
    case LossKind::absolute: return 2;
  }
  return 0;
}

LossKind lossFromCode(std::uint32_t code) {
  switch (code) {
    case 0: return LossKind::squared;
    case 1: return LossKind::hinge;
    case 2: return LossKind::absolute;
    default: throw ModelFormatError("unknown loss code " + std::to_string(code));
  }
}

}  // namespace

void Model::validate() const {
  if (weights.rows() == 0 || weights.cols() == 0) throw ModelFormatError("model has empty weights");
  try {
    transform.validate();
  } catch (const ConfigError& e) {
    throw ModelFormatError(std::string("invalid transform: ") + e.what());
  }
  if (transform.features() != weights.rows())
    throw ModelFormatError("transform has " + std::to_string(transform.features()) + " features but weights have " +
                           std::to_string(weights.rows()) + " rows");
  if (inputDim == 0) throw ModelFormatError("model input dimension is zero");
  if (labels.outputs() != weights.cols())
    throw ModelFormatError("label encoding has " + std::to_string(labels.outputs()) + " outputs but weights have " +
                           std::to_string(weights.cols()) + " columns");
  if (!allFinite(weights)) throw ModelFormatError("model weights are not finite");
}

std::vector<unsigned char> serializeModel(const Model& model) {
  model.validate();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(lossCode(model.loss));
  w.u32(static_cast<std::uint32_t>(model.transform.kernel));
  w.u32(model.labels.mode == LabelMode::oneVsAll ? 1 : 0);
  w.u64(model.inputDim);
  w.u64(model.weights.rows());
  w.u64(model.weights.cols());
  w.f64(model.transform.sigma);
  w.u64(model.transform.seed);
  w.u64(model.transform.blocks());
  for (std::size_t off : model.transform.colOffsets) w.u64(off);
  w.u64(model.labels.classLabels.size());
  for (double label : model.labels.classLabels) w.f64(label);
  for (double v : model.weights.data()) w.f64(v);
  return w.take();
}

Model deserializeModel(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ModelFormatError("not a model file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw ModelFormatError("unsupported model version " + std::to_string(version));
  Model model;
  model.loss = lossFromCode(r.u32());
  const std::uint32_t kernel = r.u32();
  if (kernel != static_cast<std::uint32_t>(KernelKind::gaussian))
    throw ModelFormatError("unknown kernel code " + std::to_string(kernel));
  model.transform.kernel = KernelKind::gaussian;
  const std::uint32_t labelMode = r.u32();
  if (labelMode > 1) throw ModelFormatError("unknown label mode " + std::to_string(labelMode));
  model.labels.mode = labelMode == 1 ? LabelMode::oneVsAll : LabelMode::regression;
  model.inputDim = r.u64();
  const std::uint64_t s = r.u64();
  const std::uint64_t m = r.u64();
  model.transform.sigma = r.f64();
  model.transform.seed = r.u64();
  const std::size_t blocks = r.count(8);
  model.transform.colOffsets.resize(blocks + 1);
  for (auto& off : model.transform.colOffsets) off = r.u64();
  const std::size_t classes = r.count(8);
  model.labels.classLabels.resize(classes);
  for (double& label : model.labels.classLabels) label = r.f64();
  if (s == 0 || m == 0 || s > bytes.size() / 8 / m) throw ModelFormatError("model file is truncated");
  if (model.labels.mode == LabelMode::regression) model.labels.targets = static_cast<std::size_t>(m);
  model.weights = DenseMatrix(s, m);
  for (double& v : model.weights.data()) v = r.f64();
  if (!r.done()) throw ModelFormatError("trailing bytes after model payload");
  model.validate();
  return model;
}

void saveModel(const std::string& path, const Model& model) {
  const auto bytes = serializeModel(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

Model loadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserializeModel(bytes);
}

}  // namespace kadmm
