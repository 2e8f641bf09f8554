#include "kadmm/layout.hpp"

#include <string>

#include "kadmm/errors.hpp"

namespace kadmm {

std::vector<std::size_t> balancedOffsets(std::size_t total, std::size_t parts) {
  if (parts == 0) throw ConfigError("split count must be at least 1");
  if (parts > total)
    throw ConfigError("cannot split " + std::to_string(total) + " items into " + std::to_string(parts) +
                      " non-empty blocks");
  std::vector<std::size_t> offsets(parts + 1, 0);
  const std::size_t base = total / parts;
  const std::size_t extra = total % parts;
  for (std::size_t k = 0; k < parts; ++k) offsets[k + 1] = offsets[k] + base + (k < extra ? 1 : 0);
  return offsets;
}

void validateOffsets(const std::vector<std::size_t>& offsets, std::size_t total, const char* what) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != total)
    throw ConfigError(std::string(what) + ": offsets must run from 0 to " + std::to_string(total));
  for (std::size_t k = 1; k < offsets.size(); ++k)
    if (offsets[k] <= offsets[k - 1]) throw ConfigError(std::string(what) + ": offsets must be strictly increasing");
}

BlockLayout BlockLayout::balanced(std::size_t n, std::size_t rowSplits, std::size_t s, std::size_t colSplits) {
  return {balancedOffsets(n, rowSplits), balancedOffsets(s, colSplits)};
}

ConstMatrixView rowBlock(ConstMatrixView x, const BlockLayout& layout, std::size_t i) {
  if (i >= layout.rowBlocks())
    throw ConfigError("row block " + std::to_string(i) + " out of range (R=" +
                      std::to_string(layout.rowBlocks()) + ")");
  if (layout.rowOffsets.back() != x.rows) throw DimensionError("layout does not cover the matrix rows");
  return x.rowRange(layout.rowOffsets[i], layout.rowOffsets[i + 1]);
}

}  // namespace kadmm
