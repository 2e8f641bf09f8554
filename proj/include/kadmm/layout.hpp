#ifndef KADMM_LAYOUT_HPP
#define KADMM_LAYOUT_HPP

#include <cstddef>
#include <vector>

#include "kadmm/matrix.hpp"

namespace kadmm {

/// Offsets [0, ..., total] splitting `total` items into `parts` contiguous
/// pieces; the first total % parts pieces get one extra item.
std::vector<std::size_t> balancedOffsets(std::size_t total, std::size_t parts);

/// Throws ConfigError unless offsets start at 0, end at `total` and are
/// strictly increasing.
void validateOffsets(const std::vector<std::size_t>& offsets, std::size_t total, const char* what);

/// R x C logical partition of the implicit n x s feature matrix.
struct BlockLayout {
  std::vector<std::size_t> rowOffsets;  // R + 1 entries over n
  std::vector<std::size_t> colOffsets;  // C + 1 entries over s

  static BlockLayout balanced(std::size_t n, std::size_t rowSplits, std::size_t s, std::size_t colSplits);

  std::size_t rowBlocks() const noexcept { return rowOffsets.size() - 1; }
  std::size_t colBlocks() const noexcept { return colOffsets.size() - 1; }
  std::size_t rowsIn(std::size_t i) const { return rowOffsets.at(i + 1) - rowOffsets.at(i); }
  std::size_t colsIn(std::size_t j) const { return colOffsets.at(j + 1) - colOffsets.at(j); }
};

/// Rows [rowOffsets[i], rowOffsets[i+1]) of X.
ConstMatrixView rowBlock(ConstMatrixView x, const BlockLayout& layout, std::size_t i);

}  // namespace kadmm

#endif  // KADMM_LAYOUT_HPP
