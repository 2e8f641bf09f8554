#ifndef KADMM_RANDOM_HPP
#define KADMM_RANDOM_HPP

#include <array>
#include <cstdint>
#include <utility>

namespace kadmm {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123). Output is
/// a pure function of (counter, key), so any element of any stream can be
/// regenerated independently of call order or thread placement.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

/// Uniform double in [0, 1) with 53 random bits.
double uniformFromBits(std::uint32_t hi, std::uint32_t lo) noexcept;

/// Two independent standard normals (Box-Muller) from one Philox block.
std::pair<double, double> gaussianPair(const Philox4x32::Counter& counter, const Philox4x32::Key& key) noexcept;

}  // namespace kadmm

#endif  // KADMM_RANDOM_HPP
