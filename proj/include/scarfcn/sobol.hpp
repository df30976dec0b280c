#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace scarfcn {

/// Unscrambled Sobol points in natural (not Gray-code) order, up to 32
/// dimensions, using the Joe-Kuo direction numbers. Dimension 0 is the
/// base-2 radical inverse of the index.
class SobolSequence {
 public:
  static constexpr int kMaxDim = 32;
  static constexpr int kBits = 32;

  explicit SobolSequence(int dim);

  int dim() const { return dim_; }
  /// Point with the given index (>= 1; index 0 is the all-zero point and is
  /// rejected). Coordinates lie in [0, 1).
  std::vector<double> point(std::uint64_t index) const;

 private:
  int dim_;
  std::vector<std::array<std::uint32_t, kBits>> directions_;
};

std::vector<double> sobol_sample(int dim, std::uint64_t index);

}  // namespace scarfcn
