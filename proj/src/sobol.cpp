#include "scarfcn/sobol.hpp"

#include <string>

#include "scarfcn/error.hpp"

namespace scarfcn {

namespace {

struct Primitive {
  int degree;
  std::uint32_t coeffs;  // interior coefficients a
  std::array<std::uint32_t, 7> m;
};

// Joe & Kuo (new-joe-kuo-6.21201), dimensions 2..32.
constexpr std::array<Primitive, SobolSequence::kMaxDim - 1> kTable = {{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
    {7, 7, {1, 1, 3, 13, 7, 35, 63}},
    {7, 8, {1, 3, 5, 9, 1, 25, 53}},
    {7, 14, {1, 3, 1, 13, 9, 35, 107}},
    {7, 19, {1, 3, 1, 5, 27, 61, 31}},
    {7, 21, {1, 1, 5, 11, 19, 41, 61}},
    {7, 28, {1, 3, 5, 3, 3, 13, 69}},
    {7, 31, {1, 1, 7, 13, 1, 19, 1}},
    {7, 32, {1, 3, 7, 5, 13, 19, 59}},
    {7, 37, {1, 1, 3, 9, 25, 29, 41}},
    {7, 41, {1, 3, 5, 13, 23, 1, 55}},
    {7, 42, {1, 3, 7, 3, 13, 59, 17}},
}};

}  // namespace

SobolSequence::SobolSequence(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw ConfigError("sobol dimension " + std::to_string(dim) + " outside 1.." +
                      std::to_string(kMaxDim));
  }
  directions_.resize(static_cast<std::size_t>(dim));
  for (int b = 0; b < kBits; ++b) directions_[0][b] = 1u << (kBits - 1 - b);

  for (int d = 1; d < dim; ++d) {
    const Primitive& p = kTable[static_cast<std::size_t>(d - 1)];
    auto& v = directions_[static_cast<std::size_t>(d)];
    const int s = p.degree;
    for (int b = 0; b < s; ++b) v[b] = p.m[b] << (kBits - 1 - b);
    for (int b = s; b < kBits; ++b) {
      std::uint32_t x = v[b - s] ^ (v[b - s] >> s);
      for (int k = 1; k < s; ++k) {
        if ((p.coeffs >> (s - 1 - k)) & 1u) x ^= v[b - k];
      }
      v[b] = x;
    }
  }
}

std::vector<double> SobolSequence::point(std::uint64_t index) const {
  if (index == 0) throw ConfigError("sobol index must be >= 1");
  if (index >> kBits) throw ConfigError("sobol index exceeds 2^32 - 1");
  std::vector<double> x(static_cast<std::size_t>(dim_));
  constexpr double kScale = 1.0 / 4294967296.0;
  for (int d = 0; d < dim_; ++d) {
    std::uint32_t acc = 0;
    std::uint64_t i = index;
    for (int b = 0; i != 0; ++b, i >>= 1) {
      if (i & 1u) acc ^= directions_[static_cast<std::size_t>(d)][b];
    }
    x[static_cast<std::size_t>(d)] = acc * kScale;
  }
  return x;
}

std::vector<double> sobol_sample(int dim, std::uint64_t index) {
  return SobolSequence(dim).point(index);
}

}  // namespace scarfcn
