// Reference implementations for tests: direct loops, no im2col, no Eigen.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "scarfcn/nn.hpp"
#include "scarfcn/tensor.hpp"

namespace oracle {

using scarfcn::BatchTensor;
using scarfcn::Shape3;
using scarfcn::nn::ConvLayerParams;

// conv weights: out x in x kh x kw
inline BatchTensor conv2d(const BatchTensor& x, const ConvLayerParams& l) {
  const Shape3 in = x.item_shape();
  const int ho = (in.rows + 2 * l.ph - l.kh) / l.sh + 1;
  const int wo = (in.cols + 2 * l.pw - l.kw) / l.sw + 1;
  BatchTensor y(x.batch(), {l.out_ch, ho, wo});
  for (int n = 0; n < x.batch(); ++n) {
    auto xi = x.item(n);
    auto yi = y.item(n);
    for (int o = 0; o < l.out_ch; ++o) {
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j) {
          double s = l.bias[o];
          for (int c = 0; c < l.in_ch; ++c) {
            for (int u = 0; u < l.kh; ++u) {
              for (int v = 0; v < l.kw; ++v) {
                const int r = i * l.sh + u - l.ph;
                const int q = j * l.sw + v - l.pw;
                if (r < 0 || r >= in.rows || q < 0 || q >= in.cols) continue;
                s += l.weights[((o * l.in_ch + c) * l.kh + u) * l.kw + v] *
                     xi[(c * in.rows + r) * in.cols + q];
              }
            }
          }
          yi[(o * ho + i) * wo + j] = s;
        }
      }
    }
  }
  return y;
}

// transpose weights: in x out x kh x kw; each input pixel scatters a kernel copy.
inline BatchTensor conv_transpose2d(const BatchTensor& x, const ConvLayerParams& l) {
  const Shape3 in = x.item_shape();
  const int ho = (in.rows - 1) * l.sh - 2 * l.ph + l.kh;
  const int wo = (in.cols - 1) * l.sw - 2 * l.pw + l.kw;
  BatchTensor y(x.batch(), {l.out_ch, ho, wo});
  for (int n = 0; n < x.batch(); ++n) {
    auto xi = x.item(n);
    auto yi = y.item(n);
    for (int o = 0; o < l.out_ch; ++o) {
      for (int k = 0; k < ho * wo; ++k) yi[o * ho * wo + k] = l.bias[o];
    }
    for (int c = 0; c < l.in_ch; ++c) {
      for (int i = 0; i < in.rows; ++i) {
        for (int j = 0; j < in.cols; ++j) {
          const double xv = xi[(c * in.rows + i) * in.cols + j];
          for (int o = 0; o < l.out_ch; ++o) {
            for (int u = 0; u < l.kh; ++u) {
              for (int v = 0; v < l.kw; ++v) {
                const int r = i * l.sh + u - l.ph;
                const int q = j * l.sw + v - l.pw;
                if (r < 0 || r >= ho || q < 0 || q >= wo) continue;
                yi[(o * ho + r) * wo + q] +=
                    l.weights[((c * l.out_ch + o) * l.kh + u) * l.kw + v] * xv;
              }
            }
          }
        }
      }
    }
  }
  return y;
}

// -[w y log s(z) + (1-y) log(1-s(z))], mean over elements.
inline double naive_bce(const std::vector<double>& z, const std::vector<double>& y, double w) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    s -= w * y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return s / static_cast<double>(z.size());
}

inline void fill_uniform(std::span<double> v, std::mt19937_64& g, double lo = -1.0,
                         double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& x : v) x = d(g);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Random small layer with legal geometry.
inline ConvLayerParams random_layer(std::mt19937_64& g, bool transpose) {
  std::uniform_int_distribution<int> ch(1, 4), k(1, 3), s(1, 2), p(0, 1);
  const int in = ch(g), out = ch(g), kh = k(g), kw = k(g), sh = s(g), sw = s(g);
  const int ph = std::min(p(g), kh - 1), pw = std::min(p(g), kw - 1);
  ConvLayerParams l = transpose ? ConvLayerParams::transpose(in, out, kh, kw, sh, sw, ph, pw)
                                : ConvLayerParams::conv(in, out, kh, kw, sh, sw, ph, pw);
  fill_uniform(l.weights, g);
  fill_uniform(l.bias, g);
  return l;
}

inline BatchTensor random_input(std::mt19937_64& g, const ConvLayerParams& l) {
  std::uniform_int_distribution<int> n(1, 3), hw(3, 7);
  BatchTensor x(n(g), {l.in_ch, hw(g), hw(g)});
  fill_uniform(x.data(), g);
  return x;
}

}  // namespace oracle
