#include "scarfcn/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "scarfcn/error.hpp"
#include "scarfcn/random.hpp"

namespace scarfcn::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMatrix>;
using ConstMapRM = Eigen::Map<const RowMatrix>;

// Geometry of a forward convolution from (c, h, w) to (.., ho, wo).
struct Geometry {
  int c, h, w;
  int kh, kw, sh, sw, ph, pw;
  int ho, wo;

  int k_rows() const { return c * kh * kw; }
  int positions() const { return ho * wo; }
};

Geometry conv_geometry(const ConvLayerParams& l, Shape3 in) {
  const int ho = (in.rows + 2 * l.ph - l.kh) / l.sh + 1;
  const int wo = (in.cols + 2 * l.pw - l.kw) / l.sw + 1;
  return {in.channels, in.rows, in.cols, l.kh, l.kw, l.sh, l.sw, l.ph, l.pw, ho, wo};
}

// col is (c*kh*kw) x (n*ho*wo), row-major.
void im2col(const double* x, int n, const Geometry& g, double* col) {
  const std::size_t np = static_cast<std::size_t>(n) * g.positions();
  const std::size_t item = static_cast<std::size_t>(g.c) * g.h * g.w;
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        double* row = col + (static_cast<std::size_t>((c * g.kh + i) * g.kw + j)) * np;
        for (int b = 0; b < n; ++b) {
          const double* plane = x + b * item + static_cast<std::size_t>(c) * g.h * g.w;
          for (int oh = 0; oh < g.ho; ++oh) {
            const int ih = oh * g.sh - g.ph + i;
            for (int ow = 0; ow < g.wo; ++ow) {
              const int iw = ow * g.sw - g.pw + j;
              const bool inside = ih >= 0 && ih < g.h && iw >= 0 && iw < g.w;
              *row++ = inside ? plane[ih * g.w + iw] : 0.0;
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col entries into x (which must be zeroed).
void col2im(const double* col, int n, const Geometry& g, double* x) {
  const std::size_t np = static_cast<std::size_t>(n) * g.positions();
  const std::size_t item = static_cast<std::size_t>(g.c) * g.h * g.w;
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const double* row = col + (static_cast<std::size_t>((c * g.kh + i) * g.kw + j)) * np;
        for (int b = 0; b < n; ++b) {
          double* plane = x + b * item + static_cast<std::size_t>(c) * g.h * g.w;
          for (int oh = 0; oh < g.ho; ++oh) {
            const int ih = oh * g.sh - g.ph + i;
            for (int ow = 0; ow < g.wo; ++ow) {
              const int iw = ow * g.sw - g.pw + j;
              const double v = *row++;
              if (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w) plane[ih * g.w + iw] += v;
            }
          }
        }
      }
    }
  }
}

// (n, ch, p) item layout <-> (ch, n*p) matrix layout.
RowMatrix gather_channels(std::span<const double> t, int n, int ch, int p) {
  RowMatrix m(ch, static_cast<Eigen::Index>(n) * p);
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double* src = t.data() + (static_cast<std::size_t>(b) * ch + c) * p;
      std::copy(src, src + p, m.data() + static_cast<std::size_t>(c) * n * p +
                                  static_cast<std::size_t>(b) * p);
    }
  }
  return m;
}

void scatter_channels(const RowMatrix& m, int n, int ch, int p, std::span<double> t,
                      const std::vector<double>* bias) {
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double* src = m.data() + static_cast<std::size_t>(c) * n * p +
                          static_cast<std::size_t>(b) * p;
      double* dst = t.data() + (static_cast<std::size_t>(b) * ch + c) * p;
      const double add = bias ? (*bias)[static_cast<std::size_t>(c)] : 0.0;
      for (int k = 0; k < p; ++k) dst[k] = src[k] + add;
    }
  }
}

std::string layer_desc(const ConvLayerParams& l) {
  return std::string(l.role == LayerRole::Conv ? "conv" : "convtranspose") + "[" +
         std::to_string(l.in_ch) + "->" + std::to_string(l.out_ch) + ", k=" +
         std::to_string(l.kh) + "x" + std::to_string(l.kw) + ", s=" + std::to_string(l.sh) + "x" +
         std::to_string(l.sw) + ", p=" + std::to_string(l.ph) + "x" + std::to_string(l.pw) + "]";
}

void require_role(const ConvLayerParams& l, LayerRole role) {
  if (l.role != role) {
    throw ShapeError("layer " + layer_desc(l) + " used in the wrong role");
  }
}

void require_upstream(const BatchTensor& upstream, int n, Shape3 expect) {
  if (upstream.batch() != n || upstream.item_shape() != expect) {
    throw ShapeError("upstream gradient " + std::to_string(upstream.batch()) + "x" +
                     to_string(upstream.item_shape()) + " does not match forward output " +
                     std::to_string(n) + "x" + to_string(expect));
  }
}

}  // namespace

ConvLayerParams ConvLayerParams::conv(int in_ch, int out_ch, int kh, int kw, int sh, int sw,
                                      int ph, int pw) {
  ConvLayerParams l{LayerRole::Conv, in_ch, out_ch, kh, kw, sh, sw, ph, pw, {}, {}};
  l.weights.assign(static_cast<std::size_t>(out_ch) * in_ch * kh * kw, 0.0);
  l.bias.assign(static_cast<std::size_t>(out_ch), 0.0);
  l.validate();
  return l;
}

ConvLayerParams ConvLayerParams::transpose(int in_ch, int out_ch, int kh, int kw, int sh, int sw,
                                           int ph, int pw) {
  ConvLayerParams l{LayerRole::Transpose, in_ch, out_ch, kh, kw, sh, sw, ph, pw, {}, {}};
  l.weights.assign(static_cast<std::size_t>(out_ch) * in_ch * kh * kw, 0.0);
  l.bias.assign(static_cast<std::size_t>(out_ch), 0.0);
  l.validate();
  return l;
}

void ConvLayerParams::validate() const {
  if (in_ch < 1 || out_ch < 1 || kh < 1 || kw < 1 || sh < 1 || sw < 1 || ph < 0 || pw < 0) {
    throw ShapeError("invalid layer geometry " + layer_desc(*this));
  }
  const std::size_t nw = static_cast<std::size_t>(out_ch) * in_ch * kh * kw;
  if (weights.size() != nw || bias.size() != static_cast<std::size_t>(out_ch)) {
    throw ShapeError("layer " + layer_desc(*this) + " holds " + std::to_string(weights.size()) +
                     " weights / " + std::to_string(bias.size()) + " biases, expected " +
                     std::to_string(nw) + " / " + std::to_string(out_ch));
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(bias.begin(), bias.end(), finite)) {
    throw ShapeError("layer " + layer_desc(*this) + " holds non-finite values");
  }
}

Shape3 ConvLayerParams::output_shape(Shape3 in) const {
  if (in.channels != in_ch) {
    throw ShapeError("input " + to_string(in) + " has " + std::to_string(in.channels) +
                     " channels, layer " + layer_desc(*this) + " expects " +
                     std::to_string(in_ch));
  }
  if (role == LayerRole::Conv) {
    const int hn = in.rows + 2 * ph - kh;
    const int wn = in.cols + 2 * pw - kw;
    if (hn < 0 || wn < 0) {
      throw ShapeError("input " + to_string(in) + " too small for layer " + layer_desc(*this));
    }
    return {out_ch, hn / sh + 1, wn / sw + 1};
  }
  const int ho = (in.rows - 1) * sh - 2 * ph + kh;
  const int wo = (in.cols - 1) * sw - 2 * pw + kw;
  if (in.rows < 1 || in.cols < 1 || ho < 1 || wo < 1) {
    throw ShapeError("input " + to_string(in) + " gives an empty output for layer " +
                     layer_desc(*this));
  }
  return {out_ch, ho, wo};
}

BatchTensor conv2d_forward(const BatchTensor& x, const ConvLayerParams& layer) {
  require_role(layer, LayerRole::Conv);
  const Shape3 out_shape = layer.output_shape(x.item_shape());
  const Geometry g = conv_geometry(layer, x.item_shape());
  const int n = x.batch();
  BatchTensor y(n, out_shape);
  if (n == 0) return y;
  RowMatrix col(g.k_rows(), static_cast<Eigen::Index>(n) * g.positions());
  im2col(x.data().data(), n, g, col.data());
  const ConstMapRM w(layer.weights.data(), layer.out_ch, g.k_rows());
  const RowMatrix prod = w * col;
  scatter_channels(prod, n, layer.out_ch, g.positions(), y.data(), &layer.bias);
  return y;
}

GradientBundle conv2d_backward(const BatchTensor& x, const ConvLayerParams& layer,
                               const BatchTensor& upstream, bool need_input_grad) {
  require_role(layer, LayerRole::Conv);
  const Shape3 out_shape = layer.output_shape(x.item_shape());
  const int n = x.batch();
  require_upstream(upstream, n, out_shape);
  const Geometry g = conv_geometry(layer, x.item_shape());

  GradientBundle gb;
  gb.weights.assign(layer.weights.size(), 0.0);
  gb.bias.assign(layer.bias.size(), 0.0);
  if (n == 0) {
    if (need_input_grad) gb.input = BatchTensor(0, x.item_shape());
    return gb;
  }
  const RowMatrix gm = gather_channels(upstream.data(), n, layer.out_ch, g.positions());
  RowMatrix col(g.k_rows(), static_cast<Eigen::Index>(n) * g.positions());
  im2col(x.data().data(), n, g, col.data());

  MapRM dw(gb.weights.data(), layer.out_ch, g.k_rows());
  dw.noalias() = gm * col.transpose();
  for (int c = 0; c < layer.out_ch; ++c) gb.bias[c] = gm.row(c).sum();

  if (need_input_grad) {
    const ConstMapRM w(layer.weights.data(), layer.out_ch, g.k_rows());
    col.noalias() = w.transpose() * gm;
    gb.input = BatchTensor(n, x.item_shape());
    col2im(col.data(), n, g, gb.input.data().data());
  }
  return gb;
}

BatchTensor convtranspose2d_forward(const BatchTensor& x, const ConvLayerParams& layer) {
  require_role(layer, LayerRole::Transpose);
  const Shape3 out_shape = layer.output_shape(x.item_shape());
  // The convolution this layer is the adjoint of maps out_shape -> x.
  const Geometry g = conv_geometry(layer, {layer.out_ch, out_shape.rows, out_shape.cols});
  const int n = x.batch();
  BatchTensor y(n, out_shape);
  if (n == 0) return y;
  const int p_in = x.item_shape().rows * x.item_shape().cols;
  const RowMatrix xm = gather_channels(x.data(), n, layer.in_ch, p_in);
  const ConstMapRM w(layer.weights.data(), layer.in_ch, g.k_rows());
  const RowMatrix col = w.transpose() * xm;
  col2im(col.data(), n, g, y.data().data());
  const std::size_t plane = static_cast<std::size_t>(out_shape.rows) * out_shape.cols;
  for (int b = 0; b < n; ++b) {
    auto item = y.item(b);
    for (int c = 0; c < layer.out_ch; ++c) {
      for (std::size_t k = 0; k < plane; ++k) item[c * plane + k] += layer.bias[c];
    }
  }
  return y;
}

GradientBundle convtranspose2d_backward(const BatchTensor& x, const ConvLayerParams& layer,
                                        const BatchTensor& upstream, bool need_input_grad) {
  require_role(layer, LayerRole::Transpose);
  const Shape3 out_shape = layer.output_shape(x.item_shape());
  const int n = x.batch();
  require_upstream(upstream, n, out_shape);
  const Geometry g = conv_geometry(layer, {layer.out_ch, out_shape.rows, out_shape.cols});

  GradientBundle gb;
  gb.weights.assign(layer.weights.size(), 0.0);
  gb.bias.assign(layer.bias.size(), 0.0);
  if (n == 0) {
    if (need_input_grad) gb.input = BatchTensor(0, x.item_shape());
    return gb;
  }
  RowMatrix col(g.k_rows(), static_cast<Eigen::Index>(n) * g.positions());
  im2col(upstream.data().data(), n, g, col.data());
  const int p_in = x.item_shape().rows * x.item_shape().cols;
  const RowMatrix xm = gather_channels(x.data(), n, layer.in_ch, p_in);

  MapRM dw(gb.weights.data(), layer.in_ch, g.k_rows());
  dw.noalias() = xm * col.transpose();
  const std::size_t plane = static_cast<std::size_t>(out_shape.rows) * out_shape.cols;
  for (int b = 0; b < n; ++b) {
    const auto item = upstream.item(b);
    for (int c = 0; c < layer.out_ch; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < plane; ++k) s += item[c * plane + k];
      gb.bias[c] += s;
    }
  }
  if (need_input_grad) {
    const ConstMapRM w(layer.weights.data(), layer.in_ch, g.k_rows());
    const RowMatrix dx = w * col;
    gb.input = BatchTensor(n, x.item_shape());
    scatter_channels(dx, n, layer.in_ch, p_in, gb.input.data(), nullptr);
  }
  return gb;
}

GridTensor conv2d_forward(const GridTensor& x, const ConvLayerParams& layer) {
  return conv2d_forward(BatchTensor::from_item(x), layer).item_tensor(0);
}

GridTensor convtranspose2d_forward(const GridTensor& x, const ConvLayerParams& layer) {
  return convtranspose2d_forward(BatchTensor::from_item(x), layer).item_tensor(0);
}

BatchTensor layer_forward(const BatchTensor& x, const ConvLayerParams& layer) {
  return layer.role == LayerRole::Conv ? conv2d_forward(x, layer)
                                       : convtranspose2d_forward(x, layer);
}

GradientBundle layer_backward(const BatchTensor& x, const ConvLayerParams& layer,
                              const BatchTensor& upstream, bool need_input_grad) {
  return layer.role == LayerRole::Conv
             ? conv2d_backward(x, layer, upstream, need_input_grad)
             : convtranspose2d_backward(x, layer, upstream, need_input_grad);
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(std::span<const double> forward_input, std::span<double> grad) {
  if (forward_input.size() != grad.size()) {
    throw ShapeError("relu_backward: input has " + std::to_string(forward_input.size()) +
                     " values, gradient " + std::to_string(grad.size()));
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(forward_input[i] > 0.0)) grad[i] = 0.0;
  }
}

LossResult weighted_bce_logits(std::span<const double> logits, std::span<const double> targets,
                               double pos_weight) {
  if (logits.size() != targets.size()) {
    throw ShapeError("bce: " + std::to_string(logits.size()) + " logits vs " +
                     std::to_string(targets.size()) + " targets");
  }
  if (!(pos_weight > 0.0)) throw ConfigError("bce: pos_weight must be > 0");
  LossResult r;
  r.grad.resize(logits.size());
  if (logits.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = targets[i];
    if (y != 0.0 && y != 1.0) {
      throw InputError("bce: target " + std::to_string(y) + " at index " + std::to_string(i) +
                       " is not binary");
    }
    const double weight = 1.0 + (pos_weight - 1.0) * y;
    // softplus(-z) = log(1 + exp(-z))
    const double softplus_neg = std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0);
    total += (1.0 - y) * z + weight * softplus_neg;
    // sigmoid(-z) without overflow
    const double sig_neg = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    r.grad[i] = ((1.0 - y) - weight * sig_neg) * inv_n;
  }
  r.loss = total * inv_n;
  return r;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg, std::int64_t t, std::string_view name) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam: " + std::string(name) + " has " + std::to_string(params.size()) +
                     " params but " + std::to_string(grads.size()) + " gradients");
  }
  if (t < 1) throw ConfigError("adam: step counter must start at 1");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam: state for " + std::string(name) + " has the wrong size");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw TrainingError("non-finite gradient in " + std::string(name) + " at element " +
                          std::to_string(i));
    }
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  for (double p : params) {
    if (!std::isfinite(p)) {
      throw TrainingError("adam produced a non-finite parameter in " + std::string(name));
    }
  }
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr,
              std::string_view name) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd: size mismatch in " + std::string(name));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw TrainingError("non-finite gradient in " + std::string(name) + " at element " +
                          std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void init_layer(ConvLayerParams& layer, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(layer.fan_in()));
  for (double& w : layer.weights) w = rng.uniform(-bound, bound);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<GradCheckTarget> targets, double h, double scale_floor) {
  GradCheckReport rep;
  for (auto& target : targets) {
    if (target.values.size() != target.analytic.size()) {
      throw ShapeError("grad_check: " + target.name + " values/gradient size mismatch");
    }
    auto check = [&](std::size_t i) {
      double& v = target.values[i];
      const double saved = v;
      v = saved + h;
      const double up = loss();
      v = saved - h;
      const double down = loss();
      v = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = target.analytic[i];
      const double scale = std::max({std::abs(analytic), std::abs(numeric), scale_floor});
      const double rel = std::abs(analytic - numeric) / scale;
      if (rep.checked++ == 0 || rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_name = target.name;
        rep.worst_index = i;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    };
    if (target.indices.empty()) {
      for (std::size_t i = 0; i < target.values.size(); ++i) check(i);
    } else {
      for (std::size_t i : target.indices) {
        if (i >= target.values.size()) throw ShapeError("grad_check: index out of range");
        check(i);
      }
    }
  }
  return rep;
}

}  // namespace scarfcn::nn
