#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scarfcn/tensor.hpp"

namespace scarfcn::nn {

enum class LayerRole { Conv, Transpose };

/// Weights and geometry of a 2-D convolution. Conv layers store weights as
/// out_ch x in_ch x kh x kw. Transpose layers store in_ch x out_ch x kh x kw,
/// i.e. the weights of the convolution they are the adjoint of.
struct ConvLayerParams {
  LayerRole role = LayerRole::Conv;
  int in_ch = 0;
  int out_ch = 0;
  int kh = 1;
  int kw = 1;
  int sh = 1;
  int sw = 1;
  int ph = 0;
  int pw = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static ConvLayerParams conv(int in_ch, int out_ch, int kh, int kw, int sh = 1, int sw = 1,
                              int ph = 0, int pw = 0);
  static ConvLayerParams transpose(int in_ch, int out_ch, int kh, int kw, int sh = 1, int sw = 1,
                                   int ph = 0, int pw = 0);

  /// Throws ShapeError naming both shapes if `in` is incompatible.
  Shape3 output_shape(Shape3 in) const;
  /// Geometry and value checks (sizes, positive kernel/stride, finiteness).
  void validate() const;
  int fan_in() const { return in_ch * kh * kw; }

  bool operator==(const ConvLayerParams&) const = default;
};

/// Gradients congruent to a layer's parameters and its input.
struct GradientBundle {
  std::vector<double> weights;
  std::vector<double> bias;
  BatchTensor input;  // empty when the input gradient was not requested
};

BatchTensor conv2d_forward(const BatchTensor& x, const ConvLayerParams& layer);
GradientBundle conv2d_backward(const BatchTensor& x, const ConvLayerParams& layer,
                               const BatchTensor& upstream, bool need_input_grad = true);

BatchTensor convtranspose2d_forward(const BatchTensor& x, const ConvLayerParams& layer);
GradientBundle convtranspose2d_backward(const BatchTensor& x, const ConvLayerParams& layer,
                                        const BatchTensor& upstream, bool need_input_grad = true);

// Single-item conveniences.
GridTensor conv2d_forward(const GridTensor& x, const ConvLayerParams& layer);
GridTensor convtranspose2d_forward(const GridTensor& x, const ConvLayerParams& layer);

/// Dispatches on layer.role.
BatchTensor layer_forward(const BatchTensor& x, const ConvLayerParams& layer);
GradientBundle layer_backward(const BatchTensor& x, const ConvLayerParams& layer,
                              const BatchTensor& upstream, bool need_input_grad = true);

void relu_inplace(std::span<double> x);
/// Gradient of max(0, x) given the forward input; 0 at x == 0.
void relu_backward_inplace(std::span<const double> forward_input, std::span<double> grad);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

/// Mean over elements of -[w y log s(z) + (1 - y) log(1 - s(z))], evaluated as
/// (1 - y) z + (1 + (w - 1) y) (log1p(exp(-|z|)) + max(-z, 0)).
LossResult weighted_bce_logits(std::span<const double> logits, std::span<const double> targets,
                               double pos_weight);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update at step t >= 1. A non-finite gradient
/// throws TrainingError naming `name` and leaves params and state untouched.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg, std::int64_t t, std::string_view name);

void sgd_step(std::span<double> params, std::span<const double> grads, double lr,
              std::string_view name);

/// Deterministic He-style init: weights uniform in +-sqrt(6 / fan_in), bias 0.
void init_layer(ConvLayerParams& layer, std::uint64_t seed);

struct GradCheckTarget {
  std::string name;
  std::span<double> values;           // perturbed in place, restored afterwards
  std::span<const double> analytic;   // gradient to compare against
  std::vector<std::size_t> indices;   // subset to check; empty = every element
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Central differences of `loss` with step h against the analytic gradients.
/// Relative error is |a - n| / max(|a|, |n|, scale_floor).
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<GradCheckTarget> targets, double h = 1e-5,
                           double scale_floor = 1e-4);

}  // namespace scarfcn::nn
