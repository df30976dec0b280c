#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

#include "json.hpp"
#include "scarfcn/anatomy.hpp"
#include "scarfcn/bullseye.hpp"
#include "scarfcn/nn.hpp"
#include "scarfcn/preprocess.hpp"
#include "scarfcn/tensor.hpp"

namespace scarfcn {

inline constexpr int kArchVersion = 1;
inline constexpr int kScarChannel = 0;
inline constexpr int kNoScarChannel = 1;

/// Four-layer scar FCN:
///   conv 3x3 T->32, stride 1, pad (1,0) horizontal / (1,1) none  -> (32,3,6)
///   conv 3x3 32->64, stride 2, pad 1                            -> (64,2,3)
///   conv 3x3 64->128, stride 1, pad 1                           -> (128,2,3)
///   transpose conv 2x2 128->2, stride (1,2)                     -> (2,3,6)
/// ReLU after the three convolutions; the last layer emits logits with
/// channel 0 = scar and channel 1 = no scar.
struct FcnParameters {
  std::array<nn::ConvLayerParams, 4> layers;
  PaddingMode padding_mode = PaddingMode::Horizontal;
  int arch_version = kArchVersion;
  nlohmann::json train_config = nlohmann::json::object();
  std::uint64_t rng_seed = 0;
  std::int64_t created_unix = 0;

  int time_points() const { return layers[0].in_ch; }
  Shape3 input_shape() const;
  std::size_t parameter_count() const;
  /// Throws ShapeError unless the layers match the architecture table.
  void validate() const;
};

/// He-initialised network for `time_points` input channels.
FcnParameters make_fcn(PaddingMode mode, int time_points = 500, std::uint64_t seed = 0);
/// Same geometry with every weight and bias zero.
FcnParameters make_zero_fcn(PaddingMode mode, int time_points = 500);

/// Activations kept for the backward pass.
struct ForwardCache {
  BatchTensor input;
  std::array<BatchTensor, 3> pre;   // conv outputs before ReLU
  std::array<BatchTensor, 3> post;  // after ReLU
};

BatchTensor fcn_forward(const FcnParameters& params, const BatchTensor& input,
                        ForwardCache* cache = nullptr);
GridTensor forward(const FcnParameters& params, const GridTensor& input);

struct FcnGradients {
  std::array<nn::GradientBundle, 4> layers;
  BatchTensor input;  // only if requested
};

FcnGradients fcn_backward(const FcnParameters& params, const ForwardCache& cache,
                          const BatchTensor& dlogits, bool need_input_grad = false);

/// Grid input of one patient (18 * T strain values) for the given padding mode.
GridTensor build_input(std::span<const double> strain, int time_points, PaddingMode mode,
                       const SegmentGridMap& map = SegmentGridMap::standard());
/// Inputs for dataset positions `rows` stacked into one batch.
BatchTensor build_batch(const Dataset& ds, std::span<const int> rows, PaddingMode mode);
/// One-hot (2,3,6) target grids for the same rows.
BatchTensor build_targets(const Dataset& ds, std::span<const int> rows);
GridTensor label_grid(const std::array<int, kSegments>& labels,
                      const SegmentGridMap& map = SegmentGridMap::standard());

struct SegmentPrediction {
  GridTensor logits;                       // (2,3,6)
  std::array<int, kSegments> predicted{};  // 1 = scar
  std::array<double, kSegments> scores{};  // scar logit - no-scar logit
};

/// Per-cell argmax; ties go to no-scar.
SegmentPrediction predictions_from_logits(const GridTensor& logits,
                                          const SegmentGridMap& map = SegmentGridMap::standard());
SegmentPrediction predict_segments(const FcnParameters& params, const GridTensor& input,
                                   const SegmentGridMap& map = SegmentGridMap::standard());

/// Binary checkpoint: "FCNS", u32 version, u64 header length, JSON header,
/// then little-endian f64 payload (per layer: weights, then bias).
void save_checkpoint(const FcnParameters& params, const std::filesystem::path& path);
std::string checkpoint_bytes(const FcnParameters& params);
FcnParameters load_checkpoint(const std::filesystem::path& path);
FcnParameters parse_checkpoint(std::string_view bytes);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace scarfcn
