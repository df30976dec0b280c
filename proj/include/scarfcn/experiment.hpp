#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scarfcn/anatomy.hpp"
#include "scarfcn/fcn.hpp"
#include "scarfcn/preprocess.hpp"

namespace scarfcn {

using LabelRow = std::array<int, kSegments>;

// ---------------------------------------------------------------- splits

struct SplitSpec {
  double test_fraction = 0.1;
  double val_fraction_of_dev = 0.2;
  double scale = 1.0;  // subsampling of train and val; test is never scaled
  std::uint64_t seed = 0;
  int max_stratum_key = 6;   // scarred-segment counts >= this share a stratum
  int min_stratum_size = 3;  // smaller strata are merged into a neighbour

  void validate() const;
  nlohmann::json to_json() const;
  static SplitSpec from_json(const nlohmann::json& j);
};

struct Splits {
  std::vector<int> train;  // dataset rows, ascending
  std::vector<int> val;
  std::vector<int> test;
  std::vector<std::string> warnings;
};

/// Stratified on the per-patient scarred-segment count.
Splits stratified_split(std::span<const LabelRow> labels, const SplitSpec& spec);

// ---------------------------------------------------------------- metrics

enum class Level { Patient, LAD, LCx, RCA, Segment };
inline constexpr std::array<Level, 5> kLevels = {Level::Patient, Level::LAD, Level::LCx,
                                                 Level::RCA, Level::Segment};
std::string_view level_name(Level l);
Level parse_level(std::string_view s);

struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  void add(int predicted, int actual);
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Recall of an empty class is 1.0; accuracy over zero decisions is 1.0.
struct LevelMetrics {
  Level level = Level::Segment;
  ConfusionMatrix confusion;
  double accuracy = 1.0;
  double balanced_accuracy = 1.0;
  double sensitivity = 1.0;
  double specificity = 1.0;
};

LevelMetrics compute_metrics(Level level, const ConfusionMatrix& cm);

/// Binary decisions at every level for one patient.
struct LevelDecisions {
  int patient = 0;
  std::array<int, 3> territory{};  // indexed by Territory
  LabelRow segment{};
};

/// Territory = OR over its segments, patient = OR over all segments.
LevelDecisions aggregate_predictions(const LabelRow& segments, const TerritoryMap& map);

struct Evaluation {
  std::array<ConfusionMatrix, 5> confusion;  // indexed like kLevels
  int n_patients = 0;

  std::vector<LevelMetrics> metrics() const;
  LevelMetrics metrics(Level l) const;
};

Evaluation evaluate_predictions(std::span<const LabelRow> predicted, std::span<const LabelRow> labels,
                                const TerritoryMap& map);

/// Segment predictions for dataset rows, computed in fixed chunks so the
/// result does not depend on `threads`.
std::vector<SegmentPrediction> predict_rows(const FcnParameters& params, const Dataset& ds,
                                            std::span<const int> rows, int threads = 1);

Evaluation evaluate_model(const FcnParameters& params, const Dataset& ds, std::span<const int> rows,
                          const TerritoryMap& map, int threads = 1);

// ---------------------------------------------------------------- training

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double lr = 0.001;
  double pos_weight = 10.0;
  PaddingMode padding = PaddingMode::Horizontal;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 0;
  int threads = 1;  // evaluation only; gradient steps are single-threaded
  bool deterministic = true;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_balanced_accuracy_segment = 0.0;
};

struct TrainResult {
  FcnParameters final_params;
  FcnParameters best_params;  // lowest validation loss
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

/// Mini-batch training with weighted BCE on the (2,3,6) logits. `split` is
/// only recorded in the checkpoint metadata.
TrainResult train(const Dataset& ds, const Splits& splits, const TrainConfig& cfg,
                  const SplitSpec& split = {},
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean weighted BCE over the given rows.
double dataset_loss(const FcnParameters& params, const Dataset& ds, std::span<const int> rows,
                    double pos_weight);

std::string training_log_csv(std::span<const EpochLog> log);

// ---------------------------------------------------------------- reports

struct ReportCell {
  double scale = 1.0;
  PaddingMode padding = PaddingMode::Horizontal;
  std::vector<std::uint64_t> seeds;
  std::vector<Evaluation> per_seed;
  std::string split_name = "test";

  /// Per level and metric, the median across seeds.
  std::vector<LevelMetrics> median() const;
};

struct Report {
  TerritoryMap territory_map = TerritoryMap::standard();
  std::vector<ReportCell> cells;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

void save_report(const Report& report, const std::filesystem::path& dir);

struct AblationGrid {
  std::vector<double> scales{0.5, 0.75, 1.0};
  std::vector<PaddingMode> paddings{PaddingMode::None, PaddingMode::Horizontal};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TrainConfig train;
  SplitSpec split;

  nlohmann::json to_json() const;
  static AblationGrid from_json(const nlohmann::json& j);
};

/// One training run per (scale, padding, seed); cells may run on `threads`
/// workers, each run itself deterministic.
Report run_ablation(const Dataset& ds, const AblationGrid& grid, const TerritoryMap& map,
                    int threads = 1);

}  // namespace scarfcn
