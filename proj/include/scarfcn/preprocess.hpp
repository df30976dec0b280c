#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scarfcn/anatomy.hpp"
#include "scarfcn/bullseye.hpp"
#include "scarfcn/cohort.hpp"

namespace scarfcn {

struct ResampleConfig {
  int n_points = 500;
  double systole_fraction = 0.35;

  /// Number of output points given to systole, AVC sample included.
  int systole_points() const;
  /// Throws ConfigError when the point budget is invalid.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Resamples systole [0, avc] and diastole [avc, last] separately by linear
/// interpolation and joins them; the AVC value lands at systole_points() - 1.
std::vector<double> resample_trace(const StrainTrace& trace, const ResampleConfig& cfg);

/// Fixed-length strain for a whole cohort, [patient][segment][point].
struct Dataset {
  ResampleConfig config;
  std::vector<int> patient_ids;
  std::vector<std::array<int, kSegments>> labels;
  std::vector<double> strain;
  std::string source_hash;  // hash of the source cohort's patients.jsonl
  std::uint64_t source_seed = 0;
  std::optional<PaddingMode> padding_mode;
  SegmentGridMap grid_map = SegmentGridMap::standard();

  int size() const { return static_cast<int>(patient_ids.size()); }
  int n_points() const { return config.n_points; }
  /// 18 * n_points values for patient at position i.
  std::span<const double> patient(int i) const;
  void validate() const;
};

Dataset preprocess_cohort(const Cohort& cohort, const ResampleConfig& cfg, int threads = 1);

/// manifest.json + strain.bin (little-endian f64).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

inline constexpr int kDatasetFormatVersion = 1;

}  // namespace scarfcn
