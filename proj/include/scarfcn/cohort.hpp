#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "scarfcn/anatomy.hpp"

namespace scarfcn {

/// Simulation inputs for one virtual patient.
struct PatientParams {
  double lv_contractility = 1.0;         // relative to nominal, [0.5, 1.5]
  double rv_contractility = 1.0;         // carried along; unused by the strain model
  double activation_delay_global = 0.0;  // s, [0, 0.12]
  double heart_period = 0.8;             // s, [0.6, 1.2]
  double avc_fraction = 0.35;            // fraction of the cycle, [0.30, 0.45]
  std::array<double, kSegments> scar_volume_fraction{};  // per segment, [0, 1]
};

/// One segment's longitudinal strain (percent) over one cycle.
struct StrainTrace {
  std::vector<double> samples;
  int avc_index = 0;

  /// Throws InputError if the length, endpoints or AVC index are invalid.
  void validate() const;
};

struct PatientRecord {
  int id = 0;
  std::uint64_t source_index = 0;  // Sobol index the parameters came from
  PatientParams params;
  std::vector<StrainTrace> traces;  // 18, AHA order
  std::array<int, kSegments> labels{};

  int scarred_segments() const;
  void validate() const;
};

/// Constants of the closed-form strain model.
struct SurrogateModel {
  double amplitude = 18.0;       // peak systolic shortening at nominal contractility, %
  double kappa = 0.8;            // shortening lost per unit scar fraction
  double prestretch_gain = 25.0; // % per second of onset delay
};

struct ParamRange {
  double lo;
  double hi;
};

struct CohortConfig {
  int n_raw = 7000;
  double p_mi = 0.51;
  ParamRange lv_contractility{0.5, 1.5};
  ParamRange rv_contractility{0.5, 1.5};
  ParamRange activation_delay{0.0, 0.12};
  ParamRange heart_period{0.6, 1.2};
  ParamRange avc_fraction{0.30, 0.45};
  double scar_fraction_max = 0.6;  // scar fractions drawn uniformly from (0, max]
  // Probabilities of scar runs of 2..6 segments.
  std::array<double, 5> run_length_weights{0.30, 0.30, 0.20, 0.12, 0.08};
  ParamRange gls_window{-20.0, -5.0};
  double min_activation_delay = 0.035;  // s; dyssynchrony floor of the accepted cohort
  double frame_rate_hz = 50.0;
  double noise_sigma = 0.0;  // additive Gaussian noise on interior samples, %
  SurrogateModel model;

  void validate() const;
  nlohmann::json to_json() const;
  static CohortConfig from_json(const nlohmann::json& j);
};

struct CohortCounts {
  int n_raw = 0;
  int n_accepted = 0;
  int n_rejected_gls = 0;
  int n_rejected_delay = 0;
  int n_scarred_patients = 0;
  int n_scarred_segments = 0;
  double scarred_segment_fraction = 0.0;

  nlohmann::json to_json() const;
};

struct Cohort {
  std::uint64_t seed = 0;
  CohortConfig config;
  std::vector<PatientRecord> records;

  CohortCounts counts() const;
  int n_raw = 0;
  int n_rejected_gls = 0;
  int n_rejected_delay = 0;
};

/// Strain trace of `segment` (1..18) sampled at `n_samples` uniform points over
/// one cycle. Throws InputError for a bad segment, ConfigError if n_samples < 16.
StrainTrace synth_strain(const PatientParams& params, int segment, int n_samples,
                         const SurrogateModel& model = {});

/// Onset delay of a segment given the global activation delay: septal walls
/// start first, lateral walls last, anterior/inferior halfway.
double segment_onset_delay(const PatientParams& params, int segment);

/// Mean over segments of the most negative systolic strain.
double global_longitudinal_strain(const PatientRecord& record);

Cohort generate_cohort(std::uint64_t seed, const CohortConfig& config, int threads = 1);

/// The patients.jsonl payload: one JSON object per record.
std::string cohort_patients_jsonl(const Cohort& cohort);
void save_cohort(const Cohort& cohort, const std::filesystem::path& dir);
Cohort load_cohort(const std::filesystem::path& dir);

nlohmann::json params_to_json(const PatientParams& p);
PatientParams params_from_json(const nlohmann::json& j);

inline constexpr int kCohortFormatVersion = 1;

}  // namespace scarfcn
