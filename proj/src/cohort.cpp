#include "scarfcn/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "scarfcn/error.hpp"
#include "scarfcn/io_util.hpp"
#include "scarfcn/random.hpp"
#include "scarfcn/sobol.hpp"

namespace scarfcn {

namespace {

using nlohmann::json;

constexpr int kMinTraceLength = 16;
constexpr int kSobolDims = 5;

double affine(double u, ParamRange r) { return r.lo + u * (r.hi - r.lo); }

json range_json(ParamRange r) { return json::array({r.lo, r.hi}); }

ParamRange range_from(const json& j, const char* key, ParamRange fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError(std::string("cohort config: ") + key + " needs [lo, hi]");
  return {v[0], v[1]};
}

void check_range(const char* name, ParamRange r, ParamRange allowed) {
  if (!(r.lo <= r.hi) || r.lo < allowed.lo || r.hi > allowed.hi) {
    std::ostringstream ss;
    ss << "cohort config: " << name << " range [" << r.lo << ", " << r.hi << "] not within ["
       << allowed.lo << ", " << allowed.hi << "]";
    throw ConfigError(ss.str());
  }
}

struct Candidate {
  PatientRecord record;
  bool delay_ok = false;
  bool gls_ok = false;
};

Candidate simulate_patient(std::uint64_t seed, const CohortConfig& cfg, const SobolSequence& sobol,
                           int index) {
  Candidate c;
  PatientRecord& rec = c.record;
  rec.source_index = static_cast<std::uint64_t>(index) + 1;
  const std::vector<double> u = sobol.point(rec.source_index);

  PatientParams& p = rec.params;
  p.lv_contractility = affine(u[0], cfg.lv_contractility);
  p.rv_contractility = affine(u[1], cfg.rv_contractility);
  p.activation_delay_global = affine(u[2], cfg.activation_delay);
  p.heart_period = affine(u[3], cfg.heart_period);
  p.avc_fraction = affine(u[4], cfg.avc_fraction);

  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
  if (rng.uniform() < cfg.p_mi) {
    const auto territory = static_cast<Territory>(rng.below(3));
    double pick = rng.uniform();
    int run = 2;
    for (std::size_t k = 0; k < cfg.run_length_weights.size(); ++k) {
      run = 2 + static_cast<int>(k);
      if (pick < cfg.run_length_weights[k]) break;
      pick -= cfg.run_length_weights[k];
    }
    static const TerritoryMap kMap = TerritoryMap::standard();
    const auto& segs = kMap.segments(territory);
    const int span = static_cast<int>(segs.size());
    run = std::min(run, span);
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(span - run + 1)));
    for (int k = start; k < start + run; ++k) {
      // (0, max]: 1 - uniform() never hits zero.
      p.scar_volume_fraction[segs[k] - 1] = cfg.scar_fraction_max * (1.0 - rng.uniform());
    }
  }

  const int n_samples =
      std::max(kMinTraceLength, static_cast<int>(std::lround(p.heart_period * cfg.frame_rate_hz)));
  rec.traces.reserve(kSegments);
  for (int s = 1; s <= kSegments; ++s) {
    StrainTrace t = synth_strain(p, s, n_samples, cfg.model);
    if (cfg.noise_sigma > 0.0) {
      for (std::size_t i = 1; i + 1 < t.samples.size(); ++i) {
        t.samples[i] += cfg.noise_sigma * rng.normal();
      }
    }
    rec.traces.push_back(std::move(t));
    rec.labels[s - 1] = p.scar_volume_fraction[s - 1] > 0.0 ? 1 : 0;
  }

  c.delay_ok = p.activation_delay_global >= cfg.min_activation_delay;
  const double gls = global_longitudinal_strain(rec);
  c.gls_ok = gls >= cfg.gls_window.lo && gls <= cfg.gls_window.hi;
  return c;
}

}  // namespace

void StrainTrace::validate() const {
  const auto n = static_cast<int>(samples.size());
  if (n < kMinTraceLength) {
    throw InputError("trace has " + std::to_string(n) + " samples, need at least " +
                     std::to_string(kMinTraceLength));
  }
  if (avc_index <= 0 || avc_index >= n - 1) {
    throw InputError("avc_index " + std::to_string(avc_index) + " outside (0, " +
                     std::to_string(n - 1) + ")");
  }
  for (double v : samples) {
    if (!std::isfinite(v)) throw InputError("trace contains a non-finite sample");
  }
}

int PatientRecord::scarred_segments() const {
  return std::accumulate(labels.begin(), labels.end(), 0);
}

void PatientRecord::validate() const {
  const std::string who = "patient " + std::to_string(id) + ": ";
  if (traces.size() != kSegments) {
    throw InputError(who + "expected 18 traces, got " + std::to_string(traces.size()));
  }
  for (int s = 0; s < kSegments; ++s) {
    try {
      traces[s].validate();
    } catch (const InputError& e) {
      throw InputError(who + "segment " + std::to_string(s + 1) + ": " + e.what());
    }
    if (traces[s].samples.size() != traces[0].samples.size() ||
        traces[s].avc_index != traces[0].avc_index) {
      throw InputError(who + "segment " + std::to_string(s + 1) +
                       " differs in length or AVC index from segment 1");
    }
    const double v = params.scar_volume_fraction[s];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InputError(who + "scar fraction outside [0, 1] at segment " + std::to_string(s + 1));
    }
    if (labels[s] != (v > 0.0 ? 1 : 0)) {
      throw InputError(who + "label of segment " + std::to_string(s + 1) +
                       " disagrees with its scar fraction");
    }
  }
}

void CohortConfig::validate() const {
  if (n_raw < 1) throw ConfigError("cohort config: n_raw must be >= 1");
  if (!(p_mi >= 0.0 && p_mi <= 1.0)) throw ConfigError("cohort config: p_mi must be in [0, 1]");
  check_range("lv_contractility", lv_contractility, {0.5, 1.5});
  check_range("rv_contractility", rv_contractility, {0.5, 1.5});
  check_range("activation_delay", activation_delay, {0.0, 0.12});
  check_range("heart_period", heart_period, {0.6, 1.2});
  check_range("avc_fraction", avc_fraction, {0.30, 0.45});
  if (!(scar_fraction_max > 0.0 && scar_fraction_max <= 1.0)) {
    throw ConfigError("cohort config: scar_fraction_max must be in (0, 1]");
  }
  double total = 0.0;
  for (double w : run_length_weights) {
    if (!(w >= 0.0)) throw ConfigError("cohort config: negative run-length weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("cohort config: run-length weights must sum to 1");
  }
  if (!(gls_window.lo < gls_window.hi)) throw ConfigError("cohort config: empty GLS window");
  if (!(frame_rate_hz > 0.0)) throw ConfigError("cohort config: frame_rate_hz must be > 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("cohort config: noise_sigma must be >= 0");
  if (!(model.amplitude > 0.0) || !(model.kappa >= 0.0 && model.kappa < 1.0) ||
      !(model.prestretch_gain >= 0.0)) {
    throw ConfigError("cohort config: surrogate constants out of range");
  }
}

json CohortConfig::to_json() const {
  return {
      {"n_raw", n_raw},
      {"p_mi", p_mi},
      {"lv_contractility", range_json(lv_contractility)},
      {"rv_contractility", range_json(rv_contractility)},
      {"activation_delay", range_json(activation_delay)},
      {"heart_period", range_json(heart_period)},
      {"avc_fraction", range_json(avc_fraction)},
      {"scar_fraction_max", scar_fraction_max},
      {"run_length_weights", run_length_weights},
      {"gls_window", range_json(gls_window)},
      {"min_activation_delay", min_activation_delay},
      {"frame_rate_hz", frame_rate_hz},
      {"noise_sigma", noise_sigma},
      {"surrogate",
       {{"amplitude", model.amplitude},
        {"kappa", model.kappa},
        {"prestretch_gain", model.prestretch_gain}}},
  };
}

CohortConfig CohortConfig::from_json(const json& j) {
  CohortConfig c;
  c.n_raw = j.value("n_raw", c.n_raw);
  c.p_mi = j.value("p_mi", c.p_mi);
  c.lv_contractility = range_from(j, "lv_contractility", c.lv_contractility);
  c.rv_contractility = range_from(j, "rv_contractility", c.rv_contractility);
  c.activation_delay = range_from(j, "activation_delay", c.activation_delay);
  c.heart_period = range_from(j, "heart_period", c.heart_period);
  c.avc_fraction = range_from(j, "avc_fraction", c.avc_fraction);
  c.scar_fraction_max = j.value("scar_fraction_max", c.scar_fraction_max);
  if (j.contains("run_length_weights")) {
    c.run_length_weights = j.at("run_length_weights").get<std::array<double, 5>>();
  }
  c.gls_window = range_from(j, "gls_window", c.gls_window);
  c.min_activation_delay = j.value("min_activation_delay", c.min_activation_delay);
  c.frame_rate_hz = j.value("frame_rate_hz", c.frame_rate_hz);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  if (j.contains("surrogate")) {
    const json& s = j.at("surrogate");
    c.model.amplitude = s.value("amplitude", c.model.amplitude);
    c.model.kappa = s.value("kappa", c.model.kappa);
    c.model.prestretch_gain = s.value("prestretch_gain", c.model.prestretch_gain);
  }
  return c;
}

json CohortCounts::to_json() const {
  return {{"n_raw", n_raw},
          {"n_accepted", n_accepted},
          {"n_rejected_gls", n_rejected_gls},
          {"n_rejected_delay", n_rejected_delay},
          {"n_scarred_patients", n_scarred_patients},
          {"n_scarred_segments", n_scarred_segments},
          {"scarred_segment_fraction", scarred_segment_fraction}};
}

CohortCounts Cohort::counts() const {
  CohortCounts c;
  c.n_raw = n_raw;
  c.n_accepted = static_cast<int>(records.size());
  c.n_rejected_gls = n_rejected_gls;
  c.n_rejected_delay = n_rejected_delay;
  for (const auto& r : records) {
    const int k = r.scarred_segments();
    c.n_scarred_segments += k;
    c.n_scarred_patients += k > 0 ? 1 : 0;
  }
  if (!records.empty()) {
    c.scarred_segment_fraction =
        static_cast<double>(c.n_scarred_segments) / (kSegments * static_cast<double>(records.size()));
  }
  return c;
}

double segment_onset_delay(const PatientParams& params, int segment) {
  switch (wall_of(segment)) {
    case Wall::Anteroseptal:
    case Wall::Inferoseptal:
      return 0.0;
    case Wall::Anterior:
    case Wall::Inferior:
      return 0.5 * params.activation_delay_global;
    case Wall::Inferolateral:
    case Wall::Anterolateral:
      return params.activation_delay_global;
  }
  return 0.0;
}

// Piecewise closed form on normalised time t in [0, 1], t_avc = avc/(n-1):
//   prestretch   0 <= t < o:        P sin(pi t / o),            P = gain * onset
//   contraction  o <= t <= t_avc:   -A (1 - cos(pi (t-o)/(t_avc-o))) / 2
//   relaxation   t_avc < t <= 1:    -A (1 + cos(pi (t-t_avc)/(1-t_avc))) / 2
// with o = onset / period and A = amplitude * contractility * (1 - kappa v).
// The minimum -A sits exactly on the AVC sample.
StrainTrace synth_strain(const PatientParams& params, int segment, int n_samples,
                         const SurrogateModel& model) {
  check_segment(segment);
  if (n_samples < kMinTraceLength) {
    throw ConfigError("synth_strain: n_samples " + std::to_string(n_samples) + " < " +
                      std::to_string(kMinTraceLength));
  }
  StrainTrace trace;
  trace.samples.assign(static_cast<std::size_t>(n_samples), 0.0);
  const int last = n_samples - 1;
  trace.avc_index =
      std::clamp(static_cast<int>(std::lround(params.avc_fraction * last)), 1, last - 1);

  const double t_avc = static_cast<double>(trace.avc_index) / last;
  const double v = params.scar_volume_fraction[segment - 1];
  const double amp = model.amplitude * params.lv_contractility * (1.0 - model.kappa * v);
  const double onset_s = segment_onset_delay(params, segment);
  const double onset = std::min(onset_s / params.heart_period, 0.9 * t_avc);
  const double bump = model.prestretch_gain * onset_s;
  constexpr double pi = std::numbers::pi;

  for (int i = 1; i < last; ++i) {
    const double t = static_cast<double>(i) / last;
    double s;
    if (t < onset) {
      s = bump * std::sin(pi * t / onset);
    } else if (i <= trace.avc_index) {
      s = -amp * 0.5 * (1.0 - std::cos(pi * (t - onset) / (t_avc - onset)));
    } else {
      s = -amp * 0.5 * (1.0 + std::cos(pi * (t - t_avc) / (1.0 - t_avc)));
    }
    trace.samples[static_cast<std::size_t>(i)] = s;
  }
  if (trace.avc_index > 0) {
    trace.samples[static_cast<std::size_t>(trace.avc_index)] = -amp;
  }
  return trace;
}

double global_longitudinal_strain(const PatientRecord& record) {
  double sum = 0.0;
  for (const auto& t : record.traces) {
    const auto end = t.samples.begin() + t.avc_index + 1;
    sum += *std::min_element(t.samples.begin(), end);
  }
  return sum / static_cast<double>(record.traces.size());
}

Cohort generate_cohort(std::uint64_t seed, const CohortConfig& config, int threads) {
  config.validate();
  const SobolSequence sobol(kSobolDims);
  const int n = config.n_raw;
  std::vector<std::optional<Candidate>> out(static_cast<std::size_t>(n));

  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) out[i] = simulate_patient(seed, config, sobol, i);
  };
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int b = w * chunk;
      const int e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }

  Cohort cohort;
  cohort.seed = seed;
  cohort.config = config;
  cohort.n_raw = n;
  double gls_lo = 1e300, gls_hi = -1e300;
  for (auto& c : out) {
    const double gls = global_longitudinal_strain(c->record);
    gls_lo = std::min(gls_lo, gls);
    gls_hi = std::max(gls_hi, gls);
    if (!c->delay_ok) {
      ++cohort.n_rejected_delay;
    } else if (!c->gls_ok) {
      ++cohort.n_rejected_gls;
    } else {
      c->record.id = static_cast<int>(cohort.records.size());
      cohort.records.push_back(std::move(c->record));
    }
  }
  if (cohort.records.empty()) {
    std::ostringstream ss;
    ss << "cohort filter accepted 0 of " << n << " patients (" << cohort.n_rejected_delay
       << " below activation delay " << config.min_activation_delay << " s, "
       << cohort.n_rejected_gls << " with GLS outside [" << config.gls_window.lo << ", "
       << config.gls_window.hi << "]; observed GLS range [" << gls_lo << ", " << gls_hi << "])";
    throw GenerationError(ss.str());
  }
  return cohort;
}

json params_to_json(const PatientParams& p) {
  return {{"lv_contractility", p.lv_contractility},
          {"rv_contractility", p.rv_contractility},
          {"activation_delay_global", p.activation_delay_global},
          {"heart_period", p.heart_period},
          {"avc_fraction", p.avc_fraction},
          {"scar_volume_fraction", p.scar_volume_fraction}};
}

PatientParams params_from_json(const json& j) {
  PatientParams p;
  p.lv_contractility = j.at("lv_contractility").get<double>();
  p.rv_contractility = j.at("rv_contractility").get<double>();
  p.activation_delay_global = j.at("activation_delay_global").get<double>();
  p.heart_period = j.at("heart_period").get<double>();
  p.avc_fraction = j.at("avc_fraction").get<double>();
  p.scar_volume_fraction = j.at("scar_volume_fraction").get<std::array<double, kSegments>>();
  return p;
}

std::string cohort_patients_jsonl(const Cohort& cohort) {
  std::string lines;
  for (const auto& r : cohort.records) {
    json samples = json::array();
    for (const auto& t : r.traces) samples.push_back(t.samples);
    const json obj = {{"id", r.id},
                      {"source_index", r.source_index},
                      {"params", params_to_json(r.params)},
                      {"labels", r.labels},
                      {"avc_index", r.traces.front().avc_index},
                      {"samples", std::move(samples)}};
    lines += obj.dump();
    lines += '\n';
  }
  return lines;
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  io::ensure_dir(dir);
  const std::string lines = cohort_patients_jsonl(cohort);
  io::write_text(dir / "patients.jsonl", lines);

  const json manifest = {
      {"format_version", kCohortFormatVersion},
      {"seed", cohort.seed},
      {"config", cohort.config.to_json()},
      {"counts", cohort.counts().to_json()},
      {"patients_file", "patients.jsonl"},
      {"patients_hash", io::hex64(io::fnv1a(lines))},
      {"filter",
       {{"criteria", "gls_window + min_activation_delay"},
        {"note", "stand-in for an unenumerated CRT-cohort filter"}}},
  };
  io::write_json(dir / "manifest.json", manifest);
}

Cohort load_cohort(const std::filesystem::path& dir) {
  const json manifest = io::read_json(dir / "manifest.json");
  const int version = manifest.value("format_version", -1);
  if (version != kCohortFormatVersion) {
    throw InputError(dir.string() + ": unsupported cohort format_version " +
                     std::to_string(version));
  }
  Cohort cohort;
  cohort.seed = manifest.value("seed", std::uint64_t{0});
  cohort.config = CohortConfig::from_json(manifest.value("config", json::object()));
  if (manifest.contains("counts")) {
    const json& c = manifest.at("counts");
    cohort.n_raw = c.value("n_raw", 0);
    cohort.n_rejected_gls = c.value("n_rejected_gls", 0);
    cohort.n_rejected_delay = c.value("n_rejected_delay", 0);
  }

  const std::string text =
      io::read_text(dir / manifest.value("patients_file", std::string("patients.jsonl")));
  if (manifest.contains("patients_hash")) {
    const std::string want = manifest.at("patients_hash").get<std::string>();
    const std::string got = io::hex64(io::fnv1a(text));
    if (want != got) {
      throw InputError(dir.string() + ": patients file hash " + got +
                       " does not match manifest " + want);
    }
  }
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    PatientRecord r;
    try {
      const json obj = json::parse(line);
      r.id = obj.at("id").get<int>();
      r.source_index = obj.value("source_index", std::uint64_t{0});
      r.params = params_from_json(obj.at("params"));
      r.labels = obj.at("labels").get<std::array<int, kSegments>>();
      const int avc = obj.at("avc_index").get<int>();
      for (const auto& s : obj.at("samples")) {
        r.traces.push_back(StrainTrace{s.get<std::vector<double>>(), avc});
      }
    } catch (const json::exception& e) {
      throw InputError(dir.string() + "/patients.jsonl line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    if (r.id != static_cast<int>(cohort.records.size())) {
      throw InputError("patients.jsonl line " + std::to_string(lineno) + ": id " +
                       std::to_string(r.id) + " breaks the dense 0..n-1 numbering");
    }
    r.validate();
    cohort.records.push_back(std::move(r));
  }
  if (cohort.n_raw == 0) cohort.n_raw = static_cast<int>(cohort.records.size());
  return cohort;
}

}  // namespace scarfcn
