#include "scarfcn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "scarfcn/error.hpp"
#include "scarfcn/io_util.hpp"

namespace scarfcn {

namespace {

using nlohmann::json;

// Samples `src` on `count` uniformly spaced positions between integer indices
// `first` and `last`, writing to `out`. Both ends are hit exactly.
void interpolate_span(std::span<const double> src, int first, int last, int count, double* out) {
  const long span = last - first;
  const long denom = count - 1;
  for (int j = 0; j < count; ++j) {
    // Integer numerator keeps grid points that coincide with samples exact.
    const long num = static_cast<long>(j) * span;
    const long whole = num / denom;
    const long rem = num % denom;
    const int i0 = first + static_cast<int>(whole);
    if (rem == 0) {
      out[j] = src[static_cast<std::size_t>(i0)];
    } else {
      const double frac = static_cast<double>(rem) / static_cast<double>(denom);
      const double a = src[static_cast<std::size_t>(i0)];
      const double b = src[static_cast<std::size_t>(i0) + 1];
      out[j] = a + frac * (b - a);
    }
  }
}

}  // namespace

int ResampleConfig::systole_points() const {
  return static_cast<int>(std::lround(n_points * systole_fraction));
}

void ResampleConfig::validate() const {
  if (n_points < 8 || n_points > 4096) {
    throw ConfigError("n_points " + std::to_string(n_points) + " outside 8..4096");
  }
  if (!(systole_fraction > 0.0 && systole_fraction < 1.0)) {
    throw ConfigError("systole_fraction must lie in (0, 1)");
  }
  const int s = systole_points();
  if (s < 2 || s > n_points - 2) {
    throw ConfigError("systole point count " + std::to_string(s) + " outside 2.." +
                      std::to_string(n_points - 2));
  }
}

json ResampleConfig::to_json() const {
  return {{"n_points", n_points}, {"systole_fraction", systole_fraction}};
}

std::vector<double> resample_trace(const StrainTrace& trace, const ResampleConfig& cfg) {
  cfg.validate();
  trace.validate();
  const int last = static_cast<int>(trace.samples.size()) - 1;
  const int s = cfg.systole_points();
  const int d = cfg.n_points - s + 1;
  std::vector<double> out(static_cast<std::size_t>(cfg.n_points));
  interpolate_span(trace.samples, 0, trace.avc_index, s, out.data());
  // Diastole's first point is the AVC sample again; it is overwritten, not averaged.
  interpolate_span(trace.samples, trace.avc_index, last, d, out.data() + (s - 1));
  return out;
}

std::span<const double> Dataset::patient(int i) const {
  const std::size_t block = static_cast<std::size_t>(kSegments) * n_points();
  return std::span<const double>(strain).subspan(static_cast<std::size_t>(i) * block, block);
}

void Dataset::validate() const {
  config.validate();
  if (labels.size() != patient_ids.size()) {
    throw InputError("dataset: " + std::to_string(labels.size()) + " label rows for " +
                     std::to_string(patient_ids.size()) + " patients");
  }
  const std::size_t expect = patient_ids.size() * kSegments * static_cast<std::size_t>(n_points());
  if (strain.size() != expect) {
    throw InputError("dataset: strain holds " + std::to_string(strain.size()) +
                     " values, expected " + std::to_string(expect));
  }
  for (const auto& row : labels) {
    for (int v : row) {
      if (v != 0 && v != 1) throw InputError("dataset: non-binary label");
    }
  }
}

Dataset preprocess_cohort(const Cohort& cohort, const ResampleConfig& cfg, int threads) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  ds.source_hash = io::hex64(io::fnv1a(cohort_patients_jsonl(cohort)));
  ds.source_seed = cohort.seed;
  const int n = static_cast<int>(cohort.records.size());
  const std::size_t block = static_cast<std::size_t>(kSegments) * cfg.n_points;
  ds.strain.assign(block * n, 0.0);
  for (const auto& r : cohort.records) {
    ds.patient_ids.push_back(r.id);
    ds.labels.push_back(r.labels);
  }

  std::vector<std::string> errors(static_cast<std::size_t>(n));
  auto work = [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      const auto& rec = cohort.records[p];
      for (int s = 0; s < kSegments; ++s) {
        try {
          if (rec.traces.size() != kSegments) throw InputError("record lacks 18 traces");
          const auto v = resample_trace(rec.traces[s], cfg);
          std::copy(v.begin(), v.end(), ds.strain.begin() + p * block + s * cfg.n_points);
        } catch (const Error& e) {
          errors[p] = "patient " + std::to_string(rec.id) + " segment " + std::to_string(s + 1) +
                      ": " + e.what();
          break;
        }
      }
    }
  };
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int b = w * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw InputError(e);
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  io::ensure_dir(dir);
  io::write_f64_le(dir / "strain.bin", ds.strain);
  json manifest = {
      {"format_version", kDatasetFormatVersion},
      {"config", ds.config.to_json()},
      {"n_patients", ds.size()},
      {"n_segments", kSegments},
      {"strain_file", "strain.bin"},
      {"layout", "f64le [patient][segment][point]"},
      {"patient_ids", ds.patient_ids},
      {"labels", ds.labels},
      {"source", {{"patients_hash", ds.source_hash}, {"seed", ds.source_seed}}},
      {"grid_map", ds.grid_map.to_json()},
  };
  if (ds.padding_mode) manifest["padding_mode"] = std::string(padding_name(*ds.padding_mode));
  io::write_json(dir / "manifest.json", manifest);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const json m = io::read_json(dir / "manifest.json");
  const int version = m.value("format_version", -1);
  if (version != kDatasetFormatVersion) {
    throw InputError(dir.string() + ": unsupported dataset format_version " +
                     std::to_string(version));
  }
  Dataset ds;
  try {
    ds.config.n_points = m.at("config").at("n_points").get<int>();
    ds.config.systole_fraction = m.at("config").at("systole_fraction").get<double>();
    ds.patient_ids = m.at("patient_ids").get<std::vector<int>>();
    ds.labels = m.at("labels").get<std::vector<std::array<int, kSegments>>>();
    if (m.contains("source")) {
      ds.source_hash = m.at("source").value("patients_hash", std::string());
      ds.source_seed = m.at("source").value("seed", std::uint64_t{0});
    }
    if (m.contains("padding_mode")) {
      ds.padding_mode = parse_padding(m.at("padding_mode").get<std::string>());
    }
    if (m.contains("grid_map")) ds.grid_map = SegmentGridMap::from_json(m.at("grid_map"));
  } catch (const json::exception& e) {
    throw InputError(dir.string() + "/manifest.json: " + e.what());
  }
  ds.strain = io::read_f64_le(dir / m.value("strain_file", std::string("strain.bin")));
  ds.validate();
  return ds;
}

}  // namespace scarfcn
