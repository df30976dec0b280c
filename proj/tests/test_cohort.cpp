#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "scarfcn/anatomy.hpp"
#include "scarfcn/cohort.hpp"
#include "scarfcn/error.hpp"
#include "scarfcn/io_util.hpp"
#include "scarfcn/sobol.hpp"

using namespace scarfcn;
namespace fs = std::filesystem;

TEST_CASE("segment anatomy") {
  CHECK(wall_of(1) == Wall::Anterior);
  CHECK(wall_of(5) == Wall::Inferolateral);
  CHECK(wall_of(17) == Wall::Inferolateral);
  CHECK(ring_of(6) == Ring::Basal);
  CHECK(ring_of(7) == Ring::Mid);
  CHECK(ring_of(18) == Ring::Apical);
  CHECK_THROWS_AS(check_segment(0), InputError);
  CHECK_THROWS_AS(check_segment(19), InputError);
}

TEST_CASE("territory map partitions the segments") {
  const auto m = TerritoryMap::standard();
  std::set<int> all;
  for (Territory t : kTerritories) {
    CHECK(m.segments(t).size() == 6);
    for (int s : m.segments(t)) {
      CHECK(m.territory_of(s) == t);
      all.insert(s);
    }
  }
  CHECK(all.size() == 18);
  CHECK(m.territory_of(5) == Territory::LCx);
  CHECK(m.territory_of(3) == Territory::RCA);
  CHECK(m.territory_of(13) == Territory::LAD);
  CHECK(TerritoryMap::from_json(m.to_json()) == m);
  CHECK_THROWS_AS(TerritoryMap::from_lists({std::vector<int>{1}, std::vector<int>{1}, std::vector<int>{2}}),
                  ConfigError);
}

TEST_CASE("standard grid map: rows are rings, columns are walls") {
  const auto g = SegmentGridMap::standard();
  std::set<std::pair<int, int>> cells;
  for (int s = 1; s <= 18; ++s) {
    const auto c = g.cell(s);
    CHECK(c.row == (s - 1) / 6);
    CHECK(c.col == (s - 1) % 6);
    CHECK(g.segment_at(c.row, c.col) == s);
    cells.insert({c.row, c.col});
  }
  CHECK(cells.size() == 18);
  CHECK(SegmentGridMap::from_json(g.to_json()) == g);
}

TEST_CASE("Sobol points match frozen reference values") {
  // scipy.stats.qmc.Sobol(d=32, scramble=False), point i of the unscrambled sequence
  const std::vector<double> p5{0.625, 0.125, 0.875, 0.625, 0.625, 0.875, 0.125, 0.125,
                               0.125, 0.375, 0.125, 0.625, 0.125, 0.875, 0.625, 0.625,
                               0.625, 0.625, 0.125, 0.375, 0.375, 0.875, 0.125, 0.625,
                               0.625, 0.125, 0.125, 0.375, 0.375, 0.875, 0.125, 0.375};
  const std::vector<double> p1000{
      0.0927734375, 0.1611328125, 0.4501953125, 0.9091796875, 0.9931640625, 0.1630859375,
      0.0166015625, 0.6396484375, 0.9990234375, 0.1220703125, 0.2314453125, 0.9873046875,
      0.1396484375, 0.9326171875, 0.8798828125, 0.0166015625, 0.6669921875, 0.4326171875,
      0.7626953125, 0.4501953125, 0.2626953125, 0.6220703125, 0.4755859375, 0.3310546875,
      0.7412109375, 0.8505859375, 0.9638671875, 0.8720703125, 0.4873046875, 0.1943359375,
      0.1962890625, 0.4951171875};
  const std::vector<double> p6999{
      0.9173583984375, 0.9774169921875, 0.4051513671875, 0.3480224609375, 0.2401123046875,
      0.1414794921875, 0.6802978515625, 0.7694091796875, 0.9197998046875, 0.1519775390625,
      0.8284912109375, 0.9364013671875, 0.3231201171875, 0.3939208984375, 0.2259521484375,
      0.4154052734375, 0.9241943359375, 0.0345458984375, 0.1868896484375, 0.8175048828125,
      0.6031494140625, 0.8580322265625, 0.9329833984375, 0.2188720703125, 0.7186279296875,
      0.8929443359375, 0.4002685546875, 0.7613525390625, 0.0755615234375, 0.4517822265625,
      0.6817626953125, 0.1029052734375};
  const SobolSequence s(32);
  CHECK(s.point(5) == p5);
  CHECK(s.point(1000) == p1000);
  CHECK(s.point(6999) == p6999);
  const auto p = sobol_sample(4, 12345);
  CHECK(p == std::vector<double>{0.60955810546875, 0.43853759765625, 0.89434814453125,
                                 0.56256103515625});
  CHECK(s.point(1) == std::vector<double>(32, 0.5));
  CHECK_THROWS_AS(s.point(0), ConfigError);
  CHECK_THROWS_AS(SobolSequence(0), ConfigError);
  CHECK_THROWS_AS(SobolSequence(100000), ConfigError);
}

TEST_CASE("Sobol blocks of 2^k points stratify every axis") {
  const SobolSequence s(8);
  // Indices 0..63 of the sequence, with 0 being the origin.
  for (int d = 0; d < 8; ++d) {
    std::vector<int> bins(64, 0);
    bins[0]++;
    for (std::uint64_t i = 1; i < 64; ++i) bins[static_cast<int>(s.point(i)[d] * 64)]++;
    for (int b : bins) CHECK(b == 1);
  }
}

namespace {

PatientParams nominal() {
  PatientParams p;
  p.lv_contractility = 1.0;
  p.activation_delay_global = 0.0;
  p.heart_period = 0.8;
  p.avc_fraction = 0.35;
  return p;
}

}  // namespace

TEST_CASE("surrogate strain: healthy segment peaks at the nominal amplitude") {
  const auto t = synth_strain(nominal(), 2, 40);
  CHECK(t.samples.front() == 0.0);
  CHECK(t.samples.back() == 0.0);
  CHECK(t.avc_index == 14);  // round(0.35 * 39)
  CHECK(*std::min_element(t.samples.begin(), t.samples.end()) == -18.0);
  CHECK(t.samples[14] == -18.0);
  for (std::size_t i = 1; i <= 14; ++i) CHECK(t.samples[i] < t.samples[i - 1]);
  for (std::size_t i = 15; i < t.samples.size(); ++i) CHECK(t.samples[i] > t.samples[i - 1]);
}

TEST_CASE("surrogate strain: transmural scar keeps a fifth of the shortening") {
  auto p = nominal();
  p.scar_volume_fraction[1] = 1.0;
  const auto t = synth_strain(p, 2, 40);
  CHECK(t.samples[14] == doctest::Approx(-3.6).epsilon(1e-15));
  p.scar_volume_fraction[1] = 0.5;
  CHECK(synth_strain(p, 2, 40).samples[14] == doctest::Approx(-10.8).epsilon(1e-15));
}

TEST_CASE("surrogate strain: late lateral activation pre-stretches") {
  auto p = nominal();
  p.activation_delay_global = 0.1;
  CHECK(segment_onset_delay(p, 2) == 0.0);
  CHECK(segment_onset_delay(p, 1) == doctest::Approx(0.05));
  CHECK(segment_onset_delay(p, 6) == doctest::Approx(0.1));
  const auto lat = synth_strain(p, 6, 80);
  const double peak = *std::max_element(lat.samples.begin(), lat.samples.end());
  CHECK(peak > 2.0);
  CHECK(peak <= 2.5);
  const auto sep = synth_strain(p, 3, 80);
  CHECK(*std::max_element(sep.samples.begin(), sep.samples.end()) == 0.0);
}

TEST_CASE("surrogate strain: scar in one segment changes only that trace") {
  auto p = nominal();
  p.activation_delay_global = 0.07;
  auto q = p;
  q.scar_volume_fraction[10] = 0.3;
  for (int s = 1; s <= 18; ++s) {
    const bool same = synth_strain(p, s, 50).samples == synth_strain(q, s, 50).samples;
    CHECK(same == (s != 11));
  }
}

TEST_CASE("surrogate strain rejects short traces and bad segments") {
  CHECK_THROWS_AS(synth_strain(nominal(), 1, 5), ConfigError);
  CHECK_THROWS_AS(synth_strain(nominal(), 19, 40), InputError);
}

TEST_CASE("trace validation") {
  StrainTrace t{std::vector<double>(20, 0.0), 5};
  CHECK_NOTHROW(t.validate());
  t.samples[3] = NAN;
  CHECK_THROWS_AS(t.validate(), InputError);
  t.samples[3] = 0.0;
  t.samples.resize(8);
  CHECK_THROWS_AS(t.validate(), InputError);
  t.samples.resize(20);
  t.avc_index = 0;
  CHECK_THROWS_AS(t.validate(), InputError);
  t.avc_index = 19;
  CHECK_THROWS_AS(t.validate(), InputError);
}

TEST_CASE("generated cohort: labels, runs and filters") {
  CohortConfig cfg;
  cfg.n_raw = 400;
  const Cohort c = generate_cohort(7, cfg, 2);
  REQUIRE(!c.records.empty());
  const auto counts = c.counts();
  CHECK(counts.n_raw == 400);
  CHECK(counts.n_accepted + counts.n_rejected_gls + counts.n_rejected_delay == 400);
  const auto map = TerritoryMap::standard();
  for (const auto& r : c.records) {
    CHECK_NOTHROW(r.validate());
    CHECK(r.params.activation_delay_global >= cfg.min_activation_delay);
    const double gls = global_longitudinal_strain(r);
    CHECK(gls >= -20.0);
    CHECK(gls <= -5.0);
    const int n = r.scarred_segments();
    CHECK((n == 0 || (n >= 2 && n <= 6)));
    std::set<Territory> terr;
    for (int s = 1; s <= 18; ++s) {
      CHECK(r.labels[s - 1] == (r.params.scar_volume_fraction[s - 1] > 0.0 ? 1 : 0));
      if (r.labels[s - 1]) terr.insert(map.territory_of(s));
    }
    CHECK(terr.size() <= 1);
  }
  CHECK(counts.scarred_segment_fraction > 0.04);
  CHECK(counts.scarred_segment_fraction < 0.2);
}

TEST_CASE("cohort generation is deterministic and thread-count independent") {
  CohortConfig cfg;
  cfg.n_raw = 300;
  const auto a = cohort_patients_jsonl(generate_cohort(3, cfg, 1));
  const auto b = cohort_patients_jsonl(generate_cohort(3, cfg, 4));
  CHECK(a == b);
  CHECK(a != cohort_patients_jsonl(generate_cohort(4, cfg, 1)));
}

TEST_CASE("p_mi = 0 yields an all-healthy cohort") {
  CohortConfig cfg;
  cfg.n_raw = 200;
  cfg.p_mi = 0.0;
  const auto c = generate_cohort(1, cfg);
  CHECK(c.counts().n_scarred_segments == 0);
}

TEST_CASE("noise only touches interior samples") {
  CohortConfig cfg;
  cfg.n_raw = 50;
  cfg.noise_sigma = 0.5;
  for (const auto& r : generate_cohort(2, cfg).records) {
    for (const auto& t : r.traces) {
      CHECK(t.samples.front() == 0.0);
      CHECK(t.samples.back() == 0.0);
    }
  }
}

TEST_CASE("an impossible filter fails with diagnostics") {
  CohortConfig cfg;
  cfg.n_raw = 50;
  cfg.gls_window = {-2.0, -1.0};
  try {
    generate_cohort(1, cfg);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(std::string(e.what()).find("GLS") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  CohortConfig cfg;
  cfg.p_mi = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_raw = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.noise_sigma = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(CohortConfig::from_json(CohortConfig{}.to_json()).to_json() == CohortConfig{}.to_json());
}

TEST_CASE("cohort directory round trip") {
  CohortConfig cfg;
  cfg.n_raw = 120;
  const Cohort c = generate_cohort(11, cfg);
  const fs::path dir = fs::temp_directory_path() / "scarfcn_test_cohort";
  fs::remove_all(dir);
  save_cohort(c, dir);
  const Cohort d = load_cohort(dir);
  CHECK(cohort_patients_jsonl(d) == cohort_patients_jsonl(c));
  CHECK(d.seed == 11);
  CHECK(d.n_raw == 120);
  const auto manifest = io::read_json(dir / "manifest.json");
  CHECK(manifest.at("patients_hash").get<std::string>() ==
        io::hex64(io::fnv1a(io::read_text(dir / "patients.jsonl"))));

  // A tampered patients file no longer matches the manifest hash.
  io::write_text(dir / "patients.jsonl", io::read_text(dir / "patients.jsonl") + "\n");
  CHECK_THROWS_AS(load_cohort(dir), InputError);
  CHECK_THROWS_AS(load_cohort(dir / "missing"), IoError);
  fs::remove_all(dir);
}
