// Runs the command-line tool as a subprocess.
#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "scarfcn_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(SCARFCN_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string w(const std::string& name) { return (kWork / name).string(); }

// 50 raw parameter sets leave roughly 20 patients after filtering.
void ensure_fixture() {
  static bool done = false;
  if (done) return;
  fs::remove_all(kWork);
  REQUIRE(run("--seed 4 generate --n-raw 50 --out " + w("cohort")) == 0);
  REQUIRE(run("preprocess --in " + w("cohort") + " --out " + w("ds")) == 0);
  REQUIRE(run("preprocess --padding none --in " + w("cohort") + " --out " + w("ds_none")) == 0);
  done = true;
}

}  // namespace

TEST_CASE("CLI: usage errors exit 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("generate") == 2);
  CHECK(run("eval --model x --data y --level galaxy") == 2);
  CHECK(run("--help") == 0);
  CHECK(run("generate --p-mi 3 --out " + w("bad")) == 2);
}

TEST_CASE("CLI: generate is deterministic and writes its config") {
  ensure_fixture();
  REQUIRE(run("--seed 4 generate --n-raw 50 --out " + w("cohort2")) == 0);
  CHECK(slurp(w("cohort") + "/patients.jsonl") == slurp(w("cohort2") + "/patients.jsonl"));
  CHECK(slurp(w("cohort") + "/manifest.json") == slurp(w("cohort2") + "/manifest.json"));
  const auto cfg = nlohmann::json::parse(slurp(w("cohort") + "/run_config.json"));
  CHECK(cfg.at("command") == "generate");
  CHECK(cfg.at("global").at("seed") == 4);
  CHECK(cfg.at("args").at("n_raw") == 50);
  CHECK(fs::exists(w("ds") + "/run_config.json"));
}

TEST_CASE("CLI: p-mi 0 gives a healthy cohort and perfect-by-convention metrics") {
  REQUIRE(run("--seed 2 generate --n-raw 40 --p-mi 0 --out " + w("healthy")) == 0);
  const auto manifest = nlohmann::json::parse(slurp(w("healthy") + "/manifest.json"));
  CHECK(manifest.at("counts").at("n_scarred_segments") == 0);
}

TEST_CASE("CLI: train, eval, render") {
  ensure_fixture();
  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(run("--deterministic train --quiet --epochs 1 --data " + w("ds") + " --out " + w("m.fcns")) == 0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 60.0);
  CHECK(fs::exists(w("m.best.fcns")));
  CHECK(fs::exists(w("m.log.csv")));
  CHECK(fs::exists(w("m.config.json")));

  REQUIRE(run("--deterministic train --quiet --epochs 1 --data " + w("ds") + " --out " + w("m2.fcns")) == 0);
  CHECK(slurp(w("m.fcns")) == slurp(w("m2.fcns")));

  CHECK(run("eval --model " + w("m.fcns") + " --data " + w("ds") + " --out " + w("rep")) == 0);
  CHECK(fs::exists(w("rep") + "/report.json"));
  CHECK(run("eval --format json --level territory --model " + w("m.fcns") + " --data " + w("ds")) == 0);
  // Horizontal model against a dataset marked for no padding.
  CHECK(run("eval --model " + w("m.fcns") + " --data " + w("ds_none")) == 2);
  CHECK(run("train --quiet --epochs 1 --padding horizontal --data " + w("ds_none") + " --out " + w("x.fcns")) == 2);
  CHECK(run("eval --model " + w("missing.fcns") + " --data " + w("ds")) == 1);

  REQUIRE(run("render --model " + w("m.fcns") + " --data " + w("ds") + " --patient 0 --out " +
              w("p0.svg") + " --save-predictions " + w("p0.json")) == 0);
  REQUIRE(run("render --input " + w("p0.json") + " --out " + w("p0b.svg")) == 0);
  CHECK(slurp(w("p0.svg")) == slurp(w("p0b.svg")));
  CHECK(slurp(w("p0.svg")).find("<svg") == 0);
}

TEST_CASE("CLI: render input validation") {
  ensure_fixture();
  std::ofstream(w("short.json")) << R"({"patient_id": 1, "predicted": [0,0,0]})";
  CHECK(run("render --input " + w("short.json") + " --out " + w("s.svg")) == 2);
  std::ofstream(w("nonbin.json")) << R"({"predicted": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,5]})";
  CHECK(run("render --input " + w("nonbin.json") + " --out " + w("s.svg")) == 2);
  std::ofstream(w("one.json")) << R"({"predicted": [0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,0,0,0]})";
  REQUIRE(run("render --input " + w("one.json") + " --out " + w("a.svg")) == 0);
  REQUIRE(run("render --input " + w("one.json") + " --out " + w("b.svg")) == 0);
  const auto a = slurp(w("a.svg"));
  CHECK(a == slurp(w("b.svg")));
  CHECK(a.find("id=\"seg5\" class=\"scar\"") != std::string::npos);
  CHECK(run("render --out " + w("c.svg")) == 2);
}
