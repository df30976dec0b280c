// scarfcn: generate, preprocess, train, eval, render, ablate.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scarfcn/scarfcn.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Carries a failed library status up to main().
struct LibFailure {
  scar_status status;
  std::string message;
};

void check(scar_status st, const std::string& what) {
  if (st != SCAR_OK) throw LibFailure{st, what + ": " + scar_last_error()};
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Cohort = Handle<scar_cohort, scar_cohort_free>;
using Dataset = Handle<scar_dataset, scar_dataset_free>;
using Model = Handle<scar_model, scar_model_free>;
using Report = Handle<scar_report, scar_report_free>;

struct Globals {
  std::uint64_t seed = 42;
  int threads = 1;
  bool deterministic = false;
};

json globals_json(const Globals& g) {
  return {{"seed", g.seed}, {"threads", g.threads}, {"deterministic", g.deterministic}};
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw LibFailure{SCAR_ERR_IO, "cannot write " + path.string()};
}

void write_run_config(const fs::path& path, const std::string& command, const Globals& g,
                      json args) {
  json j = {{"command", command}, {"global", globals_json(g)}, {"args", std::move(args)},
            {"library_version", scar_version()}};
  write_file(path, j.dump(2) + "\n");
}

// Config file written beside a single-file output: model.fcns -> model.config.json
fs::path sidecar(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  p += suffix;
  return p;
}

scar_padding parse_padding(const std::string& s) {
  if (s == "horizontal") return SCAR_PADDING_HORIZONTAL;
  if (s == "none") return SCAR_PADDING_NONE;
  throw UsageError("unknown padding mode '" + s + "' (expected horizontal or none)");
}

const char* padding_str(scar_padding p) {
  switch (p) {
    case SCAR_PADDING_HORIZONTAL: return "horizontal";
    case SCAR_PADDING_NONE: return "none";
    default: return "unset";
  }
}

scar_split_part parse_part(const std::string& s) {
  if (s == "all") return SCAR_SPLIT_ALL;
  if (s == "train") return SCAR_SPLIT_TRAIN;
  if (s == "val") return SCAR_SPLIT_VAL;
  if (s == "test") return SCAR_SPLIT_TEST;
  throw UsageError("unknown split '" + s + "' (expected all, train, val or test)");
}

json split_json(const scar_split_config& s) {
  return {{"test_fraction", s.test_fraction},
          {"val_fraction_of_dev", s.val_fraction_of_dev},
          {"scale", s.scale},
          {"seed", s.seed}};
}

// Row names as they appear in report text, per --level choice.
std::vector<std::string> text_rows(const std::string& level) {
  if (level == "patient") return {"Patient"};
  if (level == "territory") return {"LAD", "LCx", "RCA"};
  if (level == "segment") return {"Segments"};
  return {};
}

std::vector<std::string> json_rows(const std::string& level) {
  if (level == "patient") return {"patient"};
  if (level == "territory") return {"LAD", "LCx", "RCA"};
  if (level == "segment") return {"segment"};
  return {};
}

bool starts_with_any(const std::string& line, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (line.rfind(n + " ", 0) == 0) return true;
  }
  return false;
}

std::string filter_text(const std::string& text, const std::string& level) {
  if (level == "all") return text;
  const auto keep = text_rows(level);
  const std::vector<std::string> all{"Patient", "LAD", "LCx", "RCA", "Segments"};
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (starts_with_any(line, all) && !starts_with_any(line, keep)) continue;
    out << line << "\n";
  }
  return out.str();
}

json filter_json(json report, const std::string& level) {
  if (level == "all") return report;
  const auto keep = json_rows(level);
  auto pick = [&](const json& levels) {
    json out = json::array();
    for (const auto& l : levels) {
      if (std::find(keep.begin(), keep.end(), l.at("level").get<std::string>()) != keep.end()) {
        out.push_back(l);
      }
    }
    return out;
  };
  for (auto& c : report["cells"]) {
    c["levels"] = pick(c["levels"]);
    for (auto& s : c["per_seed"]) s["levels"] = pick(s["levels"]);
  }
  report["rows"] = keep;
  return report;
}

void print_epoch(int32_t epoch, double train_loss, double val_loss, double val_bacc, void*) {
  std::fprintf(stderr, "epoch %3d  train_loss %.6f  val_loss %.6f  val_bacc_segment %.4f\n",
               epoch, train_loss, val_loss, val_bacc);
}

// ------------------------------------------------------------------ commands

struct GenerateArgs {
  int n_raw = 7000;
  std::string out;
  double p_mi = 0.51;
  double noise_sigma = 0.0;
  double min_activation_delay = 0.035;
};

int cmd_generate(const Globals& g, const GenerateArgs& a) {
  scar_cohort_config cfg;
  scar_cohort_config_default(&cfg);
  cfg.seed = g.seed;
  cfg.n_raw = a.n_raw;
  cfg.p_mi = a.p_mi;
  cfg.noise_sigma = a.noise_sigma;
  cfg.min_activation_delay = a.min_activation_delay;
  cfg.threads = g.threads;
  Cohort c;
  check(scar_cohort_generate(&cfg, c.out()), "generate");
  check(scar_cohort_save(c.get(), a.out.c_str()), "generate");
  write_run_config(fs::path(a.out) / "run_config.json", "generate", g,
                   {{"n_raw", a.n_raw},
                    {"out", a.out},
                    {"p_mi", a.p_mi},
                    {"noise_sigma", a.noise_sigma},
                    {"min_activation_delay", a.min_activation_delay}});
  std::printf("patients: %d of %d accepted\nscarred segment fraction: %.4f\n",
              scar_cohort_size(c.get()), scar_cohort_raw_count(c.get()),
              scar_cohort_scarred_fraction(c.get()));
  return kExitOk;
}

struct PreprocessArgs {
  std::string in, out;
  int points = 500;
  double systole_frac = 0.35;
  std::string padding;
};

int cmd_preprocess(const Globals& g, const PreprocessArgs& a) {
  scar_resample_config cfg;
  scar_resample_config_default(&cfg);
  cfg.n_points = a.points;
  cfg.systole_fraction = a.systole_frac;
  cfg.threads = g.threads;
  if (!a.padding.empty()) cfg.padding = parse_padding(a.padding);
  Cohort c;
  check(scar_cohort_load(a.in.c_str(), c.out()), "preprocess");
  Dataset d;
  check(scar_preprocess(c.get(), &cfg, d.out()), "preprocess");
  check(scar_dataset_save(d.get(), a.out.c_str()), "preprocess");
  json args = {{"in", a.in}, {"out", a.out}, {"points", a.points}, {"systole_frac", a.systole_frac}};
  if (!a.padding.empty()) args["padding"] = a.padding;
  write_run_config(fs::path(a.out) / "run_config.json", "preprocess", g, args);
  std::printf("patients: %d\npoints per trace: %d\nsource hash: %s\n", scar_dataset_size(d.get()),
              scar_dataset_points(d.get()), scar_dataset_source_hash(d.get()));
  return kExitOk;
}

struct TrainArgs {
  std::string data, out, best_out, log;
  double scale = 1.0;
  std::string padding;
  int epochs = 50;
  int batch = 32;
  double lr = 0.001;
  double pos_weight = 10.0;
  std::string optimizer = "adam";
  std::uint64_t split_seed = 0;
  bool quiet = false;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  Dataset d;
  check(scar_dataset_load(a.data.c_str(), d.out()), "train");

  scar_split_config split;
  scar_split_config_default(&split);
  split.scale = a.scale;
  split.seed = a.split_seed;

  scar_train_config cfg;
  scar_train_config_default(&cfg);
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr = a.lr;
  cfg.pos_weight = a.pos_weight;
  if (!a.padding.empty()) {
    cfg.padding = parse_padding(a.padding);
  } else if (scar_dataset_padding(d.get()) != SCAR_PADDING_UNSET) {
    cfg.padding = scar_dataset_padding(d.get());
  }
  if (a.optimizer == "adam") {
    cfg.optimizer = SCAR_OPTIMIZER_ADAM;
  } else if (a.optimizer == "sgd") {
    cfg.optimizer = SCAR_OPTIMIZER_SGD;
  } else {
    throw UsageError("unknown optimizer '" + a.optimizer + "' (expected adam or sgd)");
  }
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  cfg.deterministic = g.deterministic ? 1 : 0;

  const fs::path out(a.out);
  const fs::path best = a.best_out.empty() ? sidecar(out, ".best.fcns") : fs::path(a.best_out);
  const fs::path log = a.log.empty() ? sidecar(out, ".log.csv") : fs::path(a.log);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());

  Model final_model, best_model;
  check(scar_train(d.get(), &split, &cfg, log.c_str(), a.quiet ? nullptr : print_epoch, nullptr,
                   final_model.out(), best_model.out()),
        "train");
  check(scar_model_save(final_model.get(), out.c_str()), "train");
  check(scar_model_save(best_model.get(), best.c_str()), "train");

  write_run_config(sidecar(out, ".config.json"), "train", g,
                   {{"data", a.data},
                    {"out", a.out},
                    {"best_out", best.string()},
                    {"log", log.string()},
                    {"scale", a.scale},
                    {"padding", padding_str(cfg.padding)},
                    {"epochs", a.epochs},
                    {"batch", a.batch},
                    {"lr", a.lr},
                    {"pos_weight", a.pos_weight},
                    {"optimizer", a.optimizer},
                    {"split", split_json(split)}});

  Report r;
  check(scar_evaluate(final_model.get(), d.get(), &split, SCAR_SPLIT_VAL, g.threads, r.out()),
        "train");
  std::printf("final model, validation split:\n%s", scar_report_text(r.get()));
  return kExitOk;
}

struct EvalArgs {
  std::string model, data, level = "all", format = "text", split = "test", out;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const scar_split_part part = parse_part(a.split);
  Model m;
  check(scar_model_load(a.model.c_str(), m.out()), "eval");
  Dataset d;
  check(scar_dataset_load(a.data.c_str(), d.out()), "eval");
  scar_split_config split;
  if (scar_model_split_config(m.get(), &split) != SCAR_OK) scar_split_config_default(&split);
  Report r;
  check(scar_evaluate(m.get(), d.get(), &split, part, g.threads, r.out()), "eval");
  if (!a.out.empty()) {
    check(scar_report_save(r.get(), a.out.c_str()), "eval");
    write_run_config(fs::path(a.out) / "run_config.json", "eval", g,
                     {{"model", a.model},
                      {"data", a.data},
                      {"level", a.level},
                      {"format", a.format},
                      {"split", a.split},
                      {"out", a.out}});
  }
  if (a.format == "json") {
    std::cout << filter_json(json::parse(scar_report_json(r.get())), a.level).dump(2) << "\n";
  } else {
    std::cout << filter_text(scar_report_text(r.get()), a.level);
  }
  return kExitOk;
}

struct RenderArgs {
  std::string input, model, data, out, save_predictions;
  int patient = -1;
};

struct Prediction {
  int patient_id = -1;
  std::vector<int32_t> predicted;
  std::optional<std::vector<double>> scores;
  std::optional<std::vector<int32_t>> labels;
};

Prediction read_prediction(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LibFailure{SCAR_ERR_IO, "cannot read " + path};
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw UsageError(path + ": invalid JSON: " + e.what());
  }
  Prediction p;
  auto need18 = [&](const char* key) {
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != SCAR_SEGMENTS) {
      throw UsageError(path + ": '" + key + "' must hold " + std::to_string(SCAR_SEGMENTS) +
                       " values, got " + std::to_string(v.is_array() ? v.size() : 0));
    }
    return v;
  };
  if (!j.contains("predicted")) throw UsageError(path + ": missing 'predicted'");
  for (const auto& v : need18("predicted")) {
    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
      throw UsageError(path + ": 'predicted' values must be 0 or 1");
    }
    p.predicted.push_back(v.get<int32_t>());
  }
  if (j.contains("scores")) p.scores = need18("scores").get<std::vector<double>>();
  if (j.contains("labels")) p.labels = need18("labels").get<std::vector<int32_t>>();
  if (j.contains("patient_id")) p.patient_id = j.at("patient_id").get<int>();
  return p;
}

int cmd_render(const Globals& g, const RenderArgs& a) {
  Prediction p;
  if (!a.input.empty()) {
    if (!a.model.empty() || !a.data.empty()) throw UsageError("--input excludes --model/--data");
    p = read_prediction(a.input);
  } else {
    if (a.model.empty() || a.data.empty() || a.patient < 0) {
      throw UsageError("render needs --input FILE or --model, --data and --patient");
    }
    Model m;
    check(scar_model_load(a.model.c_str(), m.out()), "render");
    Dataset d;
    check(scar_dataset_load(a.data.c_str(), d.out()), "render");
    const int32_t row = scar_dataset_find(d.get(), a.patient);
    if (row < 0) throw UsageError("patient " + std::to_string(a.patient) + " not in dataset");
    p.patient_id = a.patient;
    p.predicted.assign(SCAR_SEGMENTS, 0);
    p.scores = std::vector<double>(SCAR_SEGMENTS);
    p.labels = std::vector<int32_t>(SCAR_SEGMENTS);
    check(scar_model_predict(m.get(), d.get(), row, p.predicted.data(), p.scores->data()), "render");
    check(scar_dataset_patient(d.get(), row, nullptr, p.labels->data()), "render");
  }
  if (!a.save_predictions.empty()) {
    json j = {{"patient_id", p.patient_id}, {"predicted", p.predicted}};
    if (p.labels) j["labels"] = *p.labels;
    if (p.scores) j["scores"] = *p.scores;
    write_file(a.save_predictions, j.dump(2) + "\n");
  }
  const std::string title = p.patient_id >= 0 ? "Patient " + std::to_string(p.patient_id) : "";
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  check(scar_render_svg(p.predicted.data(), p.scores ? p.scores->data() : nullptr,
                        p.labels ? p.labels->data() : nullptr, title.c_str(), out.c_str()),
        "render");
  json args = {{"out", a.out}};
  if (!a.input.empty()) args["input"] = a.input;
  if (!a.model.empty()) args.update({{"model", a.model}, {"data", a.data}, {"patient", a.patient}});
  if (!a.save_predictions.empty()) args["save_predictions"] = a.save_predictions;
  write_run_config(sidecar(out, ".config.json"), "render", g, args);
  return kExitOk;
}

struct AblateArgs {
  std::string data, out, grid;
  std::vector<double> scales{0.5, 0.75, 1.0};
  std::vector<std::string> paddings{"none", "horizontal"};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int epochs = 50;
  std::uint64_t split_seed = 0;
};

int cmd_ablate(const Globals& g, const AblateArgs& a) {
  json grid;
  if (!a.grid.empty()) {
    std::ifstream f(a.grid);
    if (!f) throw LibFailure{SCAR_ERR_IO, "cannot read " + a.grid};
    try {
      f >> grid;
    } catch (const json::exception& e) {
      throw UsageError(a.grid + ": invalid JSON: " + e.what());
    }
  } else {
    for (const auto& p : a.paddings) parse_padding(p);
    scar_train_config t;
    scar_train_config_default(&t);
    grid = {{"scales", a.scales},
            {"paddings", a.paddings},
            {"seeds", a.seeds},
            {"train",
             {{"epochs", a.epochs},
              {"batch_size", t.batch_size},
              {"lr", t.lr},
              {"pos_weight", t.pos_weight},
              {"threads", g.threads},
              {"deterministic", g.deterministic}}},
            {"split", {{"seed", a.split_seed}}}};
  }
  Dataset d;
  check(scar_dataset_load(a.data.c_str(), d.out()), "ablate");
  Report r;
  check(scar_run_ablation(d.get(), grid.dump().c_str(), g.threads, r.out()), "ablate");
  check(scar_report_save(r.get(), a.out.c_str()), "ablate");
  write_run_config(fs::path(a.out) / "run_config.json", "ablate", g,
                   {{"data", a.data}, {"out", a.out}, {"grid", grid}});
  std::cout << scar_report_text(r.get());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scar localisation from segmental strain with a fully convolutional network"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(
      CLI::PositiveNumber);
  app.add_flag("--deterministic", g.deterministic, "Reproducible byte output");
  app.set_version_flag("--version", std::string(scar_version()));

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Generate a surrogate cohort");
  gen->add_option("--n-raw", ga.n_raw, "Parameter sets before filtering")->capture_default_str();
  gen->add_option("--out", ga.out, "Output directory")->required();
  gen->add_option("--p-mi", ga.p_mi, "Probability of infarction")->capture_default_str();
  gen->add_option("--noise-sigma", ga.noise_sigma, "Trace noise, strain %")->capture_default_str();
  gen->add_option("--min-activation-delay", ga.min_activation_delay,
                  "Minimum septal-to-lateral activation delay, s")
      ->capture_default_str();

  PreprocessArgs pa;
  auto* pre = app.add_subcommand("preprocess", "Resample cohort traces");
  pre->add_option("--in", pa.in, "Cohort directory")->required();
  pre->add_option("--out", pa.out, "Dataset directory")->required();
  pre->add_option("--points", pa.points, "Points per trace")->capture_default_str();
  pre->add_option("--systole-frac", pa.systole_frac, "Fraction of points before AVC")
      ->capture_default_str();
  pre->add_option("--padding", pa.padding, "Record a padding mode: horizontal|none");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the network");
  tr->add_option("--data", ta.data, "Dataset directory")->required();
  tr->add_option("--out", ta.out, "Checkpoint path")->required();
  tr->add_option("--best-out", ta.best_out, "Best-validation checkpoint path");
  tr->add_option("--log", ta.log, "Training log CSV path");
  tr->add_option("--scale", ta.scale, "Fraction of train/val data used")->capture_default_str();
  tr->add_option("--padding", ta.padding, "horizontal|none (default: dataset's, else horizontal)");
  tr->add_option("--epochs", ta.epochs)->capture_default_str();
  tr->add_option("--batch", ta.batch)->capture_default_str();
  tr->add_option("--lr", ta.lr)->capture_default_str();
  tr->add_option("--pos-weight", ta.pos_weight)->capture_default_str();
  tr->add_option("--optimizer", ta.optimizer, "adam|sgd")->capture_default_str();
  tr->add_option("--split-seed", ta.split_seed)->capture_default_str();
  tr->add_flag("--quiet", ta.quiet, "No per-epoch progress");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--model", ea.model, "Checkpoint path")->required();
  ev->add_option("--data", ea.data, "Dataset directory")->required();
  ev->add_option("--level", ea.level)
      ->check(CLI::IsMember({"all", "segment", "territory", "patient"}))
      ->capture_default_str();
  ev->add_option("--format", ea.format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  ev->add_option("--split", ea.split, "all|train|val|test (split recorded in the checkpoint)")
      ->capture_default_str();
  ev->add_option("--out", ea.out, "Also write report.json/report.txt to this directory");

  RenderArgs ra;
  auto* re = app.add_subcommand("render", "Bull's-eye SVG of one prediction");
  re->add_option("--input", ra.input, "predictions.json");
  re->add_option("--model", ra.model, "Checkpoint path");
  re->add_option("--data", ra.data, "Dataset directory");
  re->add_option("--patient", ra.patient, "Patient id");
  re->add_option("--out", ra.out, "SVG path")->required();
  re->add_option("--save-predictions", ra.save_predictions, "Write predictions.json");

  AblateArgs aa;
  auto* ab = app.add_subcommand("ablate", "Padding and data-scale ablation");
  ab->add_option("--data", aa.data, "Dataset directory")->required();
  ab->add_option("--out", aa.out, "Report directory")->required();
  ab->add_option("--grid", aa.grid, "Grid JSON file (overrides the flags below)");
  ab->add_option("--scales", aa.scales)->capture_default_str();
  ab->add_option("--paddings", aa.paddings)->capture_default_str();
  ab->add_option("--seeds", aa.seeds)->capture_default_str();
  ab->add_option("--epochs", aa.epochs)->capture_default_str();
  ab->add_option("--split-seed", aa.split_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(g, ga);
    if (*pre) return cmd_preprocess(g, pa);
    if (*tr) return cmd_train(g, ta);
    if (*ev) return cmd_eval(g, ea);
    if (*re) return cmd_render(g, ra);
    if (*ab) return cmd_ablate(g, aa);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const LibFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.status == SCAR_ERR_CONFIG ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
