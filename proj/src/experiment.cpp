#include "scarfcn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "scarfcn/error.hpp"
#include "scarfcn/io_util.hpp"
#include "scarfcn/random.hpp"

namespace scarfcn {

namespace {

using nlohmann::json;

constexpr int kEvalChunk = 64;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected adam or sgd)");
}

void check_rows(const Dataset& ds, std::span<const int> rows, const char* what) {
  for (int r : rows) {
    if (r < 0 || r >= ds.size()) {
      throw InputError(std::string(what) + " row " + std::to_string(r) + " outside dataset of " +
                       std::to_string(ds.size()));
    }
  }
}

template <class Fn>
void run_chunks(int n_chunks, int threads, Fn&& fn) {
  const int workers = std::clamp(threads, 1, std::max(1, n_chunks));
  if (workers == 1) {
    for (int c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int c = w; c < n_chunks; c += workers) fn(c);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json confusion_json(const ConfusionMatrix& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

json metrics_json(const LevelMetrics& m, bool with_confusion) {
  json j = {{"level", std::string(level_name(m.level))},
            {"accuracy", m.accuracy},
            {"balanced_accuracy", m.balanced_accuracy},
            {"sensitivity", m.sensitivity},
            {"specificity", m.specificity}};
  if (with_confusion) j["confusion"] = confusion_json(m.confusion);
  return j;
}

std::string level_row_name(Level l) {
  switch (l) {
    case Level::Patient: return "Patient";
    case Level::LAD: return "LAD";
    case Level::LCx: return "LCx";
    case Level::RCA: return "RCA";
    case Level::Segment: return "Segments";
  }
  return "?";
}

}  // namespace

// ---------------------------------------------------------------- splits

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
  if (!(val_fraction_of_dev > 0.0 && val_fraction_of_dev < 1.0)) {
    throw ConfigError("val_fraction_of_dev must be in (0, 1)");
  }
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("scale must be in (0, 1]");
  if (max_stratum_key < 1) throw ConfigError("max_stratum_key must be >= 1");
  if (min_stratum_size < 1) throw ConfigError("min_stratum_size must be >= 1");
}

json SplitSpec::to_json() const {
  return {{"dev_fraction", 1.0 - test_fraction},
          {"test_fraction", test_fraction},
          {"train_fraction_of_dev", 1.0 - val_fraction_of_dev},
          {"val_fraction_of_dev", val_fraction_of_dev},
          {"scale", scale},
          {"seed", seed},
          {"max_stratum_key", max_stratum_key},
          {"min_stratum_size", min_stratum_size}};
}

SplitSpec SplitSpec::from_json(const json& j) {
  SplitSpec s;
  s.test_fraction = j.value("test_fraction", s.test_fraction);
  s.val_fraction_of_dev = j.value("val_fraction_of_dev", s.val_fraction_of_dev);
  s.scale = j.value("scale", s.scale);
  s.seed = j.value("seed", s.seed);
  s.max_stratum_key = j.value("max_stratum_key", s.max_stratum_key);
  s.min_stratum_size = j.value("min_stratum_size", s.min_stratum_size);
  return s;
}

Splits stratified_split(std::span<const LabelRow> labels, const SplitSpec& spec) {
  spec.validate();
  if (labels.empty()) throw InputError("cannot split an empty cohort");
  std::map<int, std::vector<int>> strata;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int k = 0;
    for (int v : labels[i]) k += v;
    strata[std::min(k, spec.max_stratum_key)].push_back(static_cast<int>(i));
  }

  Splits out;
  // Merge undersized strata into the nearest smaller key (larger if none).
  bool merged = true;
  while (merged && strata.size() > 1) {
    merged = false;
    for (auto it = strata.begin(); it != strata.end(); ++it) {
      if (static_cast<int>(it->second.size()) >= spec.min_stratum_size) continue;
      auto target = it == strata.begin() ? std::next(it) : std::prev(it);
      out.warnings.push_back("stratum " + std::to_string(it->first) + " has " +
                             std::to_string(it->second.size()) + " patients; merged into stratum " +
                             std::to_string(target->first));
      auto& dst = target->second;
      dst.insert(dst.end(), it->second.begin(), it->second.end());
      std::sort(dst.begin(), dst.end());
      strata.erase(it);
      merged = true;
      break;
    }
  }

  for (auto& [key, ids] : strata) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(key)));
    rng.shuffle(ids.begin(), ids.end());
    const auto n = static_cast<long>(ids.size());
    const long n_test = std::lround(spec.test_fraction * static_cast<double>(n));
    const long n_dev = n - n_test;
    const long n_val = std::lround(spec.val_fraction_of_dev * static_cast<double>(n_dev));
    const long n_train = n_dev - n_val;
    const long keep_val = std::lround(spec.scale * static_cast<double>(n_val));
    const long keep_train = std::lround(spec.scale * static_cast<double>(n_train));
    auto at = ids.begin();
    out.test.insert(out.test.end(), at, at + n_test);
    at += n_test;
    out.val.insert(out.val.end(), at, at + keep_val);
    at += n_val;
    out.train.insert(out.train.end(), at, at + keep_train);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---------------------------------------------------------------- metrics

std::string_view level_name(Level l) {
  switch (l) {
    case Level::Patient: return "patient";
    case Level::LAD: return "LAD";
    case Level::LCx: return "LCx";
    case Level::RCA: return "RCA";
    case Level::Segment: return "segment";
  }
  return "?";
}

Level parse_level(std::string_view s) {
  for (Level l : kLevels) {
    if (s == level_name(l)) return l;
  }
  throw ConfigError("unknown level '" + std::string(s) + "'");
}

void ConfusionMatrix::add(int predicted, int actual) {
  if (actual) {
    (predicted ? tp : fn) += 1;
  } else {
    (predicted ? fp : tn) += 1;
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

LevelMetrics compute_metrics(Level level, const ConfusionMatrix& cm) {
  LevelMetrics m;
  m.level = level;
  m.confusion = cm;
  const auto ratio = [](std::int64_t num, std::int64_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(cm.tp + cm.tn, cm.total());
  m.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  m.specificity = ratio(cm.tn, cm.tn + cm.fp);
  m.balanced_accuracy = (m.sensitivity + m.specificity) / 2.0;
  return m;
}

LevelDecisions aggregate_predictions(const LabelRow& segments, const TerritoryMap& map) {
  LevelDecisions d;
  d.segment = segments;
  for (int s = 1; s <= kSegments; ++s) {
    if (segments[s - 1]) {
      d.territory[static_cast<int>(map.territory_of(s))] = 1;
      d.patient = 1;
    }
  }
  return d;
}

std::vector<LevelMetrics> Evaluation::metrics() const {
  std::vector<LevelMetrics> out;
  for (Level l : kLevels) out.push_back(metrics(l));
  return out;
}

LevelMetrics Evaluation::metrics(Level l) const {
  return compute_metrics(l, confusion[static_cast<int>(l)]);
}

Evaluation evaluate_predictions(std::span<const LabelRow> predicted, std::span<const LabelRow> labels,
                                const TerritoryMap& map) {
  if (predicted.size() != labels.size()) {
    throw InputError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(labels.size()) + " label rows");
  }
  Evaluation ev;
  ev.n_patients = static_cast<int>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const LevelDecisions p = aggregate_predictions(predicted[i], map);
    const LevelDecisions a = aggregate_predictions(labels[i], map);
    ev.confusion[static_cast<int>(Level::Patient)].add(p.patient, a.patient);
    ev.confusion[static_cast<int>(Level::LAD)].add(p.territory[0], a.territory[0]);
    ev.confusion[static_cast<int>(Level::LCx)].add(p.territory[1], a.territory[1]);
    ev.confusion[static_cast<int>(Level::RCA)].add(p.territory[2], a.territory[2]);
    for (int s = 0; s < kSegments; ++s) {
      ev.confusion[static_cast<int>(Level::Segment)].add(p.segment[s], a.segment[s]);
    }
  }
  return ev;
}

std::vector<SegmentPrediction> predict_rows(const FcnParameters& params, const Dataset& ds,
                                            std::span<const int> rows, int threads) {
  check_rows(ds, rows, "prediction");
  if (params.time_points() != ds.n_points()) {
    throw ShapeError("model expects " + std::to_string(params.time_points()) +
                     " time points, dataset has " + std::to_string(ds.n_points()));
  }
  std::vector<SegmentPrediction> out(rows.size());
  const int n = static_cast<int>(rows.size());
  const int chunks = (n + kEvalChunk - 1) / kEvalChunk;
  run_chunks(chunks, threads, [&](int c) {
    const int b = c * kEvalChunk;
    const int e = std::min(n, b + kEvalChunk);
    const auto sub = rows.subspan(static_cast<std::size_t>(b), static_cast<std::size_t>(e - b));
    const BatchTensor logits = fcn_forward(params, build_batch(ds, sub, params.padding_mode));
    for (int i = 0; i < e - b; ++i) {
      out[static_cast<std::size_t>(b + i)] = predictions_from_logits(logits.item_tensor(i), ds.grid_map);
    }
  });
  return out;
}

Evaluation evaluate_model(const FcnParameters& params, const Dataset& ds, std::span<const int> rows,
                          const TerritoryMap& map, int threads) {
  const auto preds = predict_rows(params, ds, rows, threads);
  std::vector<LabelRow> p, a;
  p.reserve(rows.size());
  a.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p.push_back(preds[i].predicted);
    a.push_back(ds.labels[static_cast<std::size_t>(rows[i])]);
  }
  return evaluate_predictions(p, a, map);
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (!(pos_weight > 0.0) || !std::isfinite(pos_weight)) throw ConfigError("pos_weight must be > 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"pos_weight", pos_weight},
          {"padding_mode", std::string(padding_name(padding))},
          {"optimizer", std::string(optimizer_name(optimizer))},
          {"seed", seed},
          {"deterministic", deterministic}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.pos_weight = j.value("pos_weight", c.pos_weight);
  if (j.contains("padding_mode")) c.padding = parse_padding(j.at("padding_mode").get<std::string>());
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.deterministic = j.value("deterministic", c.deterministic);
  return c;
}

double dataset_loss(const FcnParameters& params, const Dataset& ds, std::span<const int> rows,
                    double pos_weight) {
  if (rows.empty()) return std::nan("");
  double total = 0.0;
  const int n = static_cast<int>(rows.size());
  for (int b = 0; b < n; b += kEvalChunk) {
    const int e = std::min(n, b + kEvalChunk);
    const auto sub = rows.subspan(static_cast<std::size_t>(b), static_cast<std::size_t>(e - b));
    const BatchTensor logits = fcn_forward(params, build_batch(ds, sub, params.padding_mode));
    const BatchTensor targets = build_targets(ds, sub);
    total += nn::weighted_bce_logits(logits.data(), targets.data(), pos_weight).loss * (e - b);
  }
  return total / n;
}

TrainResult train(const Dataset& ds, const Splits& splits, const TrainConfig& cfg,
                  const SplitSpec& split, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (splits.train.empty()) throw ConfigError("training split is empty");
  check_rows(ds, splits.train, "train");
  check_rows(ds, splits.val, "validation");
  if (ds.padding_mode && *ds.padding_mode != cfg.padding) {
    throw ConfigError("dataset is marked for " + std::string(padding_name(*ds.padding_mode)) +
                      " padding but training requested " + std::string(padding_name(cfg.padding)));
  }

  FcnParameters params = make_fcn(cfg.padding, ds.n_points(), cfg.seed);
  params.train_config = cfg.to_json();
  params.train_config["split"] = split.to_json();
  params.train_config["dataset_hash"] = ds.source_hash;
  params.created_unix =
      cfg.deterministic ? 0
                        : std::chrono::duration_cast<std::chrono::seconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();

  std::array<nn::AdamState, 8> states;
  const nn::AdamConfig adam{cfg.lr};
  std::int64_t step = 0;

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  result.best_params = params;

  std::vector<int> order = splits.train;
  const int n = static_cast<int>(order.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (int b = 0, batch_index = 0; b < n; b += cfg.batch_size, ++batch_index) {
      const int e = std::min(n, b + cfg.batch_size);
      const auto rows = std::span<const int>(order).subspan(static_cast<std::size_t>(b),
                                                            static_cast<std::size_t>(e - b));
      ForwardCache cache;
      const BatchTensor logits = fcn_forward(params, build_batch(ds, rows, cfg.padding), &cache);
      const BatchTensor targets = build_targets(ds, rows);
      nn::LossResult loss = nn::weighted_bce_logits(logits.data(), targets.data(), cfg.pos_weight);
      if (!std::isfinite(loss.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
      loss_sum += loss.loss * (e - b);
      BatchTensor dlogits(e - b, logits.item_shape());
      std::copy(loss.grad.begin(), loss.grad.end(), dlogits.data().begin());
      const FcnGradients grads = fcn_backward(params, cache, dlogits);

      ++step;
      for (int l = 0; l < 4; ++l) {
        auto& layer = params.layers[l];
        const std::string base = "layer" + std::to_string(l + 1);
        try {
          if (cfg.optimizer == OptimizerKind::Adam) {
            nn::adam_step(layer.weights, grads.layers[l].weights, states[2 * l], adam, step,
                          base + ".weights");
            nn::adam_step(layer.bias, grads.layers[l].bias, states[2 * l + 1], adam, step,
                          base + ".bias");
          } else {
            nn::sgd_step(layer.weights, grads.layers[l].weights, cfg.lr, base + ".weights");
            nn::sgd_step(layer.bias, grads.layers[l].bias, cfg.lr, base + ".bias");
          }
        } catch (const TrainingError& err) {
          throw TrainingError(std::string(err.what()) + " (epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batch_index) + ")");
        }
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / n;
    log.val_loss = dataset_loss(params, ds, splits.val, cfg.pos_weight);
    log.val_balanced_accuracy_segment =
        splits.val.empty()
            ? std::nan("")
            : evaluate_model(params, ds, splits.val, TerritoryMap::standard(), cfg.threads)
                  .metrics(Level::Segment)
                  .balanced_accuracy;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.val_loss < best_val) {
      best_val = log.val_loss;
      result.best_params = params;
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch == 0) {
    result.best_params = params;
    result.best_epoch = cfg.epochs;
  }
  result.final_params = std::move(params);
  return result;
}

std::string training_log_csv(std::span<const EpochLog> log) {
  std::string out = "epoch,train_loss,val_loss,val_balanced_accuracy_segment\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + fmt("%.17g", e.train_loss) + "," +
           fmt("%.17g", e.val_loss) + "," + fmt("%.17g", e.val_balanced_accuracy_segment) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- reports

std::vector<LevelMetrics> ReportCell::median() const {
  std::vector<LevelMetrics> out;
  for (Level l : kLevels) {
    std::vector<double> acc, bal, sen, spe;
    for (const auto& ev : per_seed) {
      const LevelMetrics m = ev.metrics(l);
      acc.push_back(m.accuracy);
      bal.push_back(m.balanced_accuracy);
      sen.push_back(m.sensitivity);
      spe.push_back(m.specificity);
    }
    LevelMetrics m;
    m.level = l;
    if (per_seed.size() == 1) m.confusion = per_seed.front().confusion[static_cast<int>(l)];
    m.accuracy = median_of(acc);
    m.balanced_accuracy = median_of(bal);
    m.sensitivity = median_of(sen);
    m.specificity = median_of(spe);
    out.push_back(m);
  }
  return out;
}

json Report::to_json() const {
  json cells_j = json::array();
  for (const auto& c : cells) {
    json per_seed = json::array();
    for (std::size_t i = 0; i < c.per_seed.size(); ++i) {
      json levels = json::array();
      for (const auto& m : c.per_seed[i].metrics()) levels.push_back(metrics_json(m, true));
      per_seed.push_back({{"seed", i < c.seeds.size() ? c.seeds[i] : 0}, {"levels", levels}});
    }
    json median = json::array();
    for (const auto& m : c.median()) median.push_back(metrics_json(m, c.per_seed.size() == 1));
    cells_j.push_back({{"padding_mode", std::string(padding_name(c.padding))},
                       {"scale", c.scale},
                       {"split", c.split_name},
                       {"n_patients", c.per_seed.empty() ? 0 : c.per_seed.front().n_patients},
                       {"seeds", c.seeds},
                       {"levels", median},
                       {"per_seed", per_seed}});
  }
  return {{"columns", {"accuracy", "balanced_accuracy", "sensitivity", "specificity"}},
          {"rows", {"patient", "LAD", "LCx", "RCA", "segment"}},
          {"cells", cells_j},
          {"territory_map", territory_map.to_json()},
          {"conventions",
           {{"zero_denominator", "recall of a class with no members is 1.0"},
            {"aggregation", "territory = OR of its segments; patient = OR of all segments"},
            {"multi_seed", "levels hold the per-metric median across seeds"}}},
          {"reference",
           {{"description",
             "CircAdapt virtual cohort, 50% scale, 305 test patients: correct segments"},
            {"none", 5330},
            {"horizontal", 5355},
            {"total", 5490}}}};
}

std::string Report::to_text() const {
  std::ostringstream out;
  for (const auto& c : cells) {
    out << "Padding: " << padding_name(c.padding) << " | scale: " << fmt("%.2f", c.scale)
        << " | split: " << c.split_name << " | patients: "
        << (c.per_seed.empty() ? 0 : c.per_seed.front().n_patients) << " | seeds:";
    for (auto s : c.seeds) out << ' ' << s;
    if (c.seeds.size() > 1) out << " (median)";
    out << "\n";
    const bool counts = c.per_seed.size() == 1;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %9s %18s %12s %12s", "Level", "Accuracy",
                  "Balanced Accuracy", "Sensitivity", "Specificity");
    out << line;
    if (counts) {
      std::snprintf(line, sizeof line, " %6s %6s %6s %6s", "TP", "FN", "FP", "TN");
      out << line;
    }
    out << "\n";
    for (const auto& m : c.median()) {
      std::snprintf(line, sizeof line, "%-10s %9.4f %18.4f %12.4f %12.4f",
                    level_row_name(m.level).c_str(), m.accuracy, m.balanced_accuracy,
                    m.sensitivity, m.specificity);
      out << line;
      if (counts) {
        std::snprintf(line, sizeof line, " %6lld %6lld %6lld %6lld",
                      static_cast<long long>(m.confusion.tp), static_cast<long long>(m.confusion.fn),
                      static_cast<long long>(m.confusion.fp), static_cast<long long>(m.confusion.tn));
        out << line;
      }
      out << "\n";
    }
    if (!counts && !c.per_seed.empty()) {
      out << "Correct segments per seed:";
      for (const auto& ev : c.per_seed) {
        const auto& cm = ev.confusion[static_cast<int>(Level::Segment)];
        out << ' ' << (cm.tp + cm.tn) << '/' << cm.total();
      }
      out << "\n";
    }
    out << "\n";
  }
  out << "Territories:";
  for (Territory t : kTerritories) {
    out << ' ' << territory_name(t) << " {";
    const auto& segs = territory_map.segments(t);
    for (std::size_t i = 0; i < segs.size(); ++i) out << (i ? "," : "") << segs[i];
    out << "}";
  }
  out << "\n";
  out << "Conventions: recall of a class with no members is reported as 1.0; a territory or "
         "patient is positive if any of its segments is.\n";
  out << "Reference (CircAdapt virtual cohort, 50% scale, 305 test patients): 5330/5490 correct "
         "segments without padding, 5355/5490 with horizontal padding.\n";
  return out.str();
}

void save_report(const Report& report, const std::filesystem::path& dir) {
  io::ensure_dir(dir);
  io::write_json(dir / "report.json", report.to_json());
  io::write_text(dir / "report.txt", report.to_text());
}

json AblationGrid::to_json() const {
  json pads = json::array();
  for (auto p : paddings) pads.push_back(std::string(padding_name(p)));
  return {{"scales", scales}, {"paddings", pads}, {"seeds", seeds},
          {"train", train.to_json()}, {"split", split.to_json()}};
}

AblationGrid AblationGrid::from_json(const json& j) {
  AblationGrid g;
  if (j.contains("scales")) g.scales = j.at("scales").get<std::vector<double>>();
  if (j.contains("paddings")) {
    g.paddings.clear();
    for (const auto& p : j.at("paddings")) g.paddings.push_back(parse_padding(p.get<std::string>()));
  }
  if (j.contains("seeds")) g.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("train")) g.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("split")) g.split = SplitSpec::from_json(j.at("split"));
  return g;
}

Report run_ablation(const Dataset& ds, const AblationGrid& grid, const TerritoryMap& map,
                    int threads) {
  if (grid.scales.empty() || grid.paddings.empty() || grid.seeds.empty()) {
    throw ConfigError("ablation grid is empty");
  }
  struct Job {
    std::size_t cell;
    std::size_t seed_index;
  };
  Report report;
  report.territory_map = map;
  std::vector<Job> jobs;
  for (double scale : grid.scales) {
    for (PaddingMode pad : grid.paddings) {
      ReportCell cell;
      cell.scale = scale;
      cell.padding = pad;
      cell.seeds = grid.seeds;
      cell.per_seed.resize(grid.seeds.size());
      for (std::size_t s = 0; s < grid.seeds.size(); ++s) jobs.push_back({report.cells.size(), s});
      report.cells.push_back(std::move(cell));
    }
  }
  // Padding is a per-run choice here; the dataset's own marker does not apply.
  Dataset unmarked_view = ds;
  unmarked_view.padding_mode.reset();

  run_chunks(static_cast<int>(jobs.size()), threads, [&](int j) {
    const Job job = jobs[static_cast<std::size_t>(j)];
    ReportCell& cell = report.cells[job.cell];
    SplitSpec split = grid.split;
    split.scale = cell.scale;
    TrainConfig cfg = grid.train;
    cfg.padding = cell.padding;
    cfg.seed = cell.seeds[job.seed_index];
    cfg.threads = 1;
    try {
      const Splits splits = stratified_split(unmarked_view.labels, split);
      const TrainResult tr = train(unmarked_view, splits, cfg, split);
      cell.per_seed[job.seed_index] = evaluate_model(tr.final_params, unmarked_view, splits.test, map);
    } catch (const Error& e) {
      std::ostringstream ss;
      ss << "ablation cell (scale " << cell.scale << ", padding " << padding_name(cell.padding)
         << ", seed " << cfg.seed << "): " << e.what();
      throw Error(e.kind(), ss.str());
    }
  });
  return report;
}

}  // namespace scarfcn
