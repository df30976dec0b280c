#include "scarfcn/scarfcn.h"

#include <cmath>
#include <string>

#include "scarfcn/cohort.hpp"
#include "scarfcn/error.hpp"
#include "scarfcn/experiment.hpp"
#include "scarfcn/fcn.hpp"
#include "scarfcn/io_util.hpp"
#include "scarfcn/preprocess.hpp"
#include "scarfcn/render.hpp"

struct scar_cohort {
  scarfcn::Cohort cohort;
};
struct scar_dataset {
  scarfcn::Dataset ds;
};
struct scar_model {
  scarfcn::FcnParameters params;
};
struct scar_report {
  scarfcn::Report report;
  std::string json;
  std::string text;
};

namespace {

using namespace scarfcn;

thread_local std::string g_last_error;

scar_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return SCAR_ERR_CONFIG;
    case ErrorKind::Input: return SCAR_ERR_INPUT;
    case ErrorKind::Shape: return SCAR_ERR_SHAPE;
    case ErrorKind::Generation: return SCAR_ERR_GENERATION;
    case ErrorKind::Training: return SCAR_ERR_TRAINING;
    case ErrorKind::Checkpoint: return SCAR_ERR_CHECKPOINT;
    case ErrorKind::Io: return SCAR_ERR_IO;
  }
  return SCAR_ERR_INTERNAL;
}

template <class Fn>
scar_status guarded(Fn&& fn) {
  try {
    fn();
    return SCAR_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return SCAR_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SCAR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SCAR_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw ConfigError(std::string(what) + " must not be NULL");
}

PaddingMode to_mode(scar_padding p) {
  switch (p) {
    case SCAR_PADDING_NONE: return PaddingMode::None;
    case SCAR_PADDING_HORIZONTAL: return PaddingMode::Horizontal;
    default: throw ConfigError("padding mode must be NONE or HORIZONTAL");
  }
}

scar_padding to_c(PaddingMode m) {
  return m == PaddingMode::Horizontal ? SCAR_PADDING_HORIZONTAL : SCAR_PADDING_NONE;
}

SplitSpec to_spec(const scar_split_config& c) {
  SplitSpec s;
  s.test_fraction = c.test_fraction;
  s.val_fraction_of_dev = c.val_fraction_of_dev;
  s.scale = c.scale;
  s.seed = c.seed;
  return s;
}

scar_level_metrics to_c(const LevelMetrics& m) {
  return {m.confusion.tp,     m.confusion.fp,      m.confusion.tn,  m.confusion.fn,
          m.accuracy,         m.balanced_accuracy, m.sensitivity,   m.specificity};
}

scar_report* wrap_report(Report r) {
  auto* out = new scar_report{std::move(r), {}, {}};
  out->json = out->report.to_json().dump(2) + "\n";
  out->text = out->report.to_text();
  return out;
}

}  // namespace

extern "C" {

const char* scar_version(void) { return "1.0.0"; }

const char* scar_last_error(void) { return g_last_error.c_str(); }

const char* scar_status_name(scar_status status) {
  switch (status) {
    case SCAR_OK: return "ok";
    case SCAR_ERR_CONFIG: return "configuration error";
    case SCAR_ERR_INPUT: return "input error";
    case SCAR_ERR_SHAPE: return "shape error";
    case SCAR_ERR_GENERATION: return "generation error";
    case SCAR_ERR_TRAINING: return "training error";
    case SCAR_ERR_CHECKPOINT: return "checkpoint error";
    case SCAR_ERR_IO: return "i/o error";
    case SCAR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---------------------------------------------------------------- cohort

void scar_cohort_config_default(scar_cohort_config* cfg) {
  if (!cfg) return;
  const CohortConfig d;
  *cfg = {0, d.n_raw, d.p_mi, d.noise_sigma, d.gls_window.lo, d.gls_window.hi,
          d.min_activation_delay, d.frame_rate_hz, 1};
}

scar_status scar_cohort_generate(const scar_cohort_config* cfg, scar_cohort** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    CohortConfig c;
    c.n_raw = cfg->n_raw;
    c.p_mi = cfg->p_mi;
    c.noise_sigma = cfg->noise_sigma;
    c.gls_window = {cfg->gls_min, cfg->gls_max};
    c.min_activation_delay = cfg->min_activation_delay;
    c.frame_rate_hz = cfg->frame_rate_hz;
    *out = new scar_cohort{generate_cohort(cfg->seed, c, cfg->threads)};
  });
}

scar_status scar_cohort_save(const scar_cohort* cohort, const char* dir) {
  return guarded([&] {
    require(cohort, "cohort");
    require(dir, "dir");
    save_cohort(cohort->cohort, dir);
  });
}

scar_status scar_cohort_load(const char* dir, scar_cohort** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new scar_cohort{load_cohort(dir)};
  });
}

int32_t scar_cohort_size(const scar_cohort* cohort) {
  return cohort ? static_cast<int32_t>(cohort->cohort.records.size()) : 0;
}

int32_t scar_cohort_raw_count(const scar_cohort* cohort) {
  return cohort ? cohort->cohort.n_raw : 0;
}

double scar_cohort_scarred_fraction(const scar_cohort* cohort) {
  return cohort ? cohort->cohort.counts().scarred_segment_fraction : 0.0;
}

scar_status scar_cohort_labels(const scar_cohort* cohort, int32_t index,
                               int32_t labels[SCAR_SEGMENTS]) {
  return guarded([&] {
    require(cohort, "cohort");
    require(labels, "labels");
    const auto& recs = cohort->cohort.records;
    if (index < 0 || index >= static_cast<int32_t>(recs.size())) {
      throw InputError("patient index " + std::to_string(index) + " out of range");
    }
    for (int s = 0; s < kSegments; ++s) labels[s] = recs[index].labels[s];
  });
}

void scar_cohort_free(scar_cohort* cohort) { delete cohort; }

// ---------------------------------------------------------------- preprocess

void scar_resample_config_default(scar_resample_config* cfg) {
  if (!cfg) return;
  const ResampleConfig d;
  *cfg = {d.n_points, d.systole_fraction, SCAR_PADDING_UNSET, 1};
}

scar_status scar_preprocess(const scar_cohort* cohort, const scar_resample_config* cfg,
                            scar_dataset** out) {
  return guarded([&] {
    require(cohort, "cohort");
    require(cfg, "cfg");
    require(out, "out");
    ResampleConfig rc;
    rc.n_points = cfg->n_points;
    rc.systole_fraction = cfg->systole_fraction;
    Dataset ds = preprocess_cohort(cohort->cohort, rc, cfg->threads);
    if (cfg->padding != SCAR_PADDING_UNSET) ds.padding_mode = to_mode(cfg->padding);
    *out = new scar_dataset{std::move(ds)};
  });
}

scar_status scar_dataset_save(const scar_dataset* ds, const char* dir) {
  return guarded([&] {
    require(ds, "ds");
    require(dir, "dir");
    save_dataset(ds->ds, dir);
  });
}

scar_status scar_dataset_load(const char* dir, scar_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new scar_dataset{load_dataset(dir)};
  });
}

int32_t scar_dataset_size(const scar_dataset* ds) { return ds ? ds->ds.size() : 0; }

int32_t scar_dataset_points(const scar_dataset* ds) { return ds ? ds->ds.n_points() : 0; }

scar_padding scar_dataset_padding(const scar_dataset* ds) {
  if (!ds || !ds->ds.padding_mode) return SCAR_PADDING_UNSET;
  return to_c(*ds->ds.padding_mode);
}

const char* scar_dataset_source_hash(const scar_dataset* ds) {
  return ds ? ds->ds.source_hash.c_str() : "";
}

scar_status scar_dataset_patient(const scar_dataset* ds, int32_t index, int32_t* patient_id,
                                 int32_t labels[SCAR_SEGMENTS]) {
  return guarded([&] {
    require(ds, "ds");
    if (index < 0 || index >= ds->ds.size()) {
      throw InputError("patient index " + std::to_string(index) + " out of range");
    }
    if (patient_id) *patient_id = ds->ds.patient_ids[index];
    if (labels) {
      for (int s = 0; s < kSegments; ++s) labels[s] = ds->ds.labels[index][s];
    }
  });
}

int32_t scar_dataset_find(const scar_dataset* ds, int32_t patient_id) {
  if (!ds) return -1;
  const auto& ids = ds->ds.patient_ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == patient_id) return static_cast<int32_t>(i);
  }
  return -1;
}

void scar_dataset_free(scar_dataset* ds) { delete ds; }

// ---------------------------------------------------------------- training

void scar_split_config_default(scar_split_config* cfg) {
  if (!cfg) return;
  const SplitSpec d;
  *cfg = {d.test_fraction, d.val_fraction_of_dev, d.scale, d.seed};
}

void scar_train_config_default(scar_train_config* cfg) {
  if (!cfg) return;
  const TrainConfig d;
  *cfg = {d.epochs, d.batch_size, d.lr, d.pos_weight, SCAR_PADDING_HORIZONTAL,
          SCAR_OPTIMIZER_ADAM, d.seed, d.threads, d.deterministic ? 1 : 0};
}

scar_status scar_split_sizes_compute(const scar_dataset* ds, const scar_split_config* split,
                                     scar_split_sizes* out) {
  return guarded([&] {
    require(ds, "ds");
    require(split, "split");
    require(out, "out");
    const Splits s = stratified_split(ds->ds.labels, to_spec(*split));
    *out = {static_cast<int32_t>(s.train.size()), static_cast<int32_t>(s.val.size()),
            static_cast<int32_t>(s.test.size())};
  });
}

scar_status scar_train(const scar_dataset* ds, const scar_split_config* split,
                       const scar_train_config* cfg, const char* log_csv_path,
                       scar_epoch_callback progress, void* user, scar_model** final_model,
                       scar_model** best_model) {
  return guarded([&] {
    require(ds, "ds");
    require(split, "split");
    require(cfg, "cfg");
    require(final_model, "final_model");
    TrainConfig tc;
    tc.epochs = cfg->epochs;
    tc.batch_size = cfg->batch_size;
    tc.lr = cfg->lr;
    tc.pos_weight = cfg->pos_weight;
    tc.padding = to_mode(cfg->padding);
    tc.optimizer = cfg->optimizer == SCAR_OPTIMIZER_SGD ? OptimizerKind::Sgd : OptimizerKind::Adam;
    tc.seed = cfg->seed;
    tc.threads = cfg->threads;
    tc.deterministic = cfg->deterministic != 0;
    const SplitSpec spec = to_spec(*split);
    const Splits splits = stratified_split(ds->ds.labels, spec);
    std::function<void(const EpochLog&)> cb;
    if (progress) {
      cb = [&](const EpochLog& e) {
        progress(e.epoch, e.train_loss, e.val_loss, e.val_balanced_accuracy_segment, user);
      };
    }
    TrainResult r = train(ds->ds, splits, tc, spec, cb);
    if (log_csv_path) io::write_text(log_csv_path, training_log_csv(r.log));
    auto* fin = new scar_model{std::move(r.final_params)};
    if (best_model) {
      try {
        *best_model = new scar_model{std::move(r.best_params)};
      } catch (...) {
        delete fin;
        throw;
      }
    }
    *final_model = fin;
  });
}

scar_status scar_model_save(const scar_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    save_checkpoint(model->params, path);
  });
}

scar_status scar_model_load(const char* path, scar_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new scar_model{load_checkpoint(path)};
  });
}

scar_padding scar_model_padding(const scar_model* model) {
  return model ? to_c(model->params.padding_mode) : SCAR_PADDING_UNSET;
}

int32_t scar_model_points(const scar_model* model) {
  return model ? model->params.time_points() : 0;
}

size_t scar_model_parameter_count(const scar_model* model) {
  return model ? model->params.parameter_count() : 0;
}

scar_status scar_model_split_config(const scar_model* model, scar_split_config* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const auto& tc = model->params.train_config;
    if (!tc.contains("split")) throw InputError("model carries no split configuration");
    const SplitSpec s = SplitSpec::from_json(tc.at("split"));
    *out = {s.test_fraction, s.val_fraction_of_dev, s.scale, s.seed};
  });
}

scar_status scar_model_predict(const scar_model* model, const scar_dataset* ds,
                               int32_t patient_index, int32_t predicted[SCAR_SEGMENTS],
                               double scores[SCAR_SEGMENTS]) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    require(predicted, "predicted");
    if (patient_index < 0 || patient_index >= ds->ds.size()) {
      throw InputError("patient index " + std::to_string(patient_index) + " out of range");
    }
    const int row = patient_index;
    const auto preds = predict_rows(model->params, ds->ds, std::span<const int>(&row, 1));
    for (int s = 0; s < kSegments; ++s) {
      predicted[s] = preds[0].predicted[s];
      if (scores) scores[s] = preds[0].scores[s];
    }
  });
}

void scar_model_free(scar_model* model) { delete model; }

// ---------------------------------------------------------------- evaluation

scar_status scar_evaluate(const scar_model* model, const scar_dataset* ds,
                          const scar_split_config* split, scar_split_part part, int32_t threads,
                          scar_report** out) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    require(out, "out");
    const FcnParameters& p = model->params;
    if (ds->ds.padding_mode && *ds->ds.padding_mode != p.padding_mode) {
      throw ConfigError("model was trained with " + std::string(padding_name(p.padding_mode)) +
                        " padding but the dataset is marked for " +
                        std::string(padding_name(*ds->ds.padding_mode)));
    }
    if (p.time_points() != ds->ds.n_points()) {
      throw ConfigError("model expects " + std::to_string(p.time_points()) +
                        " time points per trace, dataset has " + std::to_string(ds->ds.n_points()));
    }
    std::vector<int> rows;
    std::string name = "all";
    if (part == SCAR_SPLIT_ALL) {
      for (int i = 0; i < ds->ds.size(); ++i) rows.push_back(i);
    } else {
      require(split, "split");
      const Splits s = stratified_split(ds->ds.labels, to_spec(*split));
      switch (part) {
        case SCAR_SPLIT_TRAIN: rows = s.train; name = "train"; break;
        case SCAR_SPLIT_VAL: rows = s.val; name = "val"; break;
        case SCAR_SPLIT_TEST: rows = s.test; name = "test"; break;
        default: throw ConfigError("unknown split part");
      }
    }
    ReportCell cell;
    cell.padding = p.padding_mode;
    cell.scale = split ? split->scale : 1.0;
    cell.seeds = {p.rng_seed};
    cell.split_name = name;
    const TerritoryMap map = TerritoryMap::standard();
    cell.per_seed.push_back(evaluate_model(p, ds->ds, rows, map, threads));
    Report r;
    r.territory_map = map;
    r.cells.push_back(std::move(cell));
    *out = wrap_report(std::move(r));
  });
}

scar_status scar_run_ablation(const scar_dataset* ds, const char* grid_json, int32_t threads,
                              scar_report** out) {
  return guarded([&] {
    require(ds, "ds");
    require(out, "out");
    const AblationGrid grid = AblationGrid::from_json(
        grid_json ? nlohmann::json::parse(grid_json) : nlohmann::json::object());
    *out = wrap_report(run_ablation(ds->ds, grid, TerritoryMap::standard(), threads));
  });
}

int32_t scar_report_cell_count(const scar_report* report) {
  return report ? static_cast<int32_t>(report->report.cells.size()) : 0;
}

scar_status scar_report_level(const scar_report* report, int32_t cell, scar_level level,
                              scar_level_metrics* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    const auto& cells = report->report.cells;
    if (cell < 0 || cell >= static_cast<int32_t>(cells.size())) {
      throw InputError("report cell " + std::to_string(cell) + " out of range");
    }
    if (level < SCAR_LEVEL_PATIENT || level > SCAR_LEVEL_SEGMENT) {
      throw InputError("unknown level");
    }
    *out = to_c(cells[cell].median()[static_cast<std::size_t>(level)]);
  });
}

const char* scar_report_json(const scar_report* report) {
  return report ? report->json.c_str() : "";
}

const char* scar_report_text(const scar_report* report) {
  return report ? report->text.c_str() : "";
}

scar_status scar_report_save(const scar_report* report, const char* dir) {
  return guarded([&] {
    require(report, "report");
    require(dir, "dir");
    save_report(report->report, dir);
  });
}

void scar_report_free(scar_report* report) { delete report; }

// ---------------------------------------------------------------- misc

scar_level_metrics scar_metrics_from_counts(int64_t tp, int64_t fp, int64_t tn, int64_t fn) {
  ConfusionMatrix cm{tp, fp, tn, fn};
  return to_c(compute_metrics(Level::Segment, cm));
}

scar_status scar_render_svg(const int32_t predicted[SCAR_SEGMENTS], const double* scores,
                            const int32_t* labels, const char* title, const char* out_path) {
  return guarded([&] {
    require(predicted, "predicted");
    require(out_path, "out_path");
    BullseyeValues v;
    for (int s = 0; s < kSegments; ++s) v.predicted[s] = predicted[s];
    if (scores) {
      std::array<double, kSegments> sc{};
      for (int s = 0; s < kSegments; ++s) {
        if (!std::isfinite(scores[s])) throw InputError("render: non-finite score");
        sc[s] = scores[s];
      }
      v.scores = sc;
    }
    if (labels) {
      std::array<int, kSegments> lb{};
      for (int s = 0; s < kSegments; ++s) lb[s] = labels[s];
      v.labels = lb;
    }
    if (title) v.title = title;
    io::write_text(out_path, render_bullseye_svg(v));
  });
}

}  // extern "C"
