#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "scarfcn/cohort.hpp"
#include "scarfcn/error.hpp"
#include "scarfcn/experiment.hpp"
#include "scarfcn/preprocess.hpp"

using namespace scarfcn;

namespace {

std::vector<LabelRow> rows_with(const std::vector<int>& scarred_counts) {
  std::vector<LabelRow> out;
  for (int k : scarred_counts) {
    LabelRow r{};
    for (int i = 0; i < k; ++i) r[i] = 1;
    out.push_back(r);
  }
  return out;
}

const Dataset& toy_dataset() {
  static const Dataset ds = [] {
    CohortConfig cc;
    cc.n_raw = 260;
    ResampleConfig rc;
    rc.n_points = 16;
    return preprocess_cohort(generate_cohort(21, cc, 2), rc);
  }();
  return ds;
}

TrainConfig toy_train(int epochs, double pos_weight = 10.0) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 16;
  t.lr = 0.003;
  t.pos_weight = pos_weight;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("split sizes for a single stratum") {
  const auto labels = rows_with(std::vector<int>(10, 0));
  const auto s = stratified_split(labels, {});
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 1);
}

TEST_CASE("splits are disjoint, sorted, stratified and seed dependent") {
  std::mt19937_64 g(1);
  std::vector<int> counts;
  for (int i = 0; i < 3000; ++i) counts.push_back(g() % 2 ? 0 : static_cast<int>(2 + g() % 5));
  const auto labels = rows_with(counts);
  const auto s = stratified_split(labels, {});
  std::set<int> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    all.insert(part->begin(), part->end());
  }
  CHECK(all.size() == s.train.size() + s.val.size() + s.test.size());
  CHECK(all.size() == 3000);
  CHECK(s.test.size() == doctest::Approx(300).epsilon(0.01));
  CHECK(s.val.size() == doctest::Approx(540).epsilon(0.01));

  // Each stratum is represented in proportion in the test split.
  auto frac_healthy = [&](const std::vector<int>& rows) {
    double h = 0;
    for (int r : rows) h += counts[r] == 0;
    return h / rows.size();
  };
  CHECK(std::abs(frac_healthy(s.test) - frac_healthy(s.train)) < 0.01);

  SplitSpec other;
  other.seed = 9;
  CHECK(stratified_split(labels, other).test != s.test);
  CHECK(stratified_split(labels, {}).test == s.test);
}

TEST_CASE("scale shrinks train and val but never test") {
  std::vector<int> counts(1000);
  for (int i = 0; i < 1000; ++i) counts[i] = i % 3 == 0 ? 0 : 2 + i % 5;
  const auto labels = rows_with(counts);
  const auto full = stratified_split(labels, {});
  SplitSpec half;
  half.scale = 0.5;
  const auto h = stratified_split(labels, half);
  CHECK(h.test == full.test);
  CHECK(h.train.size() == doctest::Approx(full.train.size() / 2.0).epsilon(0.02));
  CHECK(h.val.size() == doctest::Approx(full.val.size() / 2.0).epsilon(0.05));
  for (int r : h.train) CHECK(std::binary_search(full.train.begin(), full.train.end(), r));
}

TEST_CASE("tiny strata merge with a warning") {
  const auto labels = rows_with({0, 0, 0, 0, 0, 2, 2, 2, 2, 6});
  const auto s = stratified_split(labels, {});
  CHECK(!s.warnings.empty());
  CHECK(s.train.size() + s.val.size() + s.test.size() == 10);
}

TEST_CASE("split spec validation") {
  SplitSpec s;
  s.scale = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.test_fraction = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(stratified_split({}, {}), InputError);
}

TEST_CASE("reconstructed confusion reproduces the published segment metrics") {
  const auto m = compute_metrics(Level::Segment, {489, 73, 4887, 41});
  CHECK(m.confusion.tp + m.confusion.tn == 5376);
  CHECK(std::round(m.accuracy * 1e4) / 1e4 == 0.9792);
  CHECK(std::round(m.sensitivity * 1e4) / 1e4 == 0.9226);
  CHECK(std::round(m.specificity * 1e4) / 1e4 == 0.9853);
  CHECK(std::round(m.balanced_accuracy * 1e4) / 1e4 == 0.9540);
  const auto p = compute_metrics(Level::Patient, {151, 0, 0, 5});
  CHECK(std::round(p.sensitivity * 1e3) / 1e3 == 0.968);
}

TEST_CASE("empty classes count as perfect recall") {
  const auto m = compute_metrics(Level::Segment, {0, 0, 50, 0});
  CHECK(m.sensitivity == 1.0);
  CHECK(m.specificity == 1.0);
  CHECK(m.balanced_accuracy == 1.0);
  CHECK(compute_metrics(Level::Patient, {}).accuracy == 1.0);
}

TEST_CASE("confusion matrix accumulation") {
  ConfusionMatrix cm;
  cm.add(1, 1);
  cm.add(1, 0);
  cm.add(0, 0);
  cm.add(0, 1);
  cm.add(0, 1);
  CHECK(cm == ConfusionMatrix{1, 1, 1, 2});
  cm += cm;
  CHECK(cm.total() == 10);
}

TEST_CASE("aggregation is an OR over territory and patient segments") {
  const auto map = TerritoryMap::standard();
  std::mt19937_64 g(7);
  for (int t = 0; t < 500; ++t) {
    LabelRow r{};
    for (int& v : r) v = g() % 7 == 0;
    const auto d = aggregate_predictions(r, map);
    int any = 0;
    for (int s = 0; s < 18; ++s) any |= r[s];
    CHECK(d.patient == any);
    for (Territory ter : kTerritories) {
      int a = 0;
      for (int s : map.segments(ter)) a |= r[s - 1];
      CHECK(d.territory[static_cast<int>(ter)] == a);
    }
  }
}

TEST_CASE("evaluation counts every level") {
  const auto map = TerritoryMap::standard();
  std::vector<LabelRow> labels(2, LabelRow{}), pred(2, LabelRow{});
  labels[0][0] = 1;  // LAD
  pred[0][0] = 1;
  pred[1][4] = 1;    // LCx false positive
  const auto ev = evaluate_predictions(pred, labels, map);
  CHECK(ev.n_patients == 2);
  CHECK(ev.metrics(Level::Segment).confusion == ConfusionMatrix{1, 1, 34, 0});
  CHECK(ev.metrics(Level::Patient).confusion == ConfusionMatrix{1, 1, 0, 0});
  CHECK(ev.metrics(Level::LAD).confusion == ConfusionMatrix{1, 0, 1, 0});
  CHECK(ev.metrics(Level::LCx).confusion == ConfusionMatrix{0, 1, 1, 0});
  CHECK(ev.metrics(Level::RCA).confusion == ConfusionMatrix{0, 0, 2, 0});
}

TEST_CASE("multi-seed cells report per-metric medians") {
  ReportCell cell;
  cell.seeds = {0, 1, 2};
  for (std::int64_t tp : {10, 30, 20}) {
    Evaluation ev;
    ev.confusion[static_cast<int>(Level::Segment)] = {tp, 0, 100, 40 - tp};
    cell.per_seed.push_back(ev);
  }
  const auto med = cell.median();
  CHECK(med[static_cast<int>(Level::Segment)].sensitivity == doctest::Approx(0.5));
}

TEST_CASE("training on a toy cohort lowers the loss") {
  const Dataset& ds = toy_dataset();
  const auto splits = stratified_split(ds.labels, {});
  std::vector<EpochLog> seen;
  const auto r = train(ds, splits, toy_train(6), {}, [&](const EpochLog& e) { seen.push_back(e); });
  REQUIRE(r.log.size() == 6);
  CHECK(seen.size() == 6);
  CHECK(r.log.back().train_loss < r.log.front().train_loss);
  CHECK(r.best_epoch >= 1);
  double best = INFINITY;
  for (const auto& e : r.log) best = std::min(best, e.val_loss);
  CHECK(dataset_loss(r.best_params, ds, splits.val, 10.0) == doctest::Approx(best).epsilon(1e-12));
  CHECK(r.final_params.train_config.at("split").at("seed") == 0);
  CHECK(r.final_params.created_unix == 0);
  const auto csv = training_log_csv(r.log);
  CHECK(csv.rfind("epoch,train_loss,val_loss,val_balanced_accuracy_segment\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("training is deterministic and independent of evaluation threads") {
  const Dataset& ds = toy_dataset();
  const auto splits = stratified_split(ds.labels, {});
  auto a = toy_train(2);
  auto b = a;
  b.threads = 3;
  const auto ra = train(ds, splits, a);
  const auto rb = train(ds, splits, b);
  for (int l = 0; l < 4; ++l) CHECK(ra.final_params.layers[l].weights == rb.final_params.layers[l].weights);
  CHECK(ra.log.back().val_loss == rb.log.back().val_loss);
}

TEST_CASE("a larger positive weight raises scar-channel recall") {
  // The weight multiplies the positive term in both channels, so the argmax
  // decision is weight-neutral at the optimum; the scar channel read on its
  // own (logit > 0) is where the rebalancing shows.
  const Dataset& ds = toy_dataset();
  const auto splits = stratified_split(ds.labels, {});
  const auto map = SegmentGridMap::standard();
  auto recall = [&](double w) {
    const auto r = train(ds, splits, toy_train(3, w));
    const auto preds = predict_rows(r.final_params, ds, splits.train);
    int hit = 0, pos = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      for (int s = 1; s <= 18; ++s) {
        if (!ds.labels[splits.train[i]][s - 1]) continue;
        const auto c = map.cell(s);
        ++pos;
        hit += preds[i].logits.at(kScarChannel, c.row, c.col) > 0.0;
      }
    }
    return static_cast<double>(hit) / pos;
  };
  const double r1 = recall(1.0), r10 = recall(10.0);
  INFO("recall w=1 ", r1, ", w=10 ", r10);
  CHECK(r10 >= r1);
  CHECK(r10 > 0.0);
}

TEST_CASE("training refuses a dataset marked for the other padding") {
  Dataset ds = toy_dataset();
  ds.padding_mode = PaddingMode::None;
  const auto splits = stratified_split(ds.labels, {});
  CHECK_THROWS_AS(train(ds, splits, toy_train(1)), ConfigError);
  auto cfg = toy_train(1);
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("train config JSON round trip") {
  auto t = toy_train(4);
  t.optimizer = OptimizerKind::Sgd;
  t.padding = PaddingMode::None;
  CHECK(TrainConfig::from_json(t.to_json()).to_json() == t.to_json());
}

TEST_CASE("ablation grid produces one cell per scale and padding") {
  const Dataset& ds = toy_dataset();
  AblationGrid grid;
  grid.scales = {0.5, 1.0};
  grid.paddings = {PaddingMode::None, PaddingMode::Horizontal};
  grid.seeds = {0, 1};
  grid.train = toy_train(1);
  const auto rep = run_ablation(ds, grid, TerritoryMap::standard(), 2);
  REQUIRE(rep.cells.size() == 4);
  for (const auto& c : rep.cells) {
    CHECK(c.per_seed.size() == 2);
    CHECK(c.split_name == "test");
  }
  const auto j = rep.to_json();
  CHECK(j.at("cells").size() == 4);
  CHECK(j.at("reference").at("horizontal") == 5355);
  const auto text = rep.to_text();
  CHECK(text.find("Balanced Accuracy") != std::string::npos);
  CHECK(text.find("(median)") != std::string::npos);
  const auto again = run_ablation(ds, grid, TerritoryMap::standard(), 1);
  CHECK(again.to_json() == j);
  grid.seeds.clear();
  CHECK_THROWS_AS(run_ablation(ds, grid, TerritoryMap::standard()), ConfigError);
}
