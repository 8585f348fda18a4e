#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ebgcn/datagen.hpp"
#include "ebgcn/errors.hpp"
#include "ebgcn/eval.hpp"
#include "ebgcn/rng.hpp"

using namespace ebgcn;
using namespace ebgcn::eval;
using cascade::Dataset;

namespace {

// Brute-force per-class metrics, written against the definitions rather
// than the confusion matrix.
struct OracleMetrics {
  double accuracy;
  std::vector<double> f1;
  double macro_f1;
  double weighted_f1;
};

OracleMetrics oracle_metrics(const std::vector<int>& pred, const std::vector<int>& gold, int classes) {
  OracleMetrics m;
  long long right = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == gold[i]) ++right;
  m.accuracy = double(right) / double(pred.size());
  m.macro_f1 = 0.0;
  m.weighted_f1 = 0.0;
  for (int c = 0; c < classes; ++c) {
    long long tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (gold[i] == c) ++support;
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    double f1 = 0.0;
    if (tp > 0) {
      const double p = double(tp) / double(tp + fp);
      const double r = double(tp) / double(tp + fn);
      f1 = 2 * p * r / (p + r);
    }
    m.f1.push_back(f1);
    m.macro_f1 += f1 / classes;
    m.weighted_f1 += double(support) / double(pred.size()) * f1;
  }
  return m;
}

Dataset tagged_dataset(int per_class, int events, std::uint64_t seed) {
  datagen::GenConfig cfg;
  cfg.claims_per_class = per_class;
  cfg.num_events = events;
  cfg.seed = seed;
  return datagen::generate(cfg).dataset;
}

}  // namespace

TEST_CASE("perfect predictions score accuracy 1 with unit F1 everywhere") {
  const std::vector<int> gold{0, 1, 2, 3, 0, 1, 2, 3};
  const MetricReport r = compute_metrics(gold, gold, 4);
  CHECK(r.accuracy == 1.0);
  for (double f1 : r.f1) CHECK(f1 == 1.0);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.weighted_f1 == 1.0);
}

TEST_CASE("all-one-class predictions on a balanced 4-class set of 8") {
  const std::vector<int> gold{0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<int> pred(8, 2);
  const MetricReport r = compute_metrics(pred, gold, 4);
  CHECK(r.accuracy == 0.25);
  CHECK(std::abs(r.f1[2] - 0.4) <= 1e-15);  // 2 * 0.25 * 1 / 1.25
  CHECK(r.f1[0] == 0.0);
  CHECK(r.f1[1] == 0.0);
  CHECK(r.f1[3] == 0.0);
  // accuracy equals trace(confusion)/total by construction.
  long long trace = 0, total = 0;
  for (int c = 0; c < 4; ++c)
    for (int g = 0; g < 4; ++g) {
      total += r.confusion[c][g];
      if (c == g) trace += r.confusion[c][g];
    }
  CHECK(r.accuracy == double(trace) / double(total));
}

TEST_CASE("metrics match the brute-force oracle on 1000 random instances") {
  Rng rng(424242);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = 2 + static_cast<int>(rng.uniform_int(5));
    const int n = 1 + static_cast<int>(rng.uniform_int(40));
    std::vector<int> pred(n), gold(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.uniform_int(classes));
      gold[i] = static_cast<int>(rng.uniform_int(classes));
    }
    const MetricReport got = compute_metrics(pred, gold, classes);
    const OracleMetrics want = oracle_metrics(pred, gold, classes);
    CHECK(std::abs(got.accuracy - want.accuracy) <= 1e-12);
    CHECK(std::abs(got.macro_f1 - want.macro_f1) <= 1e-12);
    CHECK(std::abs(got.weighted_f1 - want.weighted_f1) <= 1e-12);
    for (int c = 0; c < classes; ++c) CHECK(std::abs(got.f1[c] - want.f1[c]) <= 1e-12);
  }
}

TEST_CASE("labels outside the set are rejected") {
  CHECK_THROWS_AS(compute_metrics({0, 4}, {0, 1}, 4), DataError);
  CHECK_THROWS_AS(compute_metrics({0, 1}, {0, -1}, 4), DataError);
  CHECK_THROWS_AS(compute_metrics({}, {}, 4), DataError);
}

TEST_CASE("kfold splits are disjoint, covering, and sized m/k") {
  datagen::GenConfig cfg;
  cfg.claims_per_class = 5;
  cfg.label_set = cascade::LabelSet{{"F", "T"}};
  cfg.seed = 31;
  const Dataset tiny = datagen::generate(cfg).dataset;  // m = 10
  const auto splits = kfold_splits(tiny, 5, 7);
  REQUIRE(splits.size() == 5);

  std::set<int> seen;
  for (const Split& s : splits) {
    CHECK(s.second.size() == 2);
    CHECK(s.first.size() == 8);
    for (int i : s.second) {
      CHECK(seen.insert(i).second);  // disjoint test folds
      CHECK(std::find(s.first.begin(), s.first.end(), i) == s.first.end());
    }
  }
  CHECK(seen.size() == 10);  // covering
}

TEST_CASE("kfold folds are stratified within one claim per class") {
  const Dataset data = tagged_dataset(100, 0, 11);  // 4 x 100
  const auto splits = kfold_splits(data, 5, 99);
  for (const Split& s : splits) {
    std::vector<int> per_class(4, 0);
    for (int i : s.second) ++per_class[data.claims[i].label];
    for (int c = 0; c < 4; ++c) {
      CHECK(per_class[c] >= 19);
      CHECK(per_class[c] <= 21);
    }
  }
}

TEST_CASE("kfold is deterministic and rejects k > m") {
  const Dataset data = tagged_dataset(3, 0, 5);
  const auto a = kfold_splits(data, 4, 123);
  const auto b = kfold_splits(data, 4, 123);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second == b[i].second);
  }
  CHECK_THROWS_AS(kfold_splits(data, 13, 1), DataError);
}

TEST_CASE("leave-one-event-out produces one split per event") {
  const Dataset data = tagged_dataset(6, 3, 77);
  const auto splits = loeo_splits(data);
  REQUIRE(splits.size() == 3);

  std::set<int> covered;
  for (const Split& s : splits) {
    REQUIRE(!s.second.empty());
    const std::string event = data.claims[s.second[0]].event;
    for (int i : s.second) {
      CHECK(data.claims[i].event == event);
      CHECK(covered.insert(i).second);
    }
    for (int i : s.first) CHECK(data.claims[i].event != event);
  }
  CHECK(covered.size() == data.claims.size());  // union of test splits = dataset
}

TEST_CASE("loeo accepts single-claim events and demands tags") {
  Dataset data = tagged_dataset(2, 0, 9);
  CHECK_THROWS_AS(loeo_splits(data), DataError);  // no tags
  for (std::size_t i = 0; i < data.claims.size(); ++i)
    data.claims[i].event = i == 0 ? "lonely" : "crowd";
  const auto splits = loeo_splits(data);
  REQUIRE(splits.size() == 2);
  CHECK((splits[0].second.size() == 1 || splits[1].second.size() == 1));
}

TEST_CASE("stratified holdout splits deterministically at the requested fraction") {
  const Dataset data = tagged_dataset(50, 0, 202);
  const Split s = stratified_holdout(data, 0.2, 7);
  CHECK(s.first.size() == 160);
  CHECK(s.second.size() == 40);
  std::vector<int> per_class(4, 0);
  for (int i : s.second) ++per_class[data.claims[i].label];
  for (int c = 0; c < 4; ++c) CHECK(per_class[c] == 10);
  const Split again = stratified_holdout(data, 0.2, 7);
  CHECK(s.first == again.first);
  CHECK(s.second == again.second);
}

TEST_CASE("early detection curve at unlimited budget equals direct evaluation") {
  datagen::GenConfig gen;
  gen.claims_per_class = 4;
  gen.feature_dim = 8;
  gen.seed = 55;
  const datagen::GeneratedData data = datagen::generate(gen);
  const net::ModelDims dims{8, 12, 2, 4};
  const num::ParamMap64 params = net::init_params(dims, 3);
  std::vector<int> idx;
  for (int i = 0; i < 16; ++i) idx.push_back(i);

  const EvalOutcome direct = evaluate_dataset(params, dims, net::NetConfig{}, 1.0, data.dataset,
                                              data.features, idx);
  const auto curve = early_detection_curve(params, dims, net::NetConfig{}, data.dataset,
                                           data.features, idx,
                                           {Budget{false, 2.0}, Budget{true, 0.0}},
                                           cascade::TruncatePolicy::Kind::MaxTweets);
  REQUIRE(curve.size() == 2);
  CHECK(curve[1].metrics.accuracy == direct.metrics.accuracy);
  CHECK(curve[1].metrics.confusion == direct.metrics.confusion);
  // The tiny budget reduces every cascade to very few nodes yet stays defined.
  CHECK(curve[0].metrics.accuracy >= 0.0);
  CHECK(curve[0].metrics.accuracy <= 1.0);
}

TEST_CASE("robustness experiment reports per-seed and aggregate accuracies") {
  datagen::GenConfig gen;
  gen.claims_per_class = 6;
  gen.label_set = cascade::LabelSet{{"F", "T"}};
  gen.feature_dim = 8;
  gen.snr = 3.0;
  gen.seed = 99;
  const datagen::GeneratedData data = datagen::generate(gen);

  std::vector<int> train_idx, test_idx;
  for (int i = 0; i < 12; ++i) (i % 3 == 0 ? test_idx : train_idx).push_back(i);

  RobustnessConfig cfg;
  cfg.rhos = {0.0, 0.3};
  cfg.seeds = {1};
  cfg.train.lr = 0.02;
  cfg.train.max_epochs = 8;
  cfg.train.patience = 8;
  cfg.train.gamma = 0.3;
  cfg.train.relation_types = 2;
  cfg.train.hidden = 8;

  const RobustnessReport report =
      robustness_experiment(data.dataset, data.features, train_idx, test_idx, cfg);
  REQUIRE(report.runs.size() == 1);
  REQUIRE(report.runs[0].model_acc.size() == 2);
  REQUIRE(report.runs[0].ablation_acc.size() == 2);
  for (double acc : report.runs[0].model_acc) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  CHECK(report.mean_model_acc[0] == report.runs[0].model_acc[0]);
  CHECK(std::isfinite(report.mean_model_drop));
  CHECK(std::isfinite(report.mean_ablation_drop));
}
