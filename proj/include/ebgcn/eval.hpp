#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ebgcn/cascade.hpp"
#include "ebgcn/text_features.hpp"
#include "ebgcn/trainer.hpp"

namespace ebgcn::eval {

struct MetricReport {
  double accuracy = 0.0;
  std::vector<double> f1;  // per class
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::vector<std::vector<long long>> confusion;  // [gold][pred]
  std::vector<long long> support;                 // gold counts per class
};

// F1 = 2PR/(P+R) from the confusion matrix; classes with no predicted and
// no actual support get F1 = 0. macro is the unweighted mean, weighted is
// support-weighted.
MetricReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& golds,
                             int num_classes);

using Split = std::pair<std::vector<int>, std::vector<int>>;  // (train, test)

// Stratified-by-label k-fold partition, deterministic under the seed; folds
// are disjoint, cover the dataset, and per-class counts differ by at most 1.
std::vector<Split> kfold_splits(const cascade::Dataset& dataset, int k, std::uint64_t seed);

// One split per distinct event tag: test = that event, train = the rest.
std::vector<Split> loeo_splits(const cascade::Dataset& dataset);

// Single stratified holdout (used by the train command).
Split stratified_holdout(const cascade::Dataset& dataset, double test_fraction, std::uint64_t seed);

struct EvalOutcome {
  MetricReport metrics;
  std::vector<int> predictions;
  double mean_lc = 0.0;
  double mean_le = 0.0;
  double mean_total = 0.0;
};

// Eval-mode predictions and metrics over the indexed claims.
EvalOutcome evaluate_dataset(const num::ParamMap64& params, const net::ModelDims& dims,
                             const net::NetConfig& net_cfg, double gamma,
                             const cascade::Dataset& dataset, const text::DatasetFeatures& features,
                             const std::vector<int>& idx);

struct Budget {
  bool unlimited = false;
  double value = 0.0;  // deadline minutes or tweet count
};

struct CurvePoint {
  Budget budget;
  MetricReport metrics;
};

// Metrics per detection budget: each test claim is truncated, rebuilt with
// the surviving nodes' feature rows, and evaluated in eval mode. An
// unlimited budget reproduces direct evaluation exactly.
std::vector<CurvePoint> early_detection_curve(
    const num::ParamMap64& params, const net::ModelDims& dims, const net::NetConfig& net_cfg,
    const cascade::Dataset& dataset, const text::DatasetFeatures& features,
    const std::vector<int>& test_idx, const std::vector<Budget>& budgets,
    cascade::TruncatePolicy::Kind kind);

struct RobustnessConfig {
  std::vector<double> rhos = {0.0, 0.1, 0.2, 0.3};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  train::TrainConfig train;  // gamma/T for the full model; seed overridden per run
};

struct RobustnessRun {
  std::uint64_t seed = 0;
  std::vector<double> model_acc;     // per rho
  std::vector<double> ablation_acc;  // per rho
};

struct RobustnessReport {
  std::vector<double> rhos;
  std::vector<RobustnessRun> runs;
  std::vector<double> mean_model_acc;
  std::vector<double> mean_ablation_acc;
  double mean_model_drop = 0.0;     // acc(rho=0) - acc(max rho), averaged over seeds
  double mean_ablation_drop = 0.0;
};

// Trains the full model and the gate-disabled gamma=1 ablation on clean
// data per seed, then evaluates both on test sets perturbed at each rho.
RobustnessReport robustness_experiment(const cascade::Dataset& dataset,
                                       const text::DatasetFeatures& features,
                                       const std::vector<int>& train_idx,
                                       const std::vector<int>& test_idx,
                                       const RobustnessConfig& cfg);

}  // namespace ebgcn::eval
