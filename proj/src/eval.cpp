#include "ebgcn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "ebgcn/datagen.hpp"
#include "ebgcn/errors.hpp"
#include "ebgcn/rng.hpp"

namespace ebgcn::eval {

using cascade::Claim;
using cascade::Dataset;
using num::Tensor64;

MetricReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& golds,
                             int num_classes) {
  if (predictions.size() != golds.size() || predictions.empty())
    throw DataError("compute_metrics: predictions/golds must be equal-length and non-empty");

  MetricReport report;
  report.confusion.assign(num_classes, std::vector<long long>(num_classes, 0));
  report.support.assign(num_classes, 0);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i] < 0 || golds[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes)
      throw DataError("compute_metrics: label outside the label set");
    ++report.confusion[golds[i]][predictions[i]];
    ++report.support[golds[i]];
  }

  long long correct = 0;
  for (int c = 0; c < num_classes; ++c) correct += report.confusion[c][c];
  report.accuracy = static_cast<double>(correct) / static_cast<double>(golds.size());

  report.f1.assign(num_classes, 0.0);
  for (int c = 0; c < num_classes; ++c) {
    long long tp = report.confusion[c][c];
    long long pred_c = 0, gold_c = report.support[c];
    for (int g = 0; g < num_classes; ++g) pred_c += report.confusion[g][c];
    if (tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(pred_c);
      const double recall = static_cast<double>(tp) / static_cast<double>(gold_c);
      report.f1[c] = 2.0 * precision * recall / (precision + recall);
    }
    report.macro_f1 += report.f1[c] / num_classes;
    report.weighted_f1 += static_cast<double>(gold_c) / static_cast<double>(golds.size()) * report.f1[c];
  }
  return report;
}

std::vector<Split> kfold_splits(const Dataset& dataset, int k, std::uint64_t seed) {
  const int m = static_cast<int>(dataset.claims.size());
  if (k < 2) throw ConfigError("kfold: k must be >= 2");
  if (k > m) throw DataError("kfold: k exceeds the number of claims");

  // Per-class shuffle, then deal round-robin so fold class counts stay
  // within +-1.
  std::vector<std::vector<int>> fold_members(k);
  for (int cls = 0; cls < dataset.label_set.size(); ++cls) {
    std::vector<int> members;
    for (int i = 0; i < m; ++i)
      if (dataset.claims[i].label == cls) members.push_back(i);
    Rng rng(derive_seed(seed, 0xF01Du + static_cast<std::uint64_t>(cls)));
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i)
      fold_members[i % k].push_back(members[i]);
  }

  std::vector<Split> splits;
  for (int f = 0; f < k; ++f) {
    Split s;
    s.second = fold_members[f];
    std::sort(s.second.begin(), s.second.end());
    for (int g = 0; g < k; ++g)
      if (g != f) s.first.insert(s.first.end(), fold_members[g].begin(), fold_members[g].end());
    std::sort(s.first.begin(), s.first.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

std::vector<Split> loeo_splits(const Dataset& dataset) {
  std::map<std::string, std::vector<int>> by_event;
  for (std::size_t i = 0; i < dataset.claims.size(); ++i) {
    if (dataset.claims[i].event.empty())
      throw DataError("loeo: claim '" + dataset.claims[i].id + "' has no event tag");
    by_event[dataset.claims[i].event].push_back(static_cast<int>(i));
  }
  if (by_event.size() < 2) throw DataError("loeo: need at least 2 distinct events");

  std::vector<Split> splits;
  for (const auto& [event, members] : by_event) {
    Split s;
    s.second = members;
    for (const auto& [other, other_members] : by_event)
      if (other != event) s.first.insert(s.first.end(), other_members.begin(), other_members.end());
    std::sort(s.first.begin(), s.first.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

Split stratified_holdout(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw ConfigError("holdout: test fraction must lie in (0, 1)");
  Split out;
  for (int cls = 0; cls < dataset.label_set.size(); ++cls) {
    std::vector<int> members;
    for (std::size_t i = 0; i < dataset.claims.size(); ++i)
      if (dataset.claims[i].label == cls) members.push_back(static_cast<int>(i));
    Rng rng(derive_seed(seed, 0x401D0u + static_cast<std::uint64_t>(cls)));
    rng.shuffle(members);
    const int n_test = static_cast<int>(std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i)
      (static_cast<int>(i) < n_test ? out.second : out.first).push_back(members[i]);
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  if (out.first.empty() || out.second.empty()) throw DataError("holdout: split left a side empty");
  return out;
}

EvalOutcome evaluate_dataset(const num::ParamMap64& params, const net::ModelDims& dims,
                             const net::NetConfig& net_cfg, double gamma, const Dataset& dataset,
                             const text::DatasetFeatures& features, const std::vector<int>& idx) {
  if (idx.empty()) throw DataError("evaluate_dataset: empty index set");
  EvalOutcome out;
  out.predictions.assign(idx.size(), -1);
  std::vector<train::ClaimEval> evals(idx.size());
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < static_cast<int>(idx.size()); ++k) {
    const Claim& claim = dataset.claims[idx[k]];
    const cascade::PropagationGraph graph = cascade::build_graph(claim, features.claim_rows(idx[k]));
    evals[k] = train::evaluate_claim(graph, params, dims, net_cfg, gamma, claim.label);
  }
  std::vector<int> golds;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.predictions[k] = evals[k].pred;
    out.mean_lc += evals[k].lc;
    out.mean_le += evals[k].le;
    out.mean_total += evals[k].total;
    golds.push_back(dataset.claims[idx[k]].label);
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  out.mean_lc *= inv;
  out.mean_le *= inv;
  out.mean_total *= inv;
  out.metrics = compute_metrics(out.predictions, golds, dataset.label_set.size());
  return out;
}

std::vector<CurvePoint> early_detection_curve(
    const num::ParamMap64& params, const net::ModelDims& dims, const net::NetConfig& net_cfg,
    const Dataset& dataset, const text::DatasetFeatures& features, const std::vector<int>& test_idx,
    const std::vector<Budget>& budgets, cascade::TruncatePolicy::Kind kind) {
  if (budgets.empty()) throw ConfigError("early_detection_curve: no budgets");

  std::vector<CurvePoint> curve;
  for (const Budget& budget : budgets) {
    std::vector<int> preds(test_idx.size());
    std::vector<int> golds(test_idx.size());
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < static_cast<int>(test_idx.size()); ++k) {
      const Claim& claim = dataset.claims[test_idx[k]];
      const Tensor64 rows = features.claim_rows(test_idx[k]);
      Claim used = claim;
      Tensor64 used_rows = rows;
      if (!budget.unlimited) {
        const cascade::TruncatePolicy policy =
            kind == cascade::TruncatePolicy::Kind::DeadlineMinutes
                ? cascade::TruncatePolicy::deadline(budget.value)
                : cascade::TruncatePolicy::tweets(static_cast<int>(budget.value));
        used = cascade::truncate_claim(claim, policy);
        // Surviving nodes keep their original feature rows (uids are unique
        // within a claim).
        std::unordered_map<std::string, int> row_of;
        for (int i = 0; i < claim.n(); ++i) row_of[claim.nodes[i].uid] = i;
        used_rows = Tensor64(used.n(), rows.cols());
        for (int i = 0; i < used.n(); ++i) {
          const int src = row_of.at(used.nodes[i].uid);
          for (int j = 0; j < rows.cols(); ++j) used_rows(i, j) = rows(src, j);
        }
      }
      const cascade::PropagationGraph graph = cascade::build_graph(used, used_rows);
      preds[k] = train::evaluate_claim(graph, params, dims, net_cfg, 1.0, used.label).pred;
      golds[k] = claim.label;
    }
    curve.push_back({budget, compute_metrics(preds, golds, dataset.label_set.size())});
  }
  return curve;
}

RobustnessReport robustness_experiment(const Dataset& dataset, const text::DatasetFeatures& features,
                                       const std::vector<int>& train_idx,
                                       const std::vector<int>& test_idx,
                                       const RobustnessConfig& cfg) {
  if (cfg.rhos.empty() || cfg.seeds.empty()) throw ConfigError("robustness: rhos and seeds required");

  std::vector<cascade::PropagationGraph> graphs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < dataset.claims.size(); ++i) {
    graphs.push_back(cascade::build_graph(dataset.claims[i], features.claim_rows(static_cast<int>(i))));
    labels.push_back(dataset.claims[i].label);
  }
  const net::ModelDims dims{features.dim(), cfg.train.hidden, cfg.train.relation_types,
                            dataset.label_set.size()};

  RobustnessReport report;
  report.rhos = cfg.rhos;
  report.mean_model_acc.assign(cfg.rhos.size(), 0.0);
  report.mean_ablation_acc.assign(cfg.rhos.size(), 0.0);

  for (const std::uint64_t seed : cfg.seeds) {
    train::TrainConfig model_cfg = cfg.train;
    model_cfg.seed = seed;
    model_cfg.edge_inference = true;

    train::TrainConfig ablation_cfg = cfg.train;
    ablation_cfg.seed = seed;
    ablation_cfg.edge_inference = false;
    ablation_cfg.gamma = 1.0;  // no consistency term without edge records

    const train::FitResult model_fit = train::fit(graphs, labels, train_idx, test_idx, dims, model_cfg);
    const train::FitResult ablation_fit =
        train::fit(graphs, labels, train_idx, test_idx, dims, ablation_cfg);

    RobustnessRun run;
    run.seed = seed;
    for (std::size_t r = 0; r < cfg.rhos.size(); ++r) {
      // Perturb the test claims only; features stay with their nodes.
      Dataset perturbed = dataset;
      for (int ti : test_idx)
        perturbed.claims[ti] = datagen::perturb_edges(
            dataset.claims[ti], cfg.rhos[r],
            derive_seed(seed, 0xAB0000u + static_cast<std::uint64_t>(r) * 4096u +
                                  static_cast<std::uint64_t>(ti)));
      const EvalOutcome model_eval =
          evaluate_dataset(model_fit.best_params, dims, net::NetConfig{true}, model_cfg.gamma,
                           perturbed, features, test_idx);
      const EvalOutcome ablation_eval =
          evaluate_dataset(ablation_fit.best_params, dims, net::NetConfig{false}, 1.0, perturbed,
                           features, test_idx);
      run.model_acc.push_back(model_eval.metrics.accuracy);
      run.ablation_acc.push_back(ablation_eval.metrics.accuracy);
      report.mean_model_acc[r] += model_eval.metrics.accuracy / static_cast<double>(cfg.seeds.size());
      report.mean_ablation_acc[r] +=
          ablation_eval.metrics.accuracy / static_cast<double>(cfg.seeds.size());
    }
    report.runs.push_back(std::move(run));
  }

  const std::size_t last = cfg.rhos.size() - 1;
  report.mean_model_drop = report.mean_model_acc[0] - report.mean_model_acc[last];
  report.mean_ablation_drop = report.mean_ablation_acc[0] - report.mean_ablation_acc[last];
  return report;
}

}  // namespace ebgcn::eval
