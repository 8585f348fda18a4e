#include "ebgcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ebgcn/errors.hpp"
#include "ebgcn/network.hpp"
#include "ebgcn/objective.hpp"
#include "ebgcn/rng.hpp"

namespace ebgcn::train {

using num::ParamMap;
using num::Tape;
using num::Tensor;

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (patience < 1) throw ConfigError("patience must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
  if (relation_types < 1 || relation_types > 5) throw ConfigError("T must lie in [1, 5]");
  if (hidden < 1) throw ConfigError("hidden dim must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
}

template <typename T>
void adam_step(ParamMap<T>& params, const ParamMap<T>& grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg) {
  if (state.step == 0) {
    for (const auto& [name, p] : params) {
      state.m[name] = Tensor<T>(p.rows(), p.cols());
      state.v[name] = Tensor<T>(p.rows(), p.cols());
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) throw NumericError("adam_step: missing gradient for " + name);
    const Tensor<T>& g = git->second;
    if (!g.all_finite()) throw NumericError("adam_step: non-finite gradient in " + name);
    Tensor<T>& m = state.m[name];
    Tensor<T>& v = state.v[name];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g.at_flat(i));
      m.at_flat(i) = static_cast<T>(cfg.beta1 * m.at_flat(i) + (1.0 - cfg.beta1) * gi);
      v.at_flat(i) = static_cast<T>(cfg.beta2 * v.at_flat(i) + (1.0 - cfg.beta2) * gi * gi);
      const double m_hat = m.at_flat(i) / bc1;
      const double v_hat = v.at_flat(i) / bc2;
      p.at_flat(i) = static_cast<T>(p.at_flat(i) - lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
}

template void adam_step(ParamMap<float>&, const ParamMap<float>&, AdamState<float>&, double,
                        const AdamConfig&);
template void adam_step(ParamMap<double>&, const ParamMap<double>&, AdamState<double>&, double,
                        const AdamConfig&);

namespace {

template <typename T>
struct ClaimOutcome {
  double lc = 0.0;
  double le = 0.0;
  double total = 0.0;
  int pred = -1;
  ParamMap<T> grads;
};

template <typename T>
ClaimOutcome<T> run_claim(const cascade::PropagationGraph& graph, const ParamMap<T>& params,
                          const net::ModelDims& dims, const net::NetConfig& net_cfg,
                          net::RunMode mode, std::uint64_t seed, double gamma, int label,
                          bool want_grads) {
  Tape<T> tape;
  const net::ParamNodeIds ids = net::register_params(tape, params);
  const net::ForwardResult fr = net::forward(tape, graph, ids, dims, net_cfg, mode, seed);
  const int lc = objective::tape_cross_entropy(tape, fr.probs, label);
  const int le = objective::tape_consistency_loss<T>(tape, fr.records);
  const int total = objective::tape_total_loss<T>(tape, lc, le, gamma);

  ClaimOutcome<T> out;
  out.lc = static_cast<double>(tape.value(lc)(0, 0));
  out.le = static_cast<double>(tape.value(le)(0, 0));
  out.total = static_cast<double>(tape.value(total)(0, 0));
  const Tensor<T>& probs = tape.value(fr.probs);
  out.pred = 0;
  for (int c = 1; c < probs.cols(); ++c)
    if (probs(0, c) > probs(0, out.pred)) out.pred = c;
  if (want_grads) out.grads = tape.backward(total);
  return out;
}

template <typename T>
ParamMap<T> cast_params(const num::ParamMap64& params) {
  ParamMap<T> out;
  for (const auto& [name, tensor] : params) out[name] = tensor.template cast<T>();
  return out;
}

template <typename T>
num::ParamMap64 widen_params(const ParamMap<T>& params) {
  num::ParamMap64 out;
  for (const auto& [name, tensor] : params) out[name] = tensor.template cast<double>();
  return out;
}

template <typename T>
FitResult fit_impl(const std::vector<cascade::PropagationGraph>& graphs,
                   const std::vector<int>& labels, const std::vector<int>& train_idx,
                   const std::vector<int>& val_idx, const net::ModelDims& dims,
                   const TrainConfig& cfg) {
  const net::NetConfig net_cfg{cfg.edge_inference};
  ParamMap<T> params = cast_params<T>(net::init_params(dims, cfg.seed));
  AdamState<T> adam;

  FitResult result;
  result.dims = dims;

  ParamMap<T> best_params = params;
  AdamState<T> best_adam = adam;
  int epochs_without_improvement = 0;

  std::vector<int> order(train_idx);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5u + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double train_lc = 0.0, train_le = 0.0, train_total = 0.0;
    long long train_correct = 0;
    bool numeric_failure = false;
    std::string failure_what;

    for (std::size_t start = 0; start < order.size() && !numeric_failure;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const int count = static_cast<int>(stop - start);
      std::vector<ClaimOutcome<T>> outcomes(count);

      // Independent tapes per batch member; the reduction below runs in a
      // fixed order, so results do not depend on the thread count.
#pragma omp parallel for schedule(dynamic)
      for (int k = 0; k < count; ++k) {
        const int ci = order[start + k];
        const std::uint64_t claim_seed =
            derive_seed(derive_seed(cfg.seed, 0x7000u + static_cast<std::uint64_t>(epoch)),
                        static_cast<std::uint64_t>(ci));
        outcomes[k] = run_claim<T>(graphs[ci], params, dims, net_cfg, net::RunMode::Train,
                                   claim_seed, cfg.gamma, labels[ci], /*want_grads=*/true);
      }

      ParamMap<T> grad_sum;
      for (const auto& [name, p] : params) grad_sum[name] = Tensor<T>(p.rows(), p.cols());
      for (int k = 0; k < count; ++k) {
        const ClaimOutcome<T>& o = outcomes[k];
        if (!std::isfinite(o.total)) {
          numeric_failure = true;
          failure_what = "non-finite loss";
          break;
        }
        train_lc += o.lc;
        train_le += o.le;
        train_total += o.total;
        if (o.pred == labels[order[start + k]]) ++train_correct;
        for (auto& [name, acc] : grad_sum) {
          const Tensor<T>& g = o.grads.at(name);
          for (std::size_t i = 0; i < acc.size(); ++i) acc.at_flat(i) += g.at_flat(i);
        }
      }
      if (numeric_failure) break;
      const T inv = T(1) / static_cast<T>(count);
      for (auto& [name, acc] : grad_sum)
        for (std::size_t i = 0; i < acc.size(); ++i) acc.at_flat(i) *= inv;
      try {
        adam_step(params, grad_sum, adam, cfg.lr);
      } catch (const NumericError& e) {
        numeric_failure = true;
        failure_what = e.what();
      }
    }

    if (numeric_failure) {
      // Divergence: keep the best checkpoint seen so far.
      result.diverged = true;
      result.epochs_run = epoch;
      break;
    }

    const double n_train = static_cast<double>(order.size());
    result.history.push_back({epoch, "train", train_lc / n_train, train_le / n_train,
                              train_total / n_train, static_cast<double>(train_correct) / n_train});

    double val_lc = 0.0, val_le = 0.0, val_total = 0.0;
    long long val_correct = 0;
    std::vector<ClaimOutcome<T>> val_outcomes(val_idx.size());
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < static_cast<int>(val_idx.size()); ++k) {
      const int ci = val_idx[k];
      val_outcomes[k] = run_claim<T>(graphs[ci], params, dims, net_cfg, net::RunMode::Eval, 0,
                                     cfg.gamma, labels[ci], /*want_grads=*/false);
    }
    for (std::size_t k = 0; k < val_idx.size(); ++k) {
      val_lc += val_outcomes[k].lc;
      val_le += val_outcomes[k].le;
      val_total += val_outcomes[k].total;
      if (val_outcomes[k].pred == labels[val_idx[k]]) ++val_correct;
    }
    const double n_val = static_cast<double>(val_idx.size());
    const double val_mean_total = val_total / n_val;
    result.history.push_back({epoch, "val", val_lc / n_val, val_le / n_val, val_mean_total,
                              static_cast<double>(val_correct) / n_val});
    result.epochs_run = epoch;

    if (val_mean_total < result.best_val_loss - 1e-6) {
      result.best_val_loss = val_mean_total;
      result.best_epoch = epoch;
      best_params = params;
      best_adam = adam;
      epochs_without_improvement = 0;
    } else if (++epochs_without_improvement >= cfg.patience) {
      break;
    }
  }

  if (result.best_epoch < 0) {
    // No epoch completed validation (divergence in epoch 1); fall back to
    // the initial parameters.
    best_params = params;
    best_adam = adam;
  }
  result.best_params = widen_params(best_params);
  result.adam_m = widen_params(best_adam.m);
  result.adam_v = widen_params(best_adam.v);
  result.adam_step = best_adam.step;
  return result;
}

}  // namespace

FitResult fit(const std::vector<cascade::PropagationGraph>& graphs, const std::vector<int>& labels,
              const std::vector<int>& train_idx, const std::vector<int>& val_idx,
              const net::ModelDims& dims, const TrainConfig& cfg) {
  cfg.validate();
  if (graphs.size() != labels.size()) throw DataError("fit: graphs/labels size mismatch");
  if (train_idx.empty()) throw DataError("fit: empty training split");
  if (val_idx.empty()) throw DataError("fit: empty validation split");
  if (cfg.precision == 32) return fit_impl<float>(graphs, labels, train_idx, val_idx, dims, cfg);
  return fit_impl<double>(graphs, labels, train_idx, val_idx, dims, cfg);
}

ClaimEval evaluate_claim(const cascade::PropagationGraph& graph, const num::ParamMap64& params,
                         const net::ModelDims& dims, const net::NetConfig& net_cfg, double gamma,
                         int label) {
  const ClaimOutcome<double> o =
      run_claim<double>(graph, params, dims, net_cfg, net::RunMode::Eval, 0, gamma, label,
                        /*want_grads=*/false);
  ClaimEval out;
  out.lc = o.lc;
  out.le = o.le;
  out.total = o.total;
  out.pred = o.pred;
  return out;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write history to '" + path + "'");
  out << "epoch,split,L_c,L_e,total,acc\n";
  char buf[256];
  for (const EpochRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.split.c_str(), r.lc,
                  r.le, r.total, r.acc);
    out << buf;
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace ebgcn::train
