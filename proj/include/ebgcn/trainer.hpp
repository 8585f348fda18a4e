#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ebgcn/cascade.hpp"
#include "ebgcn/model.hpp"
#include "ebgcn/network.hpp"
#include "ebgcn/tape.hpp"

namespace ebgcn::train {

struct TrainConfig {
  double lr = 5e-4;
  int max_epochs = 200;
  int patience = 10;
  double gamma = 0.3;
  int relation_types = 3;  // T in [1, 5]
  int hidden = 64;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int precision = 64;  // 32 | 64
  bool edge_inference = true;

  void validate() const;  // throws ConfigError
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  num::ParamMap<T> m;
  num::ParamMap<T> v;
  long long step = 0;
};

// Bias-corrected Adam update, in place. Aborts with the parameter name on a
// non-finite gradient.
template <typename T>
void adam_step(num::ParamMap<T>& params, const num::ParamMap<T>& grads, AdamState<T>& state,
               double lr, const AdamConfig& cfg = {});

struct EpochRecord {
  int epoch = 0;
  std::string split;  // "train" | "val"
  double lc = 0.0;
  double le = 0.0;
  double total = 0.0;
  double acc = 0.0;
};

struct FitResult {
  net::ModelDims dims;
  num::ParamMap64 best_params;
  num::ParamMap64 adam_m;  // optimizer state at the best epoch
  num::ParamMap64 adam_v;
  long long adam_step = 0;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_run = 0;
  bool diverged = false;
};

// Mini-batch training with early stopping on validation total loss
// (improvement means dropping below best - 1e-6). Seeded shuffling and
// per-claim noise streams make single-threaded runs bitwise reproducible;
// batch members may evaluate on parallel tapes, reduced in a fixed order.
FitResult fit(const std::vector<cascade::PropagationGraph>& graphs, const std::vector<int>& labels,
              const std::vector<int>& train_idx, const std::vector<int>& val_idx,
              const net::ModelDims& dims, const TrainConfig& cfg);

// Loss/accuracy of one claim without touching gradients.
struct ClaimEval {
  double lc = 0.0;
  double le = 0.0;
  double total = 0.0;
  int pred = -1;
};

ClaimEval evaluate_claim(const cascade::PropagationGraph& graph, const num::ParamMap64& params,
                         const net::ModelDims& dims, const net::NetConfig& net_cfg, double gamma,
                         int label);

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

}  // namespace ebgcn::train
