#pragma once

#include <cstdint>
#include <vector>

#include "ebgcn/cascade.hpp"
#include "ebgcn/text_features.hpp"

namespace ebgcn::datagen {

// Shape tendencies for one class's cascades. `branching` biases parent
// choice toward already-busy nodes (wide trees); `depth_tendency` is the
// probability a new node chains off the most recent one (deep trees).
struct ClassProfile {
  double branching = 0.5;
  double depth_tendency = 0.2;
};

struct GenConfig {
  int claims_per_class = 125;
  cascade::LabelSet label_set = cascade::LabelSet::four_class();
  int nodes_min = 6;
  int nodes_max = 18;
  std::vector<ClassProfile> profiles;  // per class; defaults spread if empty
  int feature_dim = 32;                // d0
  double snr = 1.0;      // class-signal norm over expected noise norm
  double edge_noise = 0.0;             // rho applied to every generated claim
  double irrelevant_rate = 0.1;        // chance a node carries pure noise
  int num_events = 0;                  // > 0 tags claims round-robin
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct GeneratedData {
  cascade::Dataset dataset;
  text::DatasetFeatures features;
};

// Class-conditional signal directions (unit norm), deterministic in the
// config seed and dimensions.
std::vector<std::vector<double>> class_signals(const GenConfig& cfg);

// Balanced labeled cascades: random trees grown per the class profile,
// node features = class signal + isotropic noise at the configured SNR
// (irrelevant nodes get pure noise), timestamps increasing along depth.
// Fully deterministic under the seed.
GeneratedData generate(const GenConfig& cfg);

// Each non-root edge independently with probability rho gets its parent
// re-drawn uniformly among strictly earlier nodes (current parent
// excluded). Keeps node features, node count, label, and validity.
cascade::Claim perturb_edges(const cascade::Claim& claim, double rho, std::uint64_t seed);

}  // namespace ebgcn::datagen
