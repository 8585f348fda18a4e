#include "ebgcn/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "ebgcn/errors.hpp"
#include "ebgcn/rng.hpp"

namespace ebgcn::datagen {

using cascade::Claim;
using cascade::Edge;
using cascade::TweetNode;
using num::Tensor64;

void GenConfig::validate() const {
  if (claims_per_class < 1) throw ConfigError("claims_per_class must be >= 1");
  if (label_set.size() < 2) throw ConfigError("label set needs at least 2 classes");
  if (nodes_min < 1 || nodes_max < nodes_min) throw ConfigError("invalid node count range");
  if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (snr <= 0.0) throw ConfigError("snr must be positive");
  if (edge_noise < 0.0 || edge_noise > 1.0) throw ConfigError("edge_noise must lie in [0, 1]");
  if (irrelevant_rate < 0.0 || irrelevant_rate > 1.0)
    throw ConfigError("irrelevant_rate must lie in [0, 1]");
  if (!profiles.empty() && static_cast<int>(profiles.size()) != label_set.size())
    throw ConfigError("profiles must match the number of classes");
}

namespace {

std::vector<ClassProfile> default_profiles(int classes) {
  // Spread branching and depth tendencies so structure carries class signal
  // alongside features.
  std::vector<ClassProfile> out;
  for (int c = 0; c < classes; ++c) {
    const double f = classes > 1 ? static_cast<double>(c) / (classes - 1) : 0.0;
    out.push_back({0.2 + 1.6 * f, 0.1 + 0.5 * (1.0 - f)});
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> class_signals(const GenConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0x51u));
  std::vector<std::vector<double>> signals;
  for (int c = 0; c < cfg.label_set.size(); ++c) {
    std::vector<double> s(cfg.feature_dim);
    double norm_sq = 0.0;
    for (double& x : s) {
      x = rng.gaussian();
      norm_sq += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : s) x *= inv;
    signals.push_back(std::move(s));
  }
  return signals;
}

GeneratedData generate(const GenConfig& cfg) {
  cfg.validate();
  const std::vector<ClassProfile> profiles =
      cfg.profiles.empty() ? default_profiles(cfg.label_set.size()) : cfg.profiles;
  const std::vector<std::vector<double>> signals = class_signals(cfg);

  // SNR = ||signal|| / E||noise||, signals are unit norm.
  const double noise_sd = 1.0 / (cfg.snr * std::sqrt(static_cast<double>(cfg.feature_dim)));

  GeneratedData out;
  out.dataset.label_set = cfg.label_set;
  out.features.offsets.push_back(0);

  std::vector<std::vector<double>> feature_rows;
  int claim_counter = 0;
  for (int cls = 0; cls < cfg.label_set.size(); ++cls) {
    for (int k = 0; k < cfg.claims_per_class; ++k, ++claim_counter) {
      Rng rng(derive_seed(cfg.seed, 0x1000u + static_cast<std::uint64_t>(claim_counter)));
      const int n = cfg.nodes_min +
                    static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.nodes_max - cfg.nodes_min + 1)));

      Claim claim;
      claim.id = "syn-" + cfg.label_set.names[cls] + "-" + std::to_string(k);
      claim.label = cls;
      if (cfg.num_events > 0)
        claim.event = "event-" + std::to_string(claim_counter % cfg.num_events);

      std::vector<int> outdeg(n, 0);
      double t = 0.0;
      for (int i = 0; i < n; ++i) {
        TweetNode node;
        node.uid = claim.id + "-n" + std::to_string(i);
        node.time_offset_minutes = t;
        claim.nodes.push_back(std::move(node));
        t += 1.0 + 9.0 * rng.uniform01();  // strictly increasing along generation order

        if (i == 0) continue;
        int parent;
        if (rng.uniform01() < profiles[cls].depth_tendency) {
          parent = i - 1;
        } else {
          // Preferential attachment: weight 1 + branching * outdeg.
          double total = 0.0;
          for (int v = 0; v < i; ++v) total += 1.0 + profiles[cls].branching * outdeg[v];
          double pick = rng.uniform01() * total;
          parent = 0;
          for (int v = 0; v < i; ++v) {
            pick -= 1.0 + profiles[cls].branching * outdeg[v];
            if (pick <= 0.0) {
              parent = v;
              break;
            }
          }
        }
        ++outdeg[parent];
        claim.edges.push_back({parent, i});
      }

      for (int i = 0; i < n; ++i) {
        const bool irrelevant = i > 0 && rng.uniform01() < cfg.irrelevant_rate;
        std::vector<double> row(cfg.feature_dim);
        for (int j = 0; j < cfg.feature_dim; ++j) {
          row[j] = noise_sd * rng.gaussian();
          if (!irrelevant) row[j] += signals[cls][j];
        }
        feature_rows.push_back(std::move(row));
      }

      if (cfg.edge_noise > 0.0)
        claim = perturb_edges(claim, cfg.edge_noise,
                              derive_seed(cfg.seed, 0x2000u + static_cast<std::uint64_t>(claim_counter)));

      out.dataset.claims.push_back(std::move(claim));
      out.features.offsets.push_back(static_cast<int>(feature_rows.size()));
    }
  }

  out.features.rows = Tensor64(static_cast<int>(feature_rows.size()), cfg.feature_dim);
  for (std::size_t i = 0; i < feature_rows.size(); ++i)
    for (int j = 0; j < cfg.feature_dim; ++j) out.features.rows(static_cast<int>(i), j) = feature_rows[i][j];
  return out;
}

Claim perturb_edges(const Claim& claim, double rho, std::uint64_t seed) {
  if (rho < 0.0 || rho > 1.0) throw ConfigError("rho must lie in [0, 1]");
  Claim out = claim;
  if (rho == 0.0) return out;

  Rng rng(seed);
  const int n = claim.n();
  std::set<std::pair<int, int>> present;
  for (const Edge& e : out.edges) present.insert({e.parent, e.child});

  for (Edge& e : out.edges) {
    if (rng.uniform01() >= rho) continue;
    // Earlier = smaller (time, index), so acyclicity and root reachability
    // survive any redraw. Candidates exclude parents the child already has.
    std::vector<int> earlier;
    const double tc = claim.nodes[e.child].time_offset_minutes;
    for (int v = 0; v < n; ++v) {
      if (v == e.child || present.count({v, e.child})) continue;
      const double tv = claim.nodes[v].time_offset_minutes;
      if (tv < tc || (tv == tc && v < e.child)) earlier.push_back(v);
    }
    if (earlier.empty()) continue;  // nothing to rewire to
    present.erase({e.parent, e.child});
    e.parent = earlier[rng.uniform_int(earlier.size())];
    present.insert({e.parent, e.child});
  }
  return out;
}

}  // namespace ebgcn::datagen
