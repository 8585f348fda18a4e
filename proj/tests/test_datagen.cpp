#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ebgcn/datagen.hpp"
#include "ebgcn/errors.hpp"

using namespace ebgcn;
using namespace ebgcn::datagen;
using cascade::Claim;

TEST_CASE("noiseless two-class data is linearly separable on mean node features") {
  GenConfig cfg;
  cfg.claims_per_class = 20;
  cfg.label_set = cascade::LabelSet{{"F", "T"}};
  cfg.feature_dim = 16;
  cfg.snr = 1e6;  // effectively noiseless
  cfg.irrelevant_rate = 0.0;
  cfg.edge_noise = 0.0;
  cfg.seed = 1001;
  const GeneratedData data = generate(cfg);
  const auto signals = class_signals(cfg);

  // Project claim-mean features onto the difference of class signals.
  std::vector<double> margin[2];
  for (std::size_t ci = 0; ci < data.dataset.claims.size(); ++ci) {
    const num::Tensor64 rows = data.features.claim_rows(static_cast<int>(ci));
    double proj = 0.0;
    for (int j = 0; j < rows.cols(); ++j) {
      double mean = 0.0;
      for (int i = 0; i < rows.rows(); ++i) mean += rows(i, j);
      mean /= rows.rows();
      proj += mean * (signals[0][j] - signals[1][j]);
    }
    margin[data.dataset.claims[ci].label].push_back(proj);
  }
  const double min0 = *std::min_element(margin[0].begin(), margin[0].end());
  const double max1 = *std::max_element(margin[1].begin(), margin[1].end());
  CHECK(min0 > max1);  // a threshold between them classifies perfectly
}

TEST_CASE("generation is deterministic under the seed") {
  GenConfig cfg;
  cfg.claims_per_class = 10;
  cfg.seed = 2002;
  cfg.num_events = 4;
  const GeneratedData a = generate(cfg);
  const GeneratedData b = generate(cfg);
  CHECK(a.dataset == b.dataset);
  CHECK(a.features.rows == b.features.rows);
  CHECK(a.features.offsets == b.features.offsets);

  cfg.seed = 2003;
  const GeneratedData c = generate(cfg);
  CHECK_FALSE(a.dataset == c.dataset);
}

TEST_CASE("generated claims satisfy every claim invariant") {
  GenConfig cfg;
  cfg.claims_per_class = 15;
  cfg.seed = 3003;
  cfg.edge_noise = 0.2;
  cfg.num_events = 3;
  const GeneratedData data = generate(cfg);
  CHECK(data.dataset.claims.size() == 4u * 15u);
  for (const Claim& claim : data.dataset.claims) {
    cascade::validate_claim(claim, cfg.label_set);
    CHECK(claim.n() >= cfg.nodes_min);
    CHECK(claim.n() <= cfg.nodes_max);
    CHECK(!claim.event.empty());
  }
  CHECK(data.features.rows.all_finite());
}

TEST_CASE("timestamps increase along generated edges") {
  GenConfig cfg;
  cfg.claims_per_class = 10;
  cfg.seed = 4004;
  const GeneratedData data = generate(cfg);
  for (const Claim& claim : data.dataset.claims)
    for (const cascade::Edge& e : claim.edges)
      CHECK(claim.nodes[e.parent].time_offset_minutes < claim.nodes[e.child].time_offset_minutes);
}

TEST_CASE("class-conditional feature means approach the configured signals") {
  GenConfig cfg;
  cfg.claims_per_class = 60;
  cfg.feature_dim = 12;
  cfg.snr = 2.0;
  cfg.irrelevant_rate = 0.0;
  cfg.seed = 5005;
  const GeneratedData data = generate(cfg);
  const auto signals = class_signals(cfg);

  std::vector<std::vector<double>> mean(4, std::vector<double>(12, 0.0));
  std::vector<long long> count(4, 0);
  for (std::size_t ci = 0; ci < data.dataset.claims.size(); ++ci) {
    const int cls = data.dataset.claims[ci].label;
    const num::Tensor64 rows = data.features.claim_rows(static_cast<int>(ci));
    for (int i = 0; i < rows.rows(); ++i, ++count[cls])
      for (int j = 0; j < 12; ++j) mean[cls][j] += rows(i, j);
  }
  // Noise per coordinate has sd = 1/(snr*sqrt(d)); with ~600 samples the
  // empirical mean sits well within 5 standard errors.
  const double sd = 1.0 / (cfg.snr * std::sqrt(12.0));
  for (int cls = 0; cls < 4; ++cls) {
    const double tol = 5.0 * sd / std::sqrt(static_cast<double>(count[cls]));
    for (int j = 0; j < 12; ++j)
      CHECK(std::abs(mean[cls][j] / count[cls] - signals[cls][j]) <= tol);
  }
}

TEST_CASE("perturb_edges with rho=0 is the identity") {
  GenConfig cfg;
  cfg.claims_per_class = 3;
  cfg.seed = 6006;
  const GeneratedData data = generate(cfg);
  for (const Claim& claim : data.dataset.claims) CHECK(perturb_edges(claim, 0.0, 9) == claim);
}

TEST_CASE("perturb_edges at rho=1 keeps a rooted tree with time-respecting parents") {
  Claim chain;
  chain.id = "chain";
  chain.label = 0;
  for (int i = 0; i < 3; ++i) chain.nodes.push_back({"u" + std::to_string(i), "", 10.0 * i});
  chain.edges = {{0, 1}, {1, 2}};

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Claim p = perturb_edges(chain, 1.0, seed);
    cascade::validate_claim(p, cascade::LabelSet::four_class());
    CHECK(p.n() == 3);
    CHECK(p.label == chain.label);
    CHECK(p.edges.size() == 2);
    for (const cascade::Edge& e : p.edges)
      CHECK(p.nodes[e.parent].time_offset_minutes < p.nodes[e.child].time_offset_minutes);
  }
}

TEST_CASE("perturbation rate concentrates near rho") {
  // One 1001-node cascade: every child except the first has at least one
  // alternative earlier node, so firing the coin implies a changed parent.
  GenConfig cfg;
  cfg.claims_per_class = 1;
  cfg.label_set = cascade::LabelSet{{"F", "T"}};
  cfg.nodes_min = 1001;
  cfg.nodes_max = 1001;
  cfg.seed = 7007;
  const Claim big = generate(cfg).dataset.claims[0];
  REQUIRE(big.edges.size() == 1000);

  const Claim shaken = perturb_edges(big, 0.3, 8008);
  int changed = 0;
  for (std::size_t e = 0; e < big.edges.size(); ++e)
    if (!(shaken.edges[e] == big.edges[e])) ++changed;
  const double rate = changed / 1000.0;
  CHECK(rate >= 0.25);
  CHECK(rate <= 0.35);
  cascade::validate_claim(shaken, cascade::LabelSet::four_class());
}

TEST_CASE("perturb_edges is deterministic and feature-preserving") {
  GenConfig cfg;
  cfg.claims_per_class = 2;
  cfg.seed = 123;
  const GeneratedData data = generate(cfg);
  const Claim& claim = data.dataset.claims[5];
  const Claim a = perturb_edges(claim, 0.5, 77);
  const Claim b = perturb_edges(claim, 0.5, 77);
  CHECK(a == b);
  CHECK(a.nodes.size() == claim.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) CHECK(a.nodes[i].uid == claim.nodes[i].uid);
}

TEST_CASE("infeasible configurations are rejected") {
  GenConfig cfg;
  cfg.seed = 1;

  cfg.claims_per_class = 0;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg.claims_per_class = 1;

  cfg.nodes_min = 0;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg.nodes_min = 5;
  cfg.nodes_max = 4;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg.nodes_max = 9;

  cfg.feature_dim = 1;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg.feature_dim = 8;

  cfg.edge_noise = 1.2;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg.edge_noise = 0.0;

  CHECK_NOTHROW(generate(cfg));
  CHECK_THROWS_AS(perturb_edges(generate(cfg).dataset.claims[0], -0.1, 1), ConfigError);
}
