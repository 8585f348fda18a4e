#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ebgcn/datagen.hpp"
#include "ebgcn/errors.hpp"
#include "ebgcn/network.hpp"
#include "test_support.hpp"

using namespace ebgcn;
using namespace ebgcn::net;
using num::EdgeList;
using num::ParamMap64;
using num::Tape64;
using num::Tensor64;
using testsupport::rand_tensor;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor64& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (int i = 0; i < t.rows(); ++i)
    for (int j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

double sigmoid_s(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Straight-line re-implementation of the forward pass with plain loops and
// no tape, used as the independent oracle. Mirrors: per direction, two
// rounds of (edge reweighting, symmetric normalization with self-loops,
// relu graph convolution), then mean pooling and the softmax classifier.
std::vector<double> oracle_forward(const Mat& x, const EdgeList& edges_td, const ParamMap64& p,
                                   int t_dim, int classes, bool edge_inference) {
  const int n = static_cast<int>(x.size());
  std::vector<double> pooled;  // C_td then C_bu, concatenated

  for (const std::string dir : {"td", "bu"}) {
    EdgeList edges;
    if (dir == "td") {
      edges = edges_td;
    } else {
      for (const auto& [i, j] : edges_td) edges.emplace_back(j, i);
    }
    Mat a(n, std::vector<double>(n, 0.0));
    for (const auto& [i, j] : edges) a[i][j] = 1.0;

    Mat h = x;
    for (int layer = 1; layer <= 2; ++layer) {
      const std::string ep = "edge.l" + std::to_string(layer) + ".";
      if (edge_inference && !edges.empty()) {
        const Mat we = to_mat(p.at(ep + "feat.W"));
        const Mat be = to_mat(p.at(ep + "feat.b"));
        const Mat wg = to_mat(p.at(ep + "gate.W"));
        const Mat bg = to_mat(p.at(ep + "gate.b"));
        const int in_dim = static_cast<int>(we.size());
        for (const auto& [i, j] : edges) {
          std::vector<double> g(t_dim, 0.0);
          for (int t = 0; t < t_dim; ++t) {
            double acc = be[0][t];
            for (int c = 0; c < in_dim; ++c) acc += std::abs(h[i][c] - h[j][c]) * we[c][t];
            g[t] = std::max(acc, 0.0);
          }
          double gate = 0.0;
          for (int t = 0; t < t_dim; ++t) {
            double score = bg[0][t];
            for (int s = 0; s < t_dim; ++s) score += g[s] * wg[s][t];
            gate += sigmoid_s(score);
          }
          a[i][j] *= gate;
        }
      }

      // A_hat = D^{-1/2} (A + I) D^{-1/2}, D = row sums of A + I.
      Mat s = a;
      for (int i = 0; i < n; ++i) s[i][i] += 1.0;
      std::vector<double> deg(n, 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) deg[i] += s[i][j];
      Mat a_hat(n, std::vector<double>(n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a_hat[i][j] = s[i][j] / (std::sqrt(deg[i]) * std::sqrt(deg[j]));

      const Mat w = to_mat(p.at(dir + ".l" + std::to_string(layer) + ".W"));
      const Mat b = to_mat(p.at(dir + ".l" + std::to_string(layer) + ".b"));
      const int out_dim = static_cast<int>(w[0].size());
      Mat agg(n, std::vector<double>(h[0].size(), 0.0));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (std::size_t c = 0; c < h[0].size(); ++c) agg[i][c] += a_hat[i][j] * h[j][c];
      Mat next(n, std::vector<double>(out_dim, 0.0));
      for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_dim; ++o) {
          double acc = b[0][o];
          for (std::size_t c = 0; c < h[0].size(); ++c) acc += agg[i][c] * w[c][o];
          next[i][o] = std::max(acc, 0.0);
        }
      h = std::move(next);
    }

    for (std::size_t c = 0; c < h[0].size(); ++c) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += h[i][c];
      pooled.push_back(mean / n);
    }
  }

  const Mat wc = to_mat(p.at("cls.W"));
  const Mat bc = to_mat(p.at("cls.b"));
  std::vector<double> logits(classes);
  for (int c = 0; c < classes; ++c) {
    double acc = bc[0][c];
    for (std::size_t k = 0; k < pooled.size(); ++k) acc += pooled[k] * wc[k][c];
    logits[c] = acc;
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  std::vector<double> probs(classes);
  for (int c = 0; c < classes; ++c) {
    probs[c] = std::exp(logits[c] - mx);
    z += probs[c];
  }
  for (double& v : probs) v /= z;
  return probs;
}

cascade::PropagationGraph graph_from(const Tensor64& x, const EdgeList& edges) {
  cascade::Claim claim;
  claim.id = "t";
  claim.label = 0;
  for (int i = 0; i < x.rows(); ++i) claim.nodes.push_back({"u" + std::to_string(i), "", double(i)});
  claim.nodes[0].time_offset_minutes = 0.0;
  for (const auto& [i, j] : edges) claim.edges.push_back({i, j});
  return cascade::build_graph(claim, x);
}

void zero_edge_params(ParamMap64& params) {
  for (auto& [name, tensor] : params)
    if (name.rfind("edge.", 0) == 0)
      for (std::size_t i = 0; i < tensor.size(); ++i) tensor.at_flat(i) = 0.0;
}

}  // namespace

TEST_CASE("normalize_adjacency base cases") {
  Tape64 tape;

  SUBCASE("1x1 zero matrix maps to 1") {
    const int a = tape.input(Tensor64(1, 1));
    const int ahat = tape_normalize_adjacency(tape, a);
    CHECK(tape.value(ahat)(0, 0) == 1.0);
  }

  SUBCASE("2x2 single-edge case matches the literal formula oracle") {
    Tensor64 a(2, 2);
    a(0, 1) = 1.0;
    const int ahat = tape_normalize_adjacency(tape, tape.input(a));
    // Literal evaluation: A+I = [[1,1],[0,1]], D = diag(2,1),
    // A_hat[i][j] = (A+I)[i][j] / sqrt(D_i D_j).
    const Tensor64& v = tape.value(ahat);
    CHECK(testsupport::close(v(0, 0), 0.5, 1e-15));
    CHECK(testsupport::close(v(0, 1), 1.0 / std::sqrt(2.0), 1e-15));
    CHECK(v(1, 0) == 0.0);
    CHECK(testsupport::close(v(1, 1), 1.0, 1e-15));
  }

  SUBCASE("negative entries are rejected") {
    Tensor64 a(2, 2);
    a(1, 0) = -0.5;
    CHECK_THROWS_AS(tape_normalize_adjacency(tape, tape.input(a)), NumericError);
  }
}

TEST_CASE("normalize_adjacency is permutation-equivariant") {
  Rng rng(51);
  const int n = 6;
  Tensor64 a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && rng.uniform01() < 0.4) a(i, j) = rng.uniform(0.2, 2.0);

  std::vector<int> perm{3, 1, 5, 0, 2, 4};
  Tensor64 pa(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pa(perm[i], perm[j]) = a(i, j);

  Tape64 t1, t2;
  const Tensor64& norm_a = t1.value(tape_normalize_adjacency(t1, t1.input(a)));
  const Tensor64& norm_pa = t2.value(tape_normalize_adjacency(t2, t2.input(pa)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK(testsupport::close(norm_pa(perm[i], perm[j]), norm_a(i, j), 1e-12));
}

TEST_CASE("gcl_forward semantics") {
  Rng rng(52);

  SUBCASE("zero weights and bias give zero output") {
    Tape64 tape;
    const int ahat = tape_normalize_adjacency(tape, tape.input(Tensor64(3, 3)));
    const int h = tape.input(rand_tensor(rng, 3, 4));
    const int out = tape_gcl(tape, ahat, h, tape.input(Tensor64(4, 5)), tape.input(Tensor64(1, 5)));
    for (std::size_t i = 0; i < tape.value(out).size(); ++i) CHECK(tape.value(out).at_flat(i) == 0.0);
  }

  SUBCASE("identity pieces with non-negative features pass through") {
    Tape64 tape;
    const int ahat = tape.input(Tensor64::identity(3));
    const Tensor64 h = rand_tensor(rng, 3, 3, 0.0, 1.0);
    const int out =
        tape_gcl(tape, ahat, tape.input(h), tape.input(Tensor64::identity(3)), tape.input(Tensor64(1, 3)));
    CHECK(tape.value(out) == h);
  }

  SUBCASE("3-node chain matches a direct dense evaluation") {
    Tensor64 a(3, 3);
    a(0, 1) = 1.0;
    a(1, 2) = 1.0;
    const Tensor64 h = rand_tensor(rng, 3, 4);
    const Tensor64 w = rand_tensor(rng, 4, 5);
    const Tensor64 b = rand_tensor(rng, 1, 5);

    Tape64 tape;
    const int ahat = tape_normalize_adjacency(tape, tape.input(a));
    const int out = tape_gcl(tape, ahat, tape.input(h), tape.input(w), tape.input(b));

    // Independent recomputation with raw loops.
    const Tensor64& ahat_v = tape.value(ahat);
    for (int i = 0; i < 3; ++i)
      for (int o = 0; o < 5; ++o) {
        double acc = b(0, o);
        for (int j = 0; j < 3; ++j)
          for (int c = 0; c < 4; ++c) acc += ahat_v(i, j) * h(j, c) * w(c, o);
        CHECK(testsupport::close(tape.value(out)(i, o), std::max(acc, 0.0), 1e-12));
      }
  }
}

TEST_CASE("edge inference with zero parameters is the sigma(0) gate") {
  Rng rng(53);
  const EdgeList edges{{0, 1}, {0, 2}, {2, 3}};
  Tensor64 a(4, 4);
  for (const auto& [i, j] : edges) a(i, j) = rng.uniform(0.25, 2.0);
  const Tensor64 h = rand_tensor(rng, 4, 6);

  for (const int t_dim : {2, 3}) {
    ModelDims dims{6, 8, t_dim, 4};
    ParamMap64 params = init_params(dims, 99);
    zero_edge_params(params);

    Tape64 tape;
    const ParamNodeIds ids = register_params(tape, params);
    const EdgeHeads heads{ids.at("edge.l1.feat.W"), ids.at("edge.l1.feat.b"),
                          ids.at("edge.l1.gate.W"), ids.at("edge.l1.gate.b"),
                          ids.at("edge.l1.mu.W"),   ids.at("edge.l1.mu.b"),
                          ids.at("edge.l1.var.W"),  ids.at("edge.l1.var.b")};
    const EdgeInferenceOut out = tape_edge_inference(tape, tape.input(h), tape.input(a), edges,
                                                     heads, RunMode::Eval, -1);
    const Tensor64& a_new = tape.value(out.a_new);
    if (t_dim == 2) {
      CHECK(a_new == a);  // gate = 2 * sigma(0) = 1 exactly
    } else {
      for (const auto& [i, j] : edges) CHECK(a_new(i, j) == 1.5 * a(i, j));
    }
    // Support never grows.
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (a(i, j) == 0.0) CHECK(a_new(i, j) == 0.0);
  }
}

TEST_CASE("edge inference on a single random edge matches scalar hand evaluation") {
  Rng rng(54);
  const int in_dim = 5, t_dim = 3;
  ModelDims dims{in_dim, 8, t_dim, 4};
  const ParamMap64 params = init_params(dims, 1234);
  const EdgeList edges{{0, 1}};
  Tensor64 a(2, 2);
  a(0, 1) = 1.7;
  const Tensor64 h = rand_tensor(rng, 2, in_dim);

  Tape64 tape;
  const ParamNodeIds ids = register_params(tape, params);
  const EdgeHeads heads{ids.at("edge.l1.feat.W"), ids.at("edge.l1.feat.b"), ids.at("edge.l1.gate.W"),
                        ids.at("edge.l1.gate.b"), ids.at("edge.l1.mu.W"),   ids.at("edge.l1.mu.b"),
                        ids.at("edge.l1.var.W"),  ids.at("edge.l1.var.b")};
  const EdgeInferenceOut out =
      tape_edge_inference(tape, tape.input(h), tape.input(a), edges, heads, RunMode::Eval, -1);

  // Scalar oracle: recompute g, scores, sigmoids, and the posterior heads.
  const Tensor64& we = params.at("edge.l1.feat.W");
  const Tensor64& be = params.at("edge.l1.feat.b");
  const Tensor64& wg = params.at("edge.l1.gate.W");
  const Tensor64& bg = params.at("edge.l1.gate.b");
  std::vector<double> g(t_dim);
  for (int t = 0; t < t_dim; ++t) {
    double acc = be(0, t);
    for (int c = 0; c < in_dim; ++c) acc += std::abs(h(0, c) - h(1, c)) * we(c, t);
    g[t] = std::max(acc, 0.0);
  }
  double gate = 0.0;
  std::vector<double> scores(t_dim);
  for (int t = 0; t < t_dim; ++t) {
    scores[t] = bg(0, t);
    for (int s = 0; s < t_dim; ++s) scores[t] += g[s] * wg(s, t);
    gate += sigmoid_s(scores[t]);
  }
  CHECK(gate > 0.0);
  CHECK(gate < t_dim);
  CHECK(testsupport::close(tape.value(out.record.gate)(0, 0), gate, 1e-12));
  CHECK(testsupport::close(tape.value(out.a_new)(0, 1), gate * 1.7, 1e-12));

  // Likelihood row is softmax(scores); posterior variance is positive.
  double mx = std::max({scores[0], scores[1], scores[2]});
  double z = 0.0;
  for (int t = 0; t < t_dim; ++t) z += std::exp(scores[t] - mx);
  for (int t = 0; t < t_dim; ++t)
    CHECK(testsupport::close(tape.value(out.record.likelihood)(0, t), std::exp(scores[t] - mx) / z, 1e-12));
  for (int t = 0; t < t_dim; ++t) CHECK(tape.value(out.record.var)(0, t) > 0.0);
}

TEST_CASE("forward on a single-node graph pools that node's features") {
  ModelDims dims{5, 16, 3, 4};
  const ParamMap64 params = init_params(dims, 7);
  Rng rng(55);
  const cascade::PropagationGraph g = graph_from(rand_tensor(rng, 1, 5), {});

  Tape64 tape;
  const ParamNodeIds ids = register_params(tape, params);
  const ForwardResult fr = forward(tape, g, ids, dims, NetConfig{}, RunMode::Eval, 0);
  CHECK(fr.records.empty());

  const Tensor64& probs = tape.value(fr.probs);
  double sum = 0.0;
  for (int c = 0; c < 4; ++c) {
    CHECK(probs(0, c) >= 0.0);
    sum += probs(0, c);
  }
  CHECK(std::abs(sum - 1.0) <= 1e-9);
}

TEST_CASE("forward matches the straight-line oracle on an 8-node claim") {
  Rng rng(56);
  datagen::GenConfig gen;
  gen.claims_per_class = 1;
  gen.nodes_min = 8;
  gen.nodes_max = 8;
  gen.feature_dim = 12;
  gen.seed = 2024;
  const datagen::GeneratedData data = datagen::generate(gen);
  const cascade::PropagationGraph g =
      cascade::build_graph(data.dataset.claims[0], data.features.claim_rows(0));

  ModelDims dims{12, 16, 3, 4};
  const ParamMap64 params = init_params(dims, 31337);

  for (const bool edge_inference : {true, false}) {
    const ForwardValues fv =
        forward_values(g, params, dims, NetConfig{edge_inference}, RunMode::Eval, 0);
    const std::vector<double> oracle =
        oracle_forward(to_mat(g.features), g.edges_td, params, 3, 4, edge_inference);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(fv.probs(0, c) - oracle[c]) <= 1e-9);
  }
}

TEST_CASE("gate-disabled forward equals the plain bidirectional GCN") {
  // With zeroed edge parameters and T=2 the gates are exactly 1, so the
  // full model must agree bitwise-close with the edge_inference=false path.
  Rng rng(57);
  datagen::GenConfig gen;
  gen.claims_per_class = 2;
  gen.seed = 77;
  gen.feature_dim = 10;
  const datagen::GeneratedData data = datagen::generate(gen);

  ModelDims dims{10, 16, 2, 4};
  ParamMap64 params = init_params(dims, 13);
  zero_edge_params(params);

  for (int ci = 0; ci < 3; ++ci) {
    const cascade::PropagationGraph g =
        cascade::build_graph(data.dataset.claims[ci], data.features.claim_rows(ci));
    const ForwardValues with = forward_values(g, params, dims, NetConfig{true}, RunMode::Eval, 0);
    const ForwardValues without = forward_values(g, params, dims, NetConfig{false}, RunMode::Eval, 0);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(with.probs(0, c) - without.probs(0, c)) <= 1e-12);
  }
}

TEST_CASE("node permutations leave the prediction unchanged") {
  Rng rng(58);
  datagen::GenConfig gen;
  gen.claims_per_class = 3;
  gen.seed = 3;
  gen.feature_dim = 9;
  const datagen::GeneratedData data = datagen::generate(gen);
  ModelDims dims{9, 16, 3, 4};
  const ParamMap64 params = init_params(dims, 5);

  for (int ci = 0; ci < static_cast<int>(data.dataset.claims.size()); ++ci) {
    const cascade::PropagationGraph g =
        cascade::build_graph(data.dataset.claims[ci], data.features.claim_rows(ci));

    std::vector<int> perm(g.n);
    for (int i = 0; i < g.n; ++i) perm[i] = i;
    rng.shuffle(perm);

    cascade::PropagationGraph pg;
    pg.n = g.n;
    pg.features = Tensor64(g.n, g.features.cols());
    pg.a_td = Tensor64(g.n, g.n);
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.features.cols(); ++j) pg.features(perm[i], j) = g.features(i, j);
    for (const auto& [i, j] : g.edges_td) {
      pg.a_td(perm[i], perm[j]) = 1.0;
      pg.edges_td.emplace_back(perm[i], perm[j]);
    }
    pg.a_bu = num::transpose(pg.a_td);

    const ForwardValues base = forward_values(g, params, dims, NetConfig{}, RunMode::Eval, 0);
    const ForwardValues permuted = forward_values(pg, params, dims, NetConfig{}, RunMode::Eval, 0);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(base.logits(0, c) - permuted.logits(0, c)) <= 1e-9);
  }
}

TEST_CASE("gates stay strictly inside (0, T) on random inputs") {
  Rng rng(59);
  datagen::GenConfig gen;
  gen.claims_per_class = 2;
  gen.seed = 11;
  gen.feature_dim = 8;
  const datagen::GeneratedData data = datagen::generate(gen);
  for (int trial = 0; trial < 5; ++trial) {
    ModelDims dims{8, 12, 1 + static_cast<int>(rng.uniform_int(5)), 4};
    const ParamMap64 params = init_params(dims, derive_seed(2, trial));
    for (int ci = 0; ci < 4; ++ci) {
      const cascade::PropagationGraph g =
          cascade::build_graph(data.dataset.claims[ci], data.features.claim_rows(ci));
      const ForwardValues fv = forward_values(g, params, dims, NetConfig{}, RunMode::Eval, 0);
      for (const GateDump& dump : fv.gates) {
        CHECK(dump.gate > 0.0);
        CHECK(dump.gate < dims.relation_types);
      }
    }
  }
}
