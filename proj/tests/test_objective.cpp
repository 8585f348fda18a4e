#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ebgcn/datagen.hpp"
#include "ebgcn/errors.hpp"
#include "ebgcn/grad_check.hpp"
#include "ebgcn/network.hpp"
#include "ebgcn/objective.hpp"
#include "test_support.hpp"

using namespace ebgcn;
using namespace ebgcn::objective;
using net::EdgeRecord;
using num::ParamMap64;
using num::Tape64;
using num::Tensor64;
using testsupport::close;
using testsupport::rand_tensor;

namespace {

int input_ce(Tape64& tape, const std::vector<double>& probs, int y) {
  Tensor64 p(1, static_cast<int>(probs.size()));
  for (std::size_t i = 0; i < probs.size(); ++i) p(0, i) = probs[i];
  return tape_cross_entropy(tape, tape.input(p), y);
}

EdgeRecord record_from(Tape64& tape, const Tensor64& likelihood, const Tensor64& z) {
  EdgeRecord rec;
  rec.direction = "td";
  rec.layer = 1;
  for (int e = 0; e < likelihood.rows(); ++e) rec.edges.emplace_back(e, e + 1);
  rec.likelihood = tape.input(likelihood);
  rec.z = tape.input(z);
  return rec;
}

}  // namespace

TEST_CASE("cross entropy base cases") {
  Tape64 tape;

  SUBCASE("one-hot on the true class scores zero") {
    CHECK(tape.value(input_ce(tape, {0.0, 1.0, 0.0, 0.0}, 1))(0, 0) == 0.0);
  }

  SUBCASE("uniform over four classes scores ln 4") {
    CHECK(close(tape.value(input_ce(tape, {0.25, 0.25, 0.25, 0.25}, 2))(0, 0), std::log(4.0), 1e-12));
  }

  SUBCASE("two-claim batch averages the per-claim losses") {
    const double l1 = tape.value(input_ce(tape, {0.5, 0.5}, 0))(0, 0);
    const double l2 = tape.value(input_ce(tape, {0.25, 0.75}, 0))(0, 0);
    CHECK(close((l1 + l2) / 2.0, (std::log(2.0) + std::log(4.0)) / 2.0, 1e-12));
  }

  SUBCASE("invalid class index is rejected") {
    CHECK_THROWS_AS(input_ce(tape, {0.5, 0.5}, 2), DataError);
    CHECK_THROWS_AS(input_ce(tape, {0.5, 0.5}, -1), DataError);
    CHECK_THROWS_AS(cross_entropy_value(Tensor64(1, 3), 5), DataError);
  }
}

TEST_CASE("consistency loss is zero when the posterior mean equals the relation logits") {
  // mu heads copied from the gate heads make z = scores in eval mode, so
  // softmax(z) == likelihood exactly.
  net::ModelDims dims{6, 8, 3, 4};
  ParamMap64 params = net::init_params(dims, 5);
  for (int l = 1; l <= 2; ++l) {
    const std::string p = "edge.l" + std::to_string(l) + ".";
    params[p + "mu.W"] = params[p + "gate.W"];
    params[p + "mu.b"] = params[p + "gate.b"];
  }

  Rng rng(61);
  cascade::Claim claim;
  claim.id = "c";
  claim.label = 0;
  for (int i = 0; i < 4; ++i) claim.nodes.push_back({"u" + std::to_string(i), "", double(i)});
  claim.nodes[0].time_offset_minutes = 0.0;
  claim.edges = {{0, 1}, {0, 2}, {1, 3}};
  const cascade::PropagationGraph g = cascade::build_graph(claim, rand_tensor(rng, 4, 6));

  Tape64 tape;
  const net::ParamNodeIds ids = net::register_params(tape, params);
  const net::ForwardResult fr = net::forward(tape, g, ids, dims, net::NetConfig{}, net::RunMode::Eval, 0);
  REQUIRE(!fr.records.empty());
  const int le = tape_consistency_loss<double>(tape, fr.records);
  CHECK(tape.value(le)(0, 0) == 0.0);
}

TEST_CASE("KL of (1,0) against (0.5,0.5) is ln 2 under the log floor") {
  Tape64 tape;
  Tensor64 p(1, 2);
  p(0, 0) = 1.0;
  Tensor64 z(1, 2);  // softmax(0,0) = (0.5, 0.5)
  std::vector<EdgeRecord> records{record_from(tape, p, z)};
  const int le = tape_consistency_loss<double>(tape, records);
  CHECK(close(tape.value(le)(0, 0), std::log(2.0), 1e-12));
}

TEST_CASE("single random edge matches the scalar KL oracle") {
  Rng rng(62);
  Tape64 tape;
  const Tensor64 scores = rand_tensor(rng, 1, 3, -2.0, 2.0);
  const Tensor64 z = rand_tensor(rng, 1, 3, -2.0, 2.0);
  const Tensor64 p = num::row_softmax(scores);
  std::vector<EdgeRecord> records{record_from(tape, p, z)};
  const int le = tape_consistency_loss<double>(tape, records);

  // Straight-line recomputation.
  double mx = std::max({z(0, 0), z(0, 1), z(0, 2)});
  double denom = 0.0;
  for (int t = 0; t < 3; ++t) denom += std::exp(z(0, t) - mx);
  double kl = 0.0;
  for (int t = 0; t < 3; ++t) {
    const double q = std::exp(z(0, t) - mx) / denom;
    kl += p(0, t) * (std::log(p(0, t)) - std::log(q));
  }
  CHECK(close(tape.value(le)(0, 0), kl, 1e-12));
}

TEST_CASE("KL stays non-negative and ignores edge enumeration order") {
  Rng rng(63);
  for (int trial = 0; trial < 200; ++trial) {
    Tape64 tape;
    const int rows = 1 + static_cast<int>(rng.uniform_int(6));
    const int t_dim = 2 + static_cast<int>(rng.uniform_int(4));
    const Tensor64 scores = rand_tensor(rng, rows, t_dim, -4.0, 4.0);
    const Tensor64 z = rand_tensor(rng, rows, t_dim, -4.0, 4.0);
    const Tensor64 p = num::row_softmax(scores);

    std::vector<EdgeRecord> records{record_from(tape, p, z)};
    const double le = tape.value(tape_consistency_loss<double>(tape, records))(0, 0);
    CHECK(le >= -1e-12);

    // Reverse the row order: the mean over edges must not care.
    Tensor64 p_rev(rows, t_dim), z_rev(rows, t_dim);
    for (int e = 0; e < rows; ++e)
      for (int t = 0; t < t_dim; ++t) {
        p_rev(rows - 1 - e, t) = p(e, t);
        z_rev(rows - 1 - e, t) = z(e, t);
      }
    Tape64 tape2;
    std::vector<EdgeRecord> reversed{record_from(tape2, p_rev, z_rev)};
    const double le_rev = tape2.value(tape_consistency_loss<double>(tape2, reversed))(0, 0);
    CHECK(close(le, le_rev, 1e-12));
  }
}

TEST_CASE("graphs with zero edges contribute zero consistency loss") {
  Tape64 tape;
  std::vector<EdgeRecord> none;
  CHECK(tape.value(tape_consistency_loss<double>(tape, none))(0, 0) == 0.0);
}

TEST_CASE("total loss is the exact affine combination") {
  Tape64 tape;
  const int lc = tape.input(Tensor64::full(1, 1, 2.0));
  const int le = tape.input(Tensor64::full(1, 1, 1.0));

  CHECK(tape.value(tape_total_loss<double>(tape, lc, le, 1.0))(0, 0) == 2.0);
  CHECK(tape.value(tape_total_loss<double>(tape, lc, le, 0.0))(0, 0) == 1.0);
  CHECK(close(tape.value(tape_total_loss<double>(tape, lc, le, 0.3))(0, 0), 1.3, 1e-15));
  CHECK_THROWS_AS(tape_total_loss<double>(tape, lc, le, 1.5), ConfigError);
  CHECK_THROWS_AS(tape_total_loss<double>(tape, lc, le, -0.1), ConfigError);
  CHECK_THROWS_AS(LossBreakdown::combine(1.0, 1.0, 2.0), ConfigError);

  const LossBreakdown b = LossBreakdown::combine(2.0, 1.0, 0.3);
  CHECK(close(b.total, 1.3, 1e-15));
}

TEST_CASE("total loss is monotone in each component for fixed gamma") {
  for (double gamma : {0.25, 0.5, 0.75}) {
    const double base = LossBreakdown::combine(1.0, 1.0, gamma).total;
    CHECK(LossBreakdown::combine(1.5, 1.0, gamma).total > base);
    CHECK(LossBreakdown::combine(1.0, 1.5, gamma).total > base);
  }
}

TEST_CASE("combined objective is differentiable end to end") {
  datagen::GenConfig gen;
  gen.claims_per_class = 1;
  gen.nodes_min = 5;
  gen.nodes_max = 5;
  gen.feature_dim = 6;
  gen.seed = 606;
  const datagen::GeneratedData data = datagen::generate(gen);
  const cascade::PropagationGraph g =
      cascade::build_graph(data.dataset.claims[0], data.features.claim_rows(0));

  net::ModelDims dims{6, 8, 2, 4};
  const ParamMap64 params = net::init_params(dims, 17);
  const std::uint64_t noise_seed = 4242;
  const double gamma = 0.3;

  const auto build = [&](Tape64& tape, const ParamMap64& p) {
    const net::ParamNodeIds ids = net::register_params(tape, p);
    const net::ForwardResult fr =
        net::forward(tape, g, ids, dims, net::NetConfig{}, net::RunMode::Train, noise_seed);
    const int lc = tape_cross_entropy(tape, fr.probs, data.dataset.claims[0].label);
    const int le = tape_consistency_loss<double>(tape, fr.records);
    return tape_total_loss<double>(tape, lc, le, gamma);
  };
  const auto report = num::finite_difference_check(
      [&](const ParamMap64& p) {
        Tape64 t;
        return t.value(build(t, p))(0, 0);
      },
      [&](const ParamMap64& p) {
        Tape64 t;
        return t.backward(build(t, p));
      },
      params, 1e-5, 1e-4);
  INFO("max relative error ", report.max_rel_err);
  CHECK(report.passed);
}
