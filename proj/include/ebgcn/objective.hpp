#pragma once

#include <vector>

#include "ebgcn/network.hpp"
#include "ebgcn/tape.hpp"

namespace ebgcn::objective {

struct LossBreakdown {
  double lc = 0.0;
  double le = 0.0;
  double total = 0.0;
  double gamma = 1.0;

  static LossBreakdown combine(double lc, double le, double gamma);
};

// -log probs[true_class], floored. `probs` must be a 1 x classes simplex row.
template <typename T>
int tape_cross_entropy(num::Tape<T>& tape, int probs, int true_class);

// Mean over every edge, layer, and direction of KL(p || softmax(z)) between
// the relation likelihood and the sampled posterior. Returns the 1x1 loss
// node; a pass with no edge records contributes zero.
template <typename T>
int tape_consistency_loss(num::Tape<T>& tape, const std::vector<net::EdgeRecord>& records);

// gamma * L_c + (1 - gamma) * L_e, gamma in [0, 1].
template <typename T>
int tape_total_loss(num::Tape<T>& tape, int lc, int le, double gamma);

// Scalar conveniences for reporting paths that already have values in hand.
double cross_entropy_value(const num::Tensor64& probs, int true_class);

}  // namespace ebgcn::objective
