#include "ebgcn/objective.hpp"

#include <cmath>

#include "ebgcn/errors.hpp"

namespace ebgcn::objective {

using num::Tape;
using num::Tensor;

LossBreakdown combine_checked(double lc, double le, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
  LossBreakdown out;
  out.lc = lc;
  out.le = le;
  out.gamma = gamma;
  out.total = gamma * lc + (1.0 - gamma) * le;
  return out;
}

LossBreakdown LossBreakdown::combine(double lc, double le, double gamma) {
  return combine_checked(lc, le, gamma);
}

template <typename T>
int tape_cross_entropy(Tape<T>& tape, int probs, int true_class) {
  const Tensor<T>& p = tape.value(probs);
  if (p.rows() != 1) throw NumericError("cross_entropy: expected a single probability row");
  if (true_class < 0 || true_class >= p.cols())
    throw DataError("cross_entropy: class index " + std::to_string(true_class) + " out of range");
  Tensor<T> onehot(1, p.cols());
  onehot(0, true_class) = T(1);
  const int picked = tape.sum(tape.mul(probs, tape.input(std::move(onehot))));
  return tape.scale(tape.log(picked), T(-1));
}

template <typename T>
int tape_consistency_loss(Tape<T>& tape, const std::vector<net::EdgeRecord>& records) {
  long long total_edges = 0;
  int acc = -1;
  for (const net::EdgeRecord& rec : records) {
    if (rec.edges.empty()) continue;
    total_edges += static_cast<long long>(rec.edges.size());
    const int q = tape.row_softmax(rec.z);
    const int kl_terms = tape.mul(rec.likelihood, tape.sub(tape.log(rec.likelihood), tape.log(q)));
    const int kl_sum = tape.sum(kl_terms);
    acc = acc < 0 ? kl_sum : tape.add(acc, kl_sum);
  }
  if (acc < 0) return tape.input(Tensor<T>(1, 1));  // no relations observed
  return tape.scale(acc, T(1) / static_cast<T>(total_edges));
}

template <typename T>
int tape_total_loss(Tape<T>& tape, int lc, int le, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
  return tape.add(tape.scale(lc, static_cast<T>(gamma)), tape.scale(le, static_cast<T>(1.0 - gamma)));
}

double cross_entropy_value(const num::Tensor64& probs, int true_class) {
  if (probs.rows() != 1) throw NumericError("cross_entropy: expected a single probability row");
  if (true_class < 0 || true_class >= probs.cols())
    throw DataError("cross_entropy: class index " + std::to_string(true_class) + " out of range");
  return -std::log(std::max(probs(0, true_class), num::kLogFloor));
}

#define EBGCN_INSTANTIATE_OBJ(T)                                                          \
  template int tape_cross_entropy(Tape<T>&, int, int);                                    \
  template int tape_consistency_loss(Tape<T>&, const std::vector<net::EdgeRecord>&);      \
  template int tape_total_loss(Tape<T>&, int, int, double);

EBGCN_INSTANTIATE_OBJ(float)
EBGCN_INSTANTIATE_OBJ(double)
#undef EBGCN_INSTANTIATE_OBJ

}  // namespace ebgcn::objective
