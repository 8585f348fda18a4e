#pragma once

#include <map>
#include <string>
#include <vector>

#include "ebgcn/kernels.hpp"
#include "ebgcn/tensor.hpp"

namespace ebgcn::num {

template <typename T>
using ParamMap = std::map<std::string, Tensor<T>>;

// Eager tape: every op executes immediately through the kernel set and
// records enough to evaluate the adjoint of a scalar loss with respect to
// any marked parameter. Adjoints accumulate additively over fan-out. A tape
// belongs to one thread.
template <typename T>
class Tape {
 public:
  using NodeId = int;

  NodeId input(Tensor<T> value);
  NodeId param(Tensor<T> value, const std::string& name);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId add_row_broadcast(NodeId a, NodeId bias);
  NodeId add_const(NodeId a, T c);
  NodeId mul(NodeId a, NodeId b);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  NodeId softplus(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId rsqrt(NodeId a);
  NodeId log(NodeId a);  // floored at kLogFloor
  NodeId row_softmax(NodeId a);
  NodeId mean_rows(NodeId a);
  NodeId sum(NodeId a);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId scale(NodeId a, T c);
  NodeId scale_by(NodeId a, NodeId scalar);  // scalar is a 1x1 node
  NodeId transpose(NodeId a);
  NodeId edge_abs_diff(NodeId h, EdgeList edges);
  NodeId edge_scale_adjacency(NodeId gate, NodeId a_prev, EdgeList edges);

  NodeId sub(NodeId a, NodeId b) { return add(a, scale(b, T(-1))); }

  const Tensor<T>& value(NodeId id) const { return nodes_[id].val; }
  std::size_t size() const { return nodes_.size(); }

  // d(loss)/d(param) for every marked parameter; parameters the loss does
  // not reach get zero gradients. Throws on a non-scalar loss node.
  ParamMap<T> backward(NodeId loss) const;

  // Re-executes the recorded ops and checks outputs are bitwise identical.
  bool replay_matches() const;

 private:
  enum class Op {
    Input, Param, MatMul, Add, AddRowBcast, AddConst, Mul, Sigmoid, Relu,
    Softplus, Sqrt, Rsqrt, Log, RowSoftmax, MeanRows, SumAll, ConcatCols,
    ScaleConst, ScaleNode, Transpose, EdgeAbsDiff, EdgeScaleAdj,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    T cval = T(0);
    Tensor<T> val;
    EdgeList edges;  // EdgeAbsDiff / EdgeScaleAdj only
    std::string name;  // Param only
  };

  NodeId push(Node n);
  Tensor<T> eval(const Node& n) const;
  void check_id(NodeId id) const;

  std::vector<Node> nodes_;
};

using Tape64 = Tape<double>;
using Tape32 = Tape<float>;
using ParamMap64 = ParamMap<double>;
using ParamMap32 = ParamMap<float>;

}  // namespace ebgcn::num
