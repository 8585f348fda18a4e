#include "ebgcn/tape.hpp"

#include <cmath>
#include <utility>

namespace ebgcn::num {

template <typename T>
typename Tape<T>::NodeId Tape<T>::push(Node n) {
  if (n.op != Op::Input && n.op != Op::Param) n.val = eval(n);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
void Tape<T>::check_id(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) throw NumericError("tape: bad node id");
}

template <typename T>
Tensor<T> Tape<T>::eval(const Node& n) const {
  switch (n.op) {
    case Op::Input:
    case Op::Param:
      return n.val;
    case Op::MatMul:
      return num::matmul(nodes_[n.a].val, nodes_[n.b].val);
    case Op::Add:
      return num::add(nodes_[n.a].val, nodes_[n.b].val);
    case Op::AddRowBcast:
      return num::add_row_broadcast(nodes_[n.a].val, nodes_[n.b].val);
    case Op::AddConst:
      return num::add_const(nodes_[n.a].val, n.cval);
    case Op::Mul:
      return num::mul(nodes_[n.a].val, nodes_[n.b].val);
    case Op::Sigmoid:
      return num::sigmoid(nodes_[n.a].val);
    case Op::Relu:
      return num::relu(nodes_[n.a].val);
    case Op::Softplus:
      return num::softplus(nodes_[n.a].val);
    case Op::Sqrt:
      return num::elem_sqrt(nodes_[n.a].val);
    case Op::Rsqrt:
      return num::rsqrt(nodes_[n.a].val);
    case Op::Log:
      return num::log_floored(nodes_[n.a].val);
    case Op::RowSoftmax:
      return num::row_softmax(nodes_[n.a].val);
    case Op::MeanRows:
      return num::mean_rows(nodes_[n.a].val);
    case Op::SumAll:
      return num::sum_all(nodes_[n.a].val);
    case Op::ConcatCols:
      return num::concat_cols(nodes_[n.a].val, nodes_[n.b].val);
    case Op::ScaleConst:
      return num::scale(nodes_[n.a].val, n.cval);
    case Op::ScaleNode: {
      const Tensor<T>& s = nodes_[n.b].val;
      if (s.rows() != 1 || s.cols() != 1) throw NumericError("tape: scale_by expects 1x1 scalar node");
      return num::scale(nodes_[n.a].val, s(0, 0));
    }
    case Op::Transpose:
      return num::transpose(nodes_[n.a].val);
    case Op::EdgeAbsDiff:
      return num::edge_abs_diff(nodes_[n.a].val, n.edges);
    case Op::EdgeScaleAdj:
      return num::edge_scale_adjacency(nodes_[n.a].val, nodes_[n.b].val, n.edges);
  }
  throw NumericError("tape: unknown op");
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::input(Tensor<T> value) {
  Node n;
  n.op = Op::Input;
  n.val = std::move(value);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::param(Tensor<T> value, const std::string& name) {
  Node n;
  n.op = Op::Param;
  n.val = std::move(value);
  n.name = name;
  return push(std::move(n));
}

#define EBGCN_TAPE_UNARY(method, opname)                          \
  template <typename T>                                           \
  typename Tape<T>::NodeId Tape<T>::method(NodeId a) {            \
    check_id(a);                                                  \
    Node n;                                                       \
    n.op = Op::opname;                                            \
    n.a = a;                                                      \
    return push(std::move(n));                                    \
  }

EBGCN_TAPE_UNARY(sigmoid, Sigmoid)
EBGCN_TAPE_UNARY(relu, Relu)
EBGCN_TAPE_UNARY(softplus, Softplus)
EBGCN_TAPE_UNARY(sqrt, Sqrt)
EBGCN_TAPE_UNARY(rsqrt, Rsqrt)
EBGCN_TAPE_UNARY(log, Log)
EBGCN_TAPE_UNARY(row_softmax, RowSoftmax)
EBGCN_TAPE_UNARY(mean_rows, MeanRows)
EBGCN_TAPE_UNARY(sum, SumAll)
EBGCN_TAPE_UNARY(transpose, Transpose)
#undef EBGCN_TAPE_UNARY

#define EBGCN_TAPE_BINARY(method, opname)                         \
  template <typename T>                                           \
  typename Tape<T>::NodeId Tape<T>::method(NodeId a, NodeId b) {  \
    check_id(a);                                                  \
    check_id(b);                                                  \
    Node n;                                                       \
    n.op = Op::opname;                                            \
    n.a = a;                                                      \
    n.b = b;                                                      \
    return push(std::move(n));                                    \
  }

EBGCN_TAPE_BINARY(matmul, MatMul)
EBGCN_TAPE_BINARY(add, Add)
EBGCN_TAPE_BINARY(add_row_broadcast, AddRowBcast)
EBGCN_TAPE_BINARY(mul, Mul)
EBGCN_TAPE_BINARY(concat_cols, ConcatCols)
EBGCN_TAPE_BINARY(scale_by, ScaleNode)
#undef EBGCN_TAPE_BINARY

template <typename T>
typename Tape<T>::NodeId Tape<T>::add_const(NodeId a, T c) {
  check_id(a);
  Node n;
  n.op = Op::AddConst;
  n.a = a;
  n.cval = c;
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::scale(NodeId a, T c) {
  check_id(a);
  Node n;
  n.op = Op::ScaleConst;
  n.a = a;
  n.cval = c;
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::edge_abs_diff(NodeId h, EdgeList edges) {
  check_id(h);
  Node n;
  n.op = Op::EdgeAbsDiff;
  n.a = h;
  n.edges = std::move(edges);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::edge_scale_adjacency(NodeId gate, NodeId a_prev, EdgeList edges) {
  check_id(gate);
  check_id(a_prev);
  Node n;
  n.op = Op::EdgeScaleAdj;
  n.a = gate;
  n.b = a_prev;
  n.edges = std::move(edges);
  return push(std::move(n));
}

template <typename T>
ParamMap<T> Tape<T>::backward(NodeId loss) const {
  check_id(loss);
  const Tensor<T>& lv = nodes_[loss].val;
  if (lv.rows() != 1 || lv.cols() != 1) throw NumericError("backward: loss must be scalar");

  std::vector<Tensor<T>> adj(nodes_.size());
  auto bump = [&](int id, int r, int c) -> Tensor<T>& {
    if (adj[id].size() == 0) adj[id] = Tensor<T>(r, c);
    return adj[id];
  };
  bump(loss, 1, 1)(0, 0) = T(1);

  for (int id = loss; id >= 0; --id) {
    if (adj[id].size() == 0) continue;  // loss does not depend on this node
    const Node& n = nodes_[id];
    const Tensor<T>& g = adj[id];
    const Tensor<T>& y = n.val;
    switch (n.op) {
      case Op::Input:
      case Op::Param:
        break;
      case Op::MatMul: {
        const Tensor<T>& a = nodes_[n.a].val;
        const Tensor<T>& b = nodes_[n.b].val;
        Tensor<T>& ga = bump(n.a, a.rows(), a.cols());
        Tensor<T> da = num::matmul(g, num::transpose(b));
        for (std::size_t i = 0; i < ga.size(); ++i) ga.at_flat(i) += da.at_flat(i);
        Tensor<T>& gb = bump(n.b, b.rows(), b.cols());
        Tensor<T> db = num::matmul(num::transpose(a), g);
        for (std::size_t i = 0; i < gb.size(); ++i) gb.at_flat(i) += db.at_flat(i);
        break;
      }
      case Op::Add: {
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga.at_flat(i) += g.at_flat(i);
        Tensor<T>& gb = bump(n.b, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) gb.at_flat(i) += g.at_flat(i);
        break;
      }
      case Op::AddRowBcast: {
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga.at_flat(i) += g.at_flat(i);
        Tensor<T>& gb = bump(n.b, 1, g.cols());
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
        break;
      }
      case Op::AddConst: {
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga.at_flat(i) += g.at_flat(i);
        break;
      }
      case Op::Mul: {
        const Tensor<T>& a = nodes_[n.a].val;
        const Tensor<T>& b = nodes_[n.b].val;
        Tensor<T>& ga = bump(n.a, a.rows(), a.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga.at_flat(i) += g.at_flat(i) * b.at_flat(i);
        Tensor<T>& gb = bump(n.b, b.rows(), b.cols());
        for (std::size_t i = 0; i < g.size(); ++i) gb.at_flat(i) += g.at_flat(i) * a.at_flat(i);
        break;
      }
      case Op::Sigmoid: {
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga.at_flat(i) += g.at_flat(i) * y.at_flat(i) * (T(1) - y.at_flat(i));
        break;
      }
      case Op::Relu: {
        const Tensor<T>& x = nodes_[n.a].val;
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x.at_flat(i) > T(0)) ga.at_flat(i) += g.at_flat(i);
        break;
      }
      case Op::Softplus: {
        const Tensor<T>& x = nodes_[n.a].val;
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga.at_flat(i) += g.at_flat(i) / (T(1) + std::exp(-x.at_flat(i)));
        break;
      }
      case Op::Sqrt: {
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga.at_flat(i) += g.at_flat(i) * T(0.5) / y.at_flat(i);
        break;
      }
      case Op::Rsqrt: {
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga.at_flat(i) += g.at_flat(i) * T(-0.5) * y.at_flat(i) * y.at_flat(i) * y.at_flat(i);
        break;
      }
      case Op::Log: {
        const Tensor<T>& x = nodes_[n.a].val;
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x.at_flat(i) > static_cast<T>(kLogFloor)) ga.at_flat(i) += g.at_flat(i) / x.at_flat(i);
        break;
      }
      case Op::RowSoftmax: {
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (int i = 0; i < g.rows(); ++i) {
          T dot = T(0);
          for (int j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
          for (int j = 0; j < g.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
        }
        break;
      }
      case Op::MeanRows: {
        const Tensor<T>& x = nodes_[n.a].val;
        Tensor<T>& ga = bump(n.a, x.rows(), x.cols());
        const T inv = T(1) / static_cast<T>(x.rows());
        for (int i = 0; i < x.rows(); ++i)
          for (int j = 0; j < x.cols(); ++j) ga(i, j) += g(0, j) * inv;
        break;
      }
      case Op::SumAll: {
        const Tensor<T>& x = nodes_[n.a].val;
        Tensor<T>& ga = bump(n.a, x.rows(), x.cols());
        for (std::size_t i = 0; i < ga.size(); ++i) ga.at_flat(i) += g(0, 0);
        break;
      }
      case Op::ConcatCols: {
        const Tensor<T>& a = nodes_[n.a].val;
        const Tensor<T>& b = nodes_[n.b].val;
        Tensor<T>& ga = bump(n.a, a.rows(), a.cols());
        Tensor<T>& gb = bump(n.b, b.rows(), b.cols());
        for (int i = 0; i < g.rows(); ++i) {
          for (int j = 0; j < a.cols(); ++j) ga(i, j) += g(i, j);
          for (int j = 0; j < b.cols(); ++j) gb(i, j) += g(i, a.cols() + j);
        }
        break;
      }
      case Op::ScaleConst: {
        Tensor<T>& ga = bump(n.a, g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga.at_flat(i) += n.cval * g.at_flat(i);
        break;
      }
      case Op::ScaleNode: {
        const Tensor<T>& a = nodes_[n.a].val;
        const T s = nodes_[n.b].val(0, 0);
        Tensor<T>& ga = bump(n.a, a.rows(), a.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga.at_flat(i) += s * g.at_flat(i);
        Tensor<T>& gs = bump(n.b, 1, 1);
        for (std::size_t i = 0; i < g.size(); ++i) gs(0, 0) += g.at_flat(i) * a.at_flat(i);
        break;
      }
      case Op::Transpose: {
        const Tensor<T>& x = nodes_[n.a].val;
        Tensor<T>& ga = bump(n.a, x.rows(), x.cols());
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
        break;
      }
      case Op::EdgeAbsDiff: {
        const Tensor<T>& h = nodes_[n.a].val;
        Tensor<T>& gh = bump(n.a, h.rows(), h.cols());
        for (std::size_t e = 0; e < n.edges.size(); ++e) {
          const auto [i, j] = n.edges[e];
          for (int c = 0; c < h.cols(); ++c) {
            const T d = h(i, c) - h(j, c);
            const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
            gh(i, c) += g(static_cast<int>(e), c) * s;
            gh(j, c) -= g(static_cast<int>(e), c) * s;
          }
        }
        break;
      }
      case Op::EdgeScaleAdj: {
        const Tensor<T>& gate = nodes_[n.a].val;
        const Tensor<T>& aprev = nodes_[n.b].val;
        Tensor<T>& ggate = bump(n.a, gate.rows(), 1);
        Tensor<T>& gaprev = bump(n.b, aprev.rows(), aprev.cols());
        for (std::size_t e = 0; e < n.edges.size(); ++e) {
          const auto [i, j] = n.edges[e];
          ggate(static_cast<int>(e), 0) += g(i, j) * aprev(i, j);
          gaprev(i, j) += g(i, j) * gate(static_cast<int>(e), 0);
        }
        break;
      }
    }
  }

  ParamMap<T> grads;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op != Op::Param) continue;
    if (adj[id].size() != 0)
      grads[nodes_[id].name] = std::move(adj[id]);
    else
      grads[nodes_[id].name] = Tensor<T>(nodes_[id].val.rows(), nodes_[id].val.cols());
  }
  return grads;
}

template <typename T>
bool Tape<T>::replay_matches() const {
  for (const Node& n : nodes_)
    if (!(eval(n) == n.val)) return false;
  return true;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace ebgcn::num
