#include "ebgcn/network.hpp"

#include "ebgcn/errors.hpp"
#include "ebgcn/rng.hpp"

namespace ebgcn::net {

using num::EdgeList;
using num::Tape;
using num::Tensor;

template <typename T>
ParamNodeIds register_params(Tape<T>& tape, const num::ParamMap<T>& params) {
  ParamNodeIds ids;
  for (const auto& [name, tensor] : params) ids[name] = tape.param(tensor, name);
  return ids;
}

template <typename T>
int tape_normalize_adjacency(Tape<T>& tape, int a) {
  const Tensor<T>& av = tape.value(a);
  if (av.rows() != av.cols()) throw NumericError("normalize_adjacency: matrix must be square");
  for (std::size_t i = 0; i < av.size(); ++i)
    if (av.at_flat(i) < T(0)) throw NumericError("normalize_adjacency: negative entry");
  const int n = av.rows();
  const int with_loops = tape.add(a, tape.input(Tensor<T>::identity(n)));
  const int degrees = tape.matmul(with_loops, tape.input(Tensor<T>::full(n, 1, T(1))));
  const int inv_sqrt = tape.rsqrt(degrees);
  const int outer = tape.matmul(inv_sqrt, tape.transpose(inv_sqrt));
  return tape.mul(outer, with_loops);
}

template <typename T>
int tape_gcl(Tape<T>& tape, int a_hat, int h, int w, int b) {
  return tape.relu(tape.add_row_broadcast(tape.matmul(tape.matmul(a_hat, h), w), b));
}

template <typename T>
EdgeInferenceOut tape_edge_inference(Tape<T>& tape, int h_prev, int a_prev,
                                     const EdgeList& edges, const EdgeHeads& heads,
                                     RunMode mode, int noise) {
  if (edges.empty()) throw NumericError("edge_inference: empty edge list");
  const int t_dim = tape.value(heads.gate_b).cols();

  EdgeInferenceOut out;
  EdgeRecord& rec = out.record;
  rec.edges = edges;

  const int diffs = tape.edge_abs_diff(h_prev, edges);
  rec.g = tape.relu(tape.add_row_broadcast(tape.matmul(diffs, heads.feat_w), heads.feat_b));
  rec.scores = tape.add_row_broadcast(tape.matmul(rec.g, heads.gate_w), heads.gate_b);

  const int ones_t = tape.input(Tensor<T>::full(t_dim, 1, T(1)));
  rec.gate = tape.matmul(tape.sigmoid(rec.scores), ones_t);
  out.a_new = tape.edge_scale_adjacency(rec.gate, a_prev, edges);

  rec.likelihood = tape.row_softmax(rec.scores);
  rec.mu = tape.add_row_broadcast(tape.matmul(rec.g, heads.mu_w), heads.mu_b);
  rec.var = tape.add_const(tape.softplus(tape.add_row_broadcast(tape.matmul(rec.g, heads.var_w), heads.var_b)),
                           T(1e-6));
  if (mode == RunMode::Train) {
    if (noise < 0) throw NumericError("edge_inference: train mode needs a noise node");
    rec.z = tape.add(rec.mu, tape.mul(tape.sqrt(rec.var), noise));
  } else {
    rec.z = rec.mu;
  }
  return out;
}

namespace {

EdgeHeads heads_for_layer(const ParamNodeIds& ids, int layer) {
  const std::string p = "edge.l" + std::to_string(layer) + ".";
  return {ids.at(p + "feat.W"), ids.at(p + "feat.b"), ids.at(p + "gate.W"), ids.at(p + "gate.b"),
          ids.at(p + "mu.W"),   ids.at(p + "mu.b"),   ids.at(p + "var.W"),  ids.at(p + "var.b")};
}

template <typename T>
Tensor<T> draw_noise(Rng& rng, int rows, int cols) {
  Tensor<T> noise(rows, cols);
  for (std::size_t i = 0; i < noise.size(); ++i) noise.at_flat(i) = static_cast<T>(rng.gaussian());
  return noise;
}

}  // namespace

template <typename T>
ForwardResult forward(Tape<T>& tape, const cascade::PropagationGraph& graph,
                      const ParamNodeIds& ids, const ModelDims& dims, const NetConfig& cfg,
                      RunMode mode, std::uint64_t seed) {
  if (graph.features.cols() != dims.in_dim)
    throw NumericError("forward: feature dim " + std::to_string(graph.features.cols()) +
                       " != model in_dim " + std::to_string(dims.in_dim));

  Rng rng(seed);
  const int x = tape.input(graph.features.template cast<T>());

  ForwardResult result;
  std::vector<int> pooled;
  for (const char* dir : {"td", "bu"}) {
    const bool top_down = dir[0] == 't';
    EdgeList edges;
    if (top_down) {
      edges = graph.edges_td;
    } else {
      for (const auto& [i, j] : graph.edges_td) edges.emplace_back(j, i);
    }
    int a = tape.input((top_down ? graph.a_td : graph.a_bu).template cast<T>());
    int h = x;
    for (int layer = 1; layer <= 2; ++layer) {
      if (cfg.edge_inference && !edges.empty()) {
        int noise = -1;
        if (mode == RunMode::Train)
          noise = tape.input(draw_noise<T>(rng, static_cast<int>(edges.size()), dims.relation_types));
        EdgeInferenceOut ei =
            tape_edge_inference(tape, h, a, edges, heads_for_layer(ids, layer), mode, noise);
        ei.record.direction = dir;
        ei.record.layer = layer;
        result.records.push_back(std::move(ei.record));
        a = ei.a_new;
      }
      const int a_hat = tape_normalize_adjacency(tape, a);
      const std::string p = std::string(dir) + ".l" + std::to_string(layer) + ".";
      h = tape_gcl(tape, a_hat, h, ids.at(p + "W"), ids.at(p + "b"));
    }
    pooled.push_back(tape.mean_rows(h));
  }

  const int graph_repr = tape.concat_cols(pooled[0], pooled[1]);
  result.logits = tape.add_row_broadcast(tape.matmul(graph_repr, ids.at("cls.W")), ids.at("cls.b"));
  result.probs = tape.row_softmax(result.logits);
  return result;
}

ForwardValues forward_values(const cascade::PropagationGraph& graph, const ParamMap64& params,
                             const ModelDims& dims, const NetConfig& cfg, RunMode mode,
                             std::uint64_t seed) {
  num::Tape64 tape;
  const ParamNodeIds ids = register_params(tape, params);
  const ForwardResult fr = forward(tape, graph, ids, dims, cfg, mode, seed);

  ForwardValues out;
  out.logits = tape.value(fr.logits);
  out.probs = tape.value(fr.probs);
  for (const EdgeRecord& rec : fr.records) {
    const Tensor64& gate = tape.value(rec.gate);
    for (std::size_t e = 0; e < rec.edges.size(); ++e)
      out.gates.push_back({rec.direction, rec.layer, rec.edges[e].first, rec.edges[e].second,
                           gate(static_cast<int>(e), 0)});
  }
  return out;
}

#define EBGCN_INSTANTIATE_NET(T)                                                                 \
  template ParamNodeIds register_params(Tape<T>&, const num::ParamMap<T>&);                      \
  template int tape_normalize_adjacency(Tape<T>&, int);                                          \
  template int tape_gcl(Tape<T>&, int, int, int, int);                                           \
  template EdgeInferenceOut tape_edge_inference(Tape<T>&, int, int, const EdgeList&,             \
                                                const EdgeHeads&, RunMode, int);                 \
  template ForwardResult forward(Tape<T>&, const cascade::PropagationGraph&, const ParamNodeIds&, \
                                 const ModelDims&, const NetConfig&, RunMode, std::uint64_t);

EBGCN_INSTANTIATE_NET(float)
EBGCN_INSTANTIATE_NET(double)
#undef EBGCN_INSTANTIATE_NET

}  // namespace ebgcn::net
