#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ebgcn/cascade.hpp"
#include "ebgcn/model.hpp"
#include "ebgcn/tape.hpp"

namespace ebgcn::net {

enum class RunMode { Train, Eval };

struct NetConfig {
  // When false, every gate is pinned to 1 and no edge records are produced:
  // the network reduces to a plain two-layer bidirectional GCN (the
  // ablation baseline).
  bool edge_inference = true;
};

// Tape handles for one (direction, layer) edge-inference pass. The
// consistency loss consumes `likelihood`, `z` and friends; diagnostics read
// the values behind `gate`.
struct EdgeRecord {
  std::string direction;  // "td" | "bu"
  int layer = 0;
  num::EdgeList edges;
  int g = -1;           // |E| x T relation features
  int scores = -1;      // |E| x T pre-sigmoid/softmax relation scores
  int likelihood = -1;  // |E| x T, rows on the T-simplex
  int mu = -1;          // |E| x T posterior means
  int var = -1;         // |E| x T posterior variances (> 0)
  int z = -1;           // |E| x T sampled (train) or mean (eval) logits
  int gate = -1;        // |E| x 1 edge weights in (0, T)
};

struct ForwardResult {
  int logits = -1;  // 1 x classes
  int probs = -1;   // 1 x classes, on the simplex
  std::vector<EdgeRecord> records;  // td.l1, td.l2, bu.l1, bu.l2; empty-edge passes omitted
};

using ParamNodeIds = std::map<std::string, int>;

template <typename T>
ParamNodeIds register_params(num::Tape<T>& tape, const num::ParamMap<T>& params);

// A_hat = D^{-1/2} (A + I) D^{-1/2} with D the diagonal of row sums of A+I.
// Rejects negative entries.
template <typename T>
int tape_normalize_adjacency(num::Tape<T>& tape, int a);

// One graph-convolutional layer: relu(A_hat * H * W + b).
template <typename T>
int tape_gcl(num::Tape<T>& tape, int a_hat, int h, int w, int b);

struct EdgeHeads {
  int feat_w, feat_b, gate_w, gate_b, mu_w, mu_b, var_w, var_b;
};

struct EdgeInferenceOut {
  int a_new = -1;
  EdgeRecord record;
};

// Per original edge (i,j): g = relu(feat(|h_i - h_j|)); the edge weight is
// sum_t sigmoid(score_t) applied multiplicatively to A_prev on the original
// support only. `noise` must be an |E| x T input node in train mode, -1 in
// eval mode.
template <typename T>
EdgeInferenceOut tape_edge_inference(num::Tape<T>& tape, int h_prev, int a_prev,
                                     const num::EdgeList& edges, const EdgeHeads& heads,
                                     RunMode mode, int noise);

// Full forward pass: per direction, two (edge inference -> normalize ->
// GCL) blocks, mean pooling, and the softmax classifier over the
// concatenated graph embeddings. Pure given (params, seed); train mode
// draws reparameterization noise from the seed.
template <typename T>
ForwardResult forward(num::Tape<T>& tape, const cascade::PropagationGraph& graph,
                      const ParamNodeIds& ids, const ModelDims& dims, const NetConfig& cfg,
                      RunMode mode, std::uint64_t seed);

// Convenience non-tape view of a forward pass for evaluation and dumps.
struct GateDump {
  std::string direction;
  int layer;
  int parent, child;
  double gate;
};

struct ForwardValues {
  Tensor64 logits;
  Tensor64 probs;
  std::vector<GateDump> gates;
};

ForwardValues forward_values(const cascade::PropagationGraph& graph, const ParamMap64& params,
                             const ModelDims& dims, const NetConfig& cfg, RunMode mode,
                             std::uint64_t seed);

}  // namespace ebgcn::net
