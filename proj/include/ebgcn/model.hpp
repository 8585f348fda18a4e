#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ebgcn/tape.hpp"

namespace ebgcn::net {

using num::ParamMap64;
using num::Tensor64;

struct ModelDims {
  int in_dim = 0;           // d0
  int hidden = 64;
  int relation_types = 3;   // T
  int classes = 4;

  bool operator==(const ModelDims& o) const {
    return in_dim == o.in_dim && hidden == o.hidden && relation_types == o.relation_types &&
           classes == o.classes;
  }
};

// Parameter names, in the fixed (alphabetical) order every consumer
// iterates in. Per-direction GCL weights; edge-inference and posterior
// heads shared across directions but per-layer; classifier on the
// [C_td ; C_bu] concatenation.
std::vector<std::string> param_names(const ModelDims& dims);

// Glorot-uniform weights, zero biases, deterministic under seed.
ParamMap64 init_params(const ModelDims& dims, std::uint64_t seed);

struct Checkpoint {
  ModelDims dims;
  std::vector<std::string> labels;
  std::string feature_mode;  // "tfidf" | "embeddings"
  bool edge_inference = true;
  int epoch = 0;
  long long adam_step = 0;
  ParamMap64 params;
  ParamMap64 adam_m;  // empty when no optimizer state is stored
  ParamMap64 adam_v;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ebgcn::net
