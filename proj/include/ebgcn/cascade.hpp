#pragma once

#include <string>
#include <vector>

#include "ebgcn/kernels.hpp"
#include "ebgcn/tensor.hpp"

namespace ebgcn::cascade {

using num::Tensor64;

struct LabelSet {
  std::vector<std::string> names;

  int index_of(const std::string& name) const;
  int size() const { return static_cast<int>(names.size()); }

  static LabelSet four_class() { return {{"NR", "F", "T", "U"}}; }
  static LabelSet three_class() { return {{"F", "T", "U"}}; }
  static LabelSet parse(const std::string& comma_separated);
};

struct TweetNode {
  std::string uid;
  std::string text;
  double time_offset_minutes = 0.0;
};

struct Edge {
  int parent = -1;
  int child = -1;
  bool operator==(const Edge& o) const { return parent == o.parent && child == o.child; }
};

// One labeled cascade. Node 0 is the source tweet; an edge's time offset is
// the child node's offset. Structure must be a DAG rooted at node 0 (trees
// are the common case, merges are accepted, cycles are not).
struct Claim {
  std::string id;
  int label = -1;
  std::string event;  // empty = untagged
  std::vector<TweetNode> nodes;
  std::vector<Edge> edges;

  int n() const { return static_cast<int>(nodes.size()); }
  bool operator==(const Claim& o) const;
};

struct Dataset {
  LabelSet label_set;
  std::vector<Claim> claims;

  bool has_events() const;
  bool operator==(const Dataset& o) const;
};

// Throws DataError naming the claim id on any invariant violation:
// out-of-range edge index, self-loop, duplicate edge, unreachable node,
// cycle, duplicate uid, negative time offset, nonzero source offset,
// label outside the label set.
void validate_claim(const Claim& claim, const LabelSet& labels);

struct PropagationGraph {
  int n = 0;
  Tensor64 features;       // n x d0
  Tensor64 a_td;           // binary at construction
  Tensor64 a_bu;           // transpose of a_td
  num::EdgeList edges_td;  // support of a_td, claim edge order
};

PropagationGraph build_graph(const Claim& claim, const Tensor64& features);

enum class Format { CanonicalJsonl, MaTree };

struct LoadIssue {
  std::string claim_id;
  std::string reason;
};

struct LoadResult {
  Dataset dataset;
  std::vector<LoadIssue> skipped;  // lenient mode only
};

// strict: any invalid claim aborts the load. lenient: invalid claims are
// reported in `skipped` and dropped. An empty resulting dataset is an error
// either way. For MaTree, `path` is the directory of per-claim tree files
// and `label_path` the label file.
LoadResult load_claims(const std::string& path, Format format, const LabelSet& labels,
                       bool strict = true, const std::string& label_path = "");

void write_claims(const Dataset& dataset, const std::string& path);

struct TruncatePolicy {
  enum class Kind { DeadlineMinutes, MaxTweets } kind;
  double deadline_minutes = 0.0;
  int max_tweets = 0;

  static TruncatePolicy deadline(double minutes) { return {Kind::DeadlineMinutes, minutes, 0}; }
  static TruncatePolicy tweets(int count) { return {Kind::MaxTweets, 0.0, count}; }
};

// Keeps nodes within the budget (deadline on time offset, or the earliest
// max_tweets nodes by (offset, index)), then prunes anything left
// unreachable from the source so the result is always a valid claim.
// Node 0 survives any budget.
Claim truncate_claim(const Claim& claim, const TruncatePolicy& policy);

// Ma-style tree parsing: lines "['uid', 'idx', 't']->['uid', 'idx', 't']".
// Malformed lines are reported with their line numbers in `errors`; a claim
// with any bad line is rejected.
Claim parse_ma_tree_file(const std::string& path, const std::string& claim_id,
                         std::vector<std::string>& errors);

}  // namespace ebgcn::cascade
