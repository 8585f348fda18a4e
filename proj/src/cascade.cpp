#include "ebgcn/cascade.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ebgcn/errors.hpp"

namespace ebgcn::cascade {

namespace fs = std::filesystem;
using nlohmann::json;

int LabelSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

LabelSet LabelSet::parse(const std::string& comma_separated) {
  LabelSet out;
  std::stringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.erase(item.begin());
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.pop_back();
    if (!item.empty()) out.names.push_back(item);
  }
  if (out.size() < 2) throw DataError("label set needs at least 2 members, got '" + comma_separated + "'");
  return out;
}

bool Claim::operator==(const Claim& o) const {
  if (id != o.id || label != o.label || event != o.event || nodes.size() != o.nodes.size() ||
      edges.size() != o.edges.size())
    return false;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].uid != o.nodes[i].uid || nodes[i].text != o.nodes[i].text ||
        nodes[i].time_offset_minutes != o.nodes[i].time_offset_minutes)
      return false;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (!(edges[i] == o.edges[i])) return false;
  return true;
}

bool Dataset::has_events() const {
  for (const Claim& c : claims)
    if (c.event.empty()) return false;
  return !claims.empty();
}

bool Dataset::operator==(const Dataset& o) const {
  return label_set.names == o.label_set.names && claims == o.claims;
}

void validate_claim(const Claim& claim, const LabelSet& labels) {
  auto fail = [&](const std::string& why) {
    throw DataError("claim '" + claim.id + "': " + why);
  };
  const int n = claim.n();
  if (n < 1) fail("no nodes");
  if (claim.label < 0 || claim.label >= labels.size()) fail("label outside the label set");
  if (claim.nodes[0].time_offset_minutes != 0.0) fail("source node time offset must be 0");

  std::unordered_set<std::string> uids;
  for (const TweetNode& node : claim.nodes) {
    if (node.time_offset_minutes < 0.0) fail("negative time offset on uid '" + node.uid + "'");
    if (!uids.insert(node.uid).second) fail("duplicate uid '" + node.uid + "'");
  }

  std::set<std::pair<int, int>> seen;
  std::vector<std::vector<int>> children(n);
  std::vector<int> indegree(n, 0);
  for (const Edge& e : claim.edges) {
    if (e.parent < 0 || e.parent >= n || e.child < 0 || e.child >= n)
      fail("edge (" + std::to_string(e.parent) + "," + std::to_string(e.child) + ") out of range");
    if (e.parent == e.child) fail("self-loop at node " + std::to_string(e.parent));
    if (!seen.insert({e.parent, e.child}).second)
      fail("duplicate edge (" + std::to_string(e.parent) + "," + std::to_string(e.child) + ")");
    children[e.parent].push_back(e.child);
    ++indegree[e.child];
  }

  // Kahn's algorithm both detects cycles and, seeded from the root only,
  // proves every node hangs off the source.
  std::vector<int> order;
  std::vector<int> deg = indegree;
  std::vector<int> stack;
  for (int v = 0; v < n; ++v)
    if (deg[v] == 0) stack.push_back(v);
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (int c : children[v])
      if (--deg[c] == 0) stack.push_back(c);
  }
  if (static_cast<int>(order.size()) != n) fail("cycle in propagation structure");
  if (indegree[0] != 0) fail("source node has a parent");

  std::vector<char> reach(n, 0);
  reach[0] = 1;
  stack.assign(1, 0);
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int c : children[v])
      if (!reach[c]) {
        reach[c] = 1;
        stack.push_back(c);
      }
  }
  for (int v = 0; v < n; ++v)
    if (!reach[v]) fail("node " + std::to_string(v) + " unreachable from the source");
}

PropagationGraph build_graph(const Claim& claim, const Tensor64& features) {
  if (features.rows() != claim.n())
    throw DataError("claim '" + claim.id + "': feature rows " + std::to_string(features.rows()) +
                    " != node count " + std::to_string(claim.n()));
  PropagationGraph g;
  g.n = claim.n();
  g.features = features;
  g.a_td = Tensor64(g.n, g.n);
  for (const Edge& e : claim.edges) {
    g.a_td(e.parent, e.child) = 1.0;
    g.edges_td.emplace_back(e.parent, e.child);
  }
  g.a_bu = num::transpose(g.a_td);
  return g;
}

namespace {

Claim claim_from_json(const json& j) {
  Claim c;
  c.id = j.at("id").get<std::string>();
  if (!j.contains("label")) throw DataError("record missing label");
  c.event = j.contains("event") && !j.at("event").is_null() ? j.at("event").get<std::string>() : "";
  for (const json& nj : j.at("nodes")) {
    TweetNode node;
    node.uid = nj.at("uid").get<std::string>();
    node.text = nj.at("text").get<std::string>();
    node.time_offset_minutes = nj.at("t").get<double>();
    c.nodes.push_back(std::move(node));
  }
  for (const json& ej : j.at("edges")) {
    if (!ej.is_array() || ej.size() != 2) throw DataError("edge entry must be [parent, child]");
    c.edges.push_back({ej[0].get<int>(), ej[1].get<int>()});
  }
  return c;
}

LoadResult load_jsonl(const std::string& path, const LabelSet& labels, bool strict) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  LoadResult result;
  result.dataset.label_set = labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string claim_id = "<line " + std::to_string(lineno) + ">";
    try {
      json j = json::parse(line);
      if (j.contains("id")) claim_id = j.at("id").get<std::string>();
      Claim c = claim_from_json(j);
      const std::string label_str = j.at("label").get<std::string>();
      c.label = labels.index_of(label_str);
      if (c.label < 0) throw DataError("claim '" + c.id + "': unknown label '" + label_str + "'");
      validate_claim(c, labels);
      result.dataset.claims.push_back(std::move(c));
    } catch (const json::exception& e) {
      if (strict) throw DataError(path + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
      result.skipped.push_back({claim_id, e.what()});
    } catch (const DataError& e) {
      if (strict) throw;
      result.skipped.push_back({claim_id, e.what()});
    }
  }
  if (result.dataset.claims.empty())
    throw DataError("'" + path + "': no valid claims (a dataset needs m >= 1)");
  return result;
}

// One "['uid', 'idx', 't']" endpoint. Whitespace around tokens is tolerated;
// anything else is rejected.
struct MaEndpoint {
  std::string uid;
  long long idx;
  double t;
  bool is_root_marker = false;
};

bool parse_ma_endpoint(const std::string& s, MaEndpoint& out) {
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  };
  auto expect = [&](char c) {
    skip_ws();
    if (i >= s.size() || s[i] != c) return false;
    ++i;
    return true;
  };
  auto quoted = [&](std::string& tok) {
    skip_ws();
    if (i >= s.size() || s[i] != '\'') return false;
    ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != '\'') ++i;
    if (i >= s.size()) return false;
    tok = s.substr(start, i - start);
    ++i;
    return true;
  };

  std::string uid, idx, t;
  if (!expect('[') || !quoted(uid) || !expect(',') || !quoted(idx) || !expect(',') || !quoted(t) || !expect(']'))
    return false;
  skip_ws();
  if (i != s.size()) return false;

  out.uid = uid;
  if (uid == "ROOT" && idx == "ROOT") {
    out.is_root_marker = true;
    out.idx = -1;
    out.t = 0.0;
    return true;
  }
  try {
    std::size_t pos = 0;
    out.idx = std::stoll(idx, &pos);
    if (pos != idx.size()) return false;
    pos = 0;
    out.t = std::stod(t, &pos);
    if (pos != t.size()) return false;
  } catch (...) {
    return false;
  }
  return out.idx >= 0;
}

}  // namespace

Claim parse_ma_tree_file(const std::string& path, const std::string& claim_id,
                         std::vector<std::string>& errors) {
  std::ifstream in(path);
  if (!in) {
    errors.push_back(path + ": cannot open");
    return {};
  }

  struct RawEdge {
    long long parent, child;
  };
  std::map<long long, MaEndpoint> by_idx;
  std::vector<RawEdge> raw_edges;
  std::set<long long> has_parent;

  std::string line;
  int lineno = 0;
  bool bad = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::size_t arrow = line.find("->");
    MaEndpoint lhs, rhs;
    if (arrow == std::string::npos || !parse_ma_endpoint(line.substr(0, arrow), lhs) ||
        !parse_ma_endpoint(line.substr(arrow + 2), rhs) || rhs.is_root_marker) {
      errors.push_back(path + ":" + std::to_string(lineno) + ": malformed line");
      bad = true;
      continue;
    }
    by_idx[rhs.idx] = rhs;
    if (!lhs.is_root_marker) {
      by_idx.emplace(lhs.idx, lhs);
      raw_edges.push_back({lhs.idx, rhs.idx});
      has_parent.insert(rhs.idx);
    }
  }
  if (bad || by_idx.empty()) return {};

  // The node no line points at is the source; order the rest by (t, idx).
  std::vector<long long> roots;
  for (const auto& [idx, ep] : by_idx)
    if (!has_parent.count(idx)) roots.push_back(idx);
  if (roots.size() != 1) {
    errors.push_back(path + ": expected exactly one root, found " + std::to_string(roots.size()));
    return {};
  }

  std::vector<long long> order;
  for (const auto& [idx, ep] : by_idx)
    if (idx != roots[0]) order.push_back(idx);
  std::sort(order.begin(), order.end(), [&](long long a, long long b) {
    if (by_idx[a].t != by_idx[b].t) return by_idx[a].t < by_idx[b].t;
    return a < b;
  });
  order.insert(order.begin(), roots[0]);

  Claim c;
  c.id = claim_id;
  std::map<long long, int> remap;
  const double t0 = by_idx[roots[0]].t;
  for (long long idx : order) {
    remap[idx] = c.n();
    TweetNode node;
    node.uid = by_idx[idx].uid;
    node.text = "";
    node.time_offset_minutes = by_idx[idx].t - t0;
    c.nodes.push_back(std::move(node));
  }
  for (const RawEdge& e : raw_edges) c.edges.push_back({remap[e.parent], remap[e.child]});
  return c;
}

namespace {

// Label files use "label:claim_id" lines. Common long-form label spellings
// map onto the canonical short names.
int resolve_label(const std::string& raw, const LabelSet& labels) {
  int idx = labels.index_of(raw);
  if (idx >= 0) return idx;
  static const std::unordered_map<std::string, std::string> aliases = {
      {"non-rumor", "NR"}, {"news", "NR"},       {"false", "F"},
      {"true", "T"},       {"unverified", "U"},  {"rumours", "F"},
  };
  std::string lower = raw;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  const auto it = aliases.find(lower);
  return it == aliases.end() ? -1 : labels.index_of(it->second);
}

LoadResult load_ma_tree(const std::string& dir, const std::string& label_path,
                        const LabelSet& labels, bool strict) {
  if (!fs::is_directory(dir)) throw DataError("'" + dir + "' is not a directory");
  if (label_path.empty()) throw DataError("ma-tree format needs a label file");

  std::ifstream lf(label_path);
  if (!lf) throw DataError("cannot open label file '" + label_path + "'");
  std::unordered_map<std::string, std::string> label_of;
  std::string line;
  int lineno = 0;
  while (std::getline(lf, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw DataError(label_path + ":" + std::to_string(lineno) + ": expected 'label:claim_id'");
    label_of[line.substr(colon + 1)] = line.substr(0, colon);
  }

  std::vector<fs::path> files;
  const fs::path label_fs = fs::absolute(label_path);
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt" &&
        fs::absolute(entry.path()) != label_fs)
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("'" + dir + "': no .txt tree files");

  LoadResult result;
  result.dataset.label_set = labels;
  for (const fs::path& file : files) {
    const std::string claim_id = file.stem().string();
    std::vector<std::string> errors;
    Claim c = parse_ma_tree_file(file.string(), claim_id, errors);
    try {
      if (!errors.empty()) {
        std::string joined;
        for (const std::string& e : errors) joined += (joined.empty() ? "" : "; ") + e;
        throw DataError(joined);
      }
      const auto it = label_of.find(claim_id);
      if (it == label_of.end()) throw DataError("claim '" + claim_id + "': no label entry");
      c.label = resolve_label(it->second, labels);
      if (c.label < 0) throw DataError("claim '" + claim_id + "': unknown label '" + it->second + "'");
      validate_claim(c, labels);
      result.dataset.claims.push_back(std::move(c));
    } catch (const DataError& e) {
      if (strict) throw;
      result.skipped.push_back({claim_id, e.what()});
    }
  }
  if (result.dataset.claims.empty()) throw DataError("'" + dir + "': no valid claims");
  return result;
}

}  // namespace

LoadResult load_claims(const std::string& path, Format format, const LabelSet& labels,
                       bool strict, const std::string& label_path) {
  if (labels.size() < 2) throw DataError("label set needs at least 2 members");
  switch (format) {
    case Format::CanonicalJsonl:
      return load_jsonl(path, labels, strict);
    case Format::MaTree:
      return load_ma_tree(path, label_path, labels, strict);
  }
  throw DataError("unknown dataset format");
}

void write_claims(const Dataset& dataset, const std::string& path) {
  if (dataset.claims.empty()) throw DataError("refusing to write an empty dataset");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const Claim& c : dataset.claims) {
    json j;
    j["id"] = c.id;
    j["label"] = dataset.label_set.names.at(c.label);
    if (c.event.empty())
      j["event"] = nullptr;
    else
      j["event"] = c.event;
    j["nodes"] = json::array();
    for (const TweetNode& node : c.nodes)
      j["nodes"].push_back({{"uid", node.uid}, {"text", node.text}, {"t", node.time_offset_minutes}});
    j["edges"] = json::array();
    for (const Edge& e : c.edges) j["edges"].push_back({e.parent, e.child});
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

Claim truncate_claim(const Claim& claim, const TruncatePolicy& policy) {
  const int n = claim.n();
  std::vector<char> keep(n, 0);
  keep[0] = 1;

  if (policy.kind == TruncatePolicy::Kind::DeadlineMinutes) {
    for (int i = 0; i < n; ++i)
      if (claim.nodes[i].time_offset_minutes <= policy.deadline_minutes) keep[i] = 1;
  } else {
    if (policy.max_tweets < 1) throw DataError("max_tweets must be positive");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (claim.nodes[a].time_offset_minutes != claim.nodes[b].time_offset_minutes)
        return claim.nodes[a].time_offset_minutes < claim.nodes[b].time_offset_minutes;
      return a < b;
    });
    for (int i = 0; i < std::min(policy.max_tweets, n); ++i) keep[order[i]] = 1;
  }

  // Drop kept nodes whose retained ancestors are gone; otherwise the result
  // would violate the reachability invariant on cascades with out-of-order
  // timestamps.
  std::vector<std::vector<int>> children(n);
  for (const Edge& e : claim.edges) children[e.parent].push_back(e.child);
  std::vector<char> reach(n, 0);
  std::vector<int> stack{0};
  reach[0] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int c : children[v])
      if (keep[c] && !reach[c]) {
        reach[c] = 1;
        stack.push_back(c);
      }
  }

  Claim out;
  out.id = claim.id;
  out.label = claim.label;
  out.event = claim.event;
  std::vector<int> remap(n, -1);
  for (int i = 0; i < n; ++i) {
    if (!(keep[i] && reach[i])) continue;
    remap[i] = out.n();
    out.nodes.push_back(claim.nodes[i]);
  }
  for (const Edge& e : claim.edges)
    if (remap[e.parent] >= 0 && remap[e.child] >= 0) out.edges.push_back({remap[e.parent], remap[e.child]});
  return out;
}

}  // namespace ebgcn::cascade
