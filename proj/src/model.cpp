#include "ebgcn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ebgcn/errors.hpp"
#include "ebgcn/rng.hpp"

namespace ebgcn::net {

using nlohmann::json;

namespace {

struct Spec {
  std::string name;
  int rows, cols;
};

std::vector<Spec> param_specs(const ModelDims& d) {
  std::vector<Spec> specs;
  for (const char* dir : {"bu", "td"}) {
    specs.push_back({std::string(dir) + ".l1.W", d.in_dim, d.hidden});
    specs.push_back({std::string(dir) + ".l1.b", 1, d.hidden});
    specs.push_back({std::string(dir) + ".l2.W", d.hidden, d.hidden});
    specs.push_back({std::string(dir) + ".l2.b", 1, d.hidden});
  }
  specs.push_back({"cls.W", 2 * d.hidden, d.classes});
  specs.push_back({"cls.b", 1, d.classes});
  const int t = d.relation_types;
  for (int l = 1; l <= 2; ++l) {
    const std::string p = "edge.l" + std::to_string(l) + ".";
    const int in = l == 1 ? d.in_dim : d.hidden;
    specs.push_back({p + "feat.W", in, t});
    specs.push_back({p + "feat.b", 1, t});
    specs.push_back({p + "gate.W", t, t});
    specs.push_back({p + "gate.b", 1, t});
    specs.push_back({p + "mu.W", t, t});
    specs.push_back({p + "mu.b", 1, t});
    specs.push_back({p + "var.W", t, t});
    specs.push_back({p + "var.b", 1, t});
  }
  std::sort(specs.begin(), specs.end(), [](const Spec& a, const Spec& b) { return a.name < b.name; });
  return specs;
}

}  // namespace

std::vector<std::string> param_names(const ModelDims& dims) {
  std::vector<std::string> names;
  for (const Spec& s : param_specs(dims)) names.push_back(s.name);
  return names;
}

ParamMap64 init_params(const ModelDims& dims, std::uint64_t seed) {
  if (dims.in_dim < 1 || dims.hidden < 1 || dims.relation_types < 1 || dims.classes < 2)
    throw ConfigError("init_params: invalid model dimensions");
  Rng rng(seed);
  ParamMap64 params;
  for (const Spec& s : param_specs(dims)) {
    Tensor64 t(s.rows, s.cols);
    const bool is_bias = s.rows == 1 && s.name.size() >= 2 && s.name.substr(s.name.size() - 2) == ".b";
    if (!is_bias) {
      const double a = std::sqrt(6.0 / (s.rows + s.cols));
      for (std::size_t i = 0; i < t.size(); ++i) t.at_flat(i) = rng.uniform(-a, a);
    }
    params[s.name] = std::move(t);
  }
  return params;
}

namespace {

constexpr char kMagic[8] = {'E', 'B', 'G', 'C', 'N', 'C', 'K', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t read_u64(std::ifstream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void write_map(std::ofstream& out, const ParamMap64& m) {
  write_u64(out, m.size());
  for (const auto& [name, tensor] : m) {
    write_string(out, name);
    write_u64(out, static_cast<std::uint64_t>(tensor.rows()));
    write_u64(out, static_cast<std::uint64_t>(tensor.cols()));
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
}

ParamMap64 read_map(std::ifstream& in) {
  ParamMap64 m;
  const std::uint64_t count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    const int rows = static_cast<int>(read_u64(in));
    const int cols = static_cast<int>(read_u64(in));
    Tensor64 t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    m[name] = std::move(t);
  }
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof kMagic);

  json meta;
  meta["in_dim"] = ckpt.dims.in_dim;
  meta["hidden"] = ckpt.dims.hidden;
  meta["relation_types"] = ckpt.dims.relation_types;
  meta["classes"] = ckpt.dims.classes;
  meta["labels"] = ckpt.labels;
  meta["feature_mode"] = ckpt.feature_mode;
  meta["edge_inference"] = ckpt.edge_inference;
  meta["epoch"] = ckpt.epoch;
  meta["adam_step"] = ckpt.adam_step;
  write_string(out, meta.dump());

  write_map(out, ckpt.params);
  write_map(out, ckpt.adam_m);
  write_map(out, ckpt.adam_v);
  if (!out) throw DataError("write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError("'" + path + "' is not a checkpoint file");

  json meta;
  try {
    meta = json::parse(read_string(in));
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path + "': bad metadata: " + e.what());
  }

  Checkpoint ckpt;
  ckpt.dims.in_dim = meta.at("in_dim").get<int>();
  ckpt.dims.hidden = meta.at("hidden").get<int>();
  ckpt.dims.relation_types = meta.at("relation_types").get<int>();
  ckpt.dims.classes = meta.at("classes").get<int>();
  ckpt.labels = meta.at("labels").get<std::vector<std::string>>();
  ckpt.feature_mode = meta.at("feature_mode").get<std::string>();
  ckpt.edge_inference = meta.at("edge_inference").get<bool>();
  ckpt.epoch = meta.at("epoch").get<int>();
  ckpt.adam_step = meta.at("adam_step").get<long long>();
  ckpt.params = read_map(in);
  ckpt.adam_m = read_map(in);
  ckpt.adam_v = read_map(in);
  if (!in) throw DataError("checkpoint '" + path + "' is truncated");
  return ckpt;
}

}  // namespace ebgcn::net
