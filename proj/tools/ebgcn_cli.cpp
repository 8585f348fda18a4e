// Command-line harness tying the library into reproducible experiments:
// generate / train / evaluate / early-detect / robustness / sweep / convert.
//
// Every run takes one key=value config file plus overriding flags; the
// resolved configuration is copied into the output directory. Exit codes:
// 0 success, 1 config error, 2 data error, 3 runtime/numeric error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "ebgcn/cascade.hpp"
#include "ebgcn/datagen.hpp"
#include "ebgcn/errors.hpp"
#include "ebgcn/eval.hpp"
#include "ebgcn/model.hpp"
#include "ebgcn/network.hpp"
#include "ebgcn/rng.hpp"
#include "ebgcn/text_features.hpp"
#include "ebgcn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ebgcn;

namespace {

// ---------------------------------------------------------------------------
// Key=value run configuration.

using KvMap = std::map<std::string, std::string>;

KvMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  KvMap kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      const std::size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const std::size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

struct Run {
  KvMap kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback = "") const {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  }

  std::string require_str(const std::string& key) const {
    const auto it = kv.find(key);
    if (it == kv.end() || it->second.empty()) throw ConfigError("missing required setting '" + key + "'");
    return it->second;
  }

  double num(const std::string& key, double fallback) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (...) {
      throw ConfigError("setting '" + key + "' is not a number: '" + it->second + "'");
    }
  }

  long long integer(const std::string& key, long long fallback) const {
    const double v = num(key, static_cast<double>(fallback));
    const long long r = static_cast<long long>(v);
    if (static_cast<double>(r) != v) throw ConfigError("setting '" + key + "' must be an integer");
    return r;
  }

  bool flag(const std::string& key, bool fallback) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("setting '" + key + "' must be true/false");
  }

  std::uint64_t require_seed() const {
    const auto it = kv.find("seed");
    if (it == kv.end()) throw ConfigError("this command is stochastic: a seed is required");
    try {
      return std::stoull(it->second);
    } catch (...) {
      throw ConfigError("seed must be a non-negative integer, got '" + it->second + "'");
    }
  }

  std::vector<double> num_list(const std::string& key, bool allow_inf = false) const {
    std::vector<double> out;
    std::stringstream ss(require_str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::size_t a = item.find_first_not_of(" \t");
      if (a == std::string::npos) continue;
      const std::size_t b = item.find_last_not_of(" \t");
      item = item.substr(a, b - a + 1);
      if (allow_inf && (item == "inf" || item == "INF")) {
        out.push_back(std::numeric_limits<double>::infinity());
        continue;
      }
      try {
        out.push_back(std::stod(item));
      } catch (...) {
        throw ConfigError("setting '" + key + "': bad entry '" + item + "'");
      }
    }
    if (out.empty()) throw ConfigError("setting '" + key + "' is empty");
    return out;
  }
};

fs::path prepare_out_dir(const Run& run) {
  const fs::path out(run.require_str("out"));
  fs::create_directories(out);
  std::ofstream resolved((out / "config.resolved").string(), std::ios::binary);
  for (const auto& [key, value] : run.kv) resolved << key << " = " << value << "\n";
  return out;
}

void set_threads(const Run& run) {
  const long long threads = run.integer("threads", 1);
  if (threads < 1) throw ConfigError("threads must be >= 1");
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(threads));
#endif
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces.

cascade::LabelSet labels_from(const Run& run) {
  return cascade::LabelSet::parse(run.str("labels", "NR,F,T,U"));
}

cascade::Dataset load_dataset(const Run& run) {
  const std::string path = run.require_str("data");
  const std::string format = run.str("format", "jsonl");
  const bool strict = run.flag("strict", true);
  cascade::Format fmt;
  if (format == "jsonl" || format == "canonical-jsonl")
    fmt = cascade::Format::CanonicalJsonl;
  else if (format == "ma-tree")
    fmt = cascade::Format::MaTree;
  else
    throw ConfigError("unknown format '" + format + "' (expected jsonl or ma-tree)");
  const cascade::LoadResult r =
      cascade::load_claims(path, fmt, labels_from(run), strict, run.str("label_file"));
  for (const cascade::LoadIssue& issue : r.skipped)
    std::cerr << "skipped claim '" << issue.claim_id << "': " << issue.reason << "\n";
  return r.dataset;
}

std::vector<std::string> claim_texts(const cascade::Dataset& dataset, const std::vector<int>& idx) {
  std::vector<std::string> texts;
  for (int i : idx)
    for (const cascade::TweetNode& node : dataset.claims[i].nodes) texts.push_back(node.text);
  return texts;
}

struct FeaturePipeline {
  text::DatasetFeatures features;
  std::optional<text::Vocabulary> vocab;  // tfidf mode only
  std::string mode;
};

// Builds node features. In tfidf mode the vocabulary is fitted on the train
// claims only (never the held-out ones) unless a frozen vocabulary file is
// supplied.
FeaturePipeline build_features(const Run& run, const cascade::Dataset& dataset,
                               const std::vector<int>& train_idx) {
  FeaturePipeline out;
  out.mode = run.str("features", "embeddings");
  if (out.mode == "embeddings") {
    int missing = 0;
    out.features = text::load_embeddings(run.require_str("embeddings"), dataset, &missing);
    if (missing > 0) std::cerr << "warning: " << missing << " uids missing from embeddings, zero rows used\n";
  } else if (out.mode == "tfidf") {
    if (run.has("vocab")) {
      out.vocab = text::load_vocabulary(run.require_str("vocab"));
    } else {
      const int max_terms = static_cast<int>(run.integer("max_vocab", 5000));
      out.vocab = text::fit_vocabulary(claim_texts(dataset, train_idx), max_terms);
    }
    out.features = text::featurize_tfidf(*out.vocab, dataset);
  } else {
    throw ConfigError("features must be 'tfidf' or 'embeddings', got '" + out.mode + "'");
  }
  return out;
}

eval::Split split_dataset(const Run& run, const cascade::Dataset& dataset, std::uint64_t seed) {
  const std::string policy = run.str("split", "holdout");
  if (policy == "holdout")
    return eval::stratified_holdout(dataset, run.num("val_fraction", 0.2), seed);
  if (policy == "kfold") {
    const int k = static_cast<int>(run.integer("k", 5));
    const int fold = static_cast<int>(run.integer("fold", 0));
    const auto splits = eval::kfold_splits(dataset, k, seed);
    if (fold < 0 || fold >= k) throw ConfigError("fold must lie in [0, k)");
    return splits[fold];
  }
  if (policy == "loeo") {
    const auto splits = eval::loeo_splits(dataset);
    const int fold = static_cast<int>(run.integer("fold", 0));
    if (fold < 0 || fold >= static_cast<int>(splits.size()))
      throw ConfigError("fold must name one of the " + std::to_string(splits.size()) + " events");
    return splits[fold];
  }
  throw ConfigError("split must be holdout, kfold, or loeo");
}

train::TrainConfig train_config(const Run& run, std::uint64_t seed) {
  train::TrainConfig cfg;
  cfg.lr = run.num("lr", cfg.lr);
  cfg.max_epochs = static_cast<int>(run.integer("epochs", cfg.max_epochs));
  cfg.patience = static_cast<int>(run.integer("patience", cfg.patience));
  cfg.gamma = run.num("gamma", cfg.gamma);
  cfg.relation_types = static_cast<int>(run.integer("T", cfg.relation_types));
  cfg.hidden = static_cast<int>(run.integer("hidden", cfg.hidden));
  cfg.batch_size = static_cast<int>(run.integer("batch_size", cfg.batch_size));
  cfg.precision = static_cast<int>(run.integer("precision", cfg.precision));
  cfg.edge_inference = run.flag("edge_inference", true);
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

std::vector<cascade::PropagationGraph> build_graphs(const cascade::Dataset& dataset,
                                                    const text::DatasetFeatures& features) {
  std::vector<cascade::PropagationGraph> graphs;
  for (std::size_t i = 0; i < dataset.claims.size(); ++i)
    graphs.push_back(cascade::build_graph(dataset.claims[i], features.claim_rows(static_cast<int>(i))));
  return graphs;
}

json metrics_to_json(const eval::MetricReport& m, const cascade::LabelSet& labels) {
  json j;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["weighted_f1"] = m.weighted_f1;
  json f1 = json::object();
  for (int c = 0; c < labels.size(); ++c) f1[labels.names[c]] = m.f1[c];
  j["f1"] = f1;
  j["confusion"] = m.confusion;
  j["support"] = m.support;
  return j;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path.string(), std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_generate(const Run& run) {
  const std::uint64_t seed = run.require_seed();
  const fs::path out = prepare_out_dir(run);

  datagen::GenConfig cfg;
  cfg.claims_per_class = static_cast<int>(run.integer("gen.claims_per_class", cfg.claims_per_class));
  cfg.label_set = labels_from(run);
  cfg.nodes_min = static_cast<int>(run.integer("gen.nodes_min", cfg.nodes_min));
  cfg.nodes_max = static_cast<int>(run.integer("gen.nodes_max", cfg.nodes_max));
  cfg.feature_dim = static_cast<int>(run.integer("gen.feature_dim", cfg.feature_dim));
  cfg.snr = run.num("gen.snr", cfg.snr);
  cfg.edge_noise = run.num("gen.edge_noise", cfg.edge_noise);
  cfg.irrelevant_rate = run.num("gen.irrelevant_rate", cfg.irrelevant_rate);
  cfg.num_events = static_cast<int>(run.integer("gen.num_events", cfg.num_events));
  cfg.seed = seed;

  const datagen::GeneratedData data = datagen::generate(cfg);
  cascade::write_claims(data.dataset, (out / "claims.jsonl").string());
  text::write_embeddings((out / "features.tsv").string(), data.dataset, data.features);

  std::vector<long long> per_class(cfg.label_set.size(), 0);
  long long nodes = 0;
  for (const cascade::Claim& c : data.dataset.claims) {
    ++per_class[c.label];
    nodes += c.n();
  }
  std::cout << "generated " << data.dataset.claims.size() << " claims, " << nodes << " nodes\n";
  for (int c = 0; c < cfg.label_set.size(); ++c)
    std::cout << "  " << cfg.label_set.names[c] << ": " << per_class[c] << "\n";
  std::cout << "wrote " << (out / "claims.jsonl").string() << " and " << (out / "features.tsv").string()
            << "\n";
  return 0;
}

int cmd_train(const Run& run) {
  const std::uint64_t seed = run.require_seed();
  const fs::path out = prepare_out_dir(run);

  const cascade::Dataset dataset = load_dataset(run);
  const eval::Split split = split_dataset(run, dataset, seed);
  const FeaturePipeline pipeline = build_features(run, dataset, split.first);
  if (pipeline.vocab) text::save_vocabulary(*pipeline.vocab, (out / "vocab.json").string());

  const std::vector<cascade::PropagationGraph> graphs = build_graphs(dataset, pipeline.features);
  std::vector<int> labels;
  for (const cascade::Claim& c : dataset.claims) labels.push_back(c.label);

  const train::TrainConfig cfg = train_config(run, seed);
  const net::ModelDims dims{pipeline.features.dim(), cfg.hidden, cfg.relation_types,
                            dataset.label_set.size()};

  const train::FitResult result = train::fit(graphs, labels, split.first, split.second, dims, cfg);
  train::write_history_csv(result.history, (out / "history.csv").string());

  net::Checkpoint ckpt;
  ckpt.dims = dims;
  ckpt.labels = dataset.label_set.names;
  ckpt.feature_mode = pipeline.mode;
  ckpt.edge_inference = cfg.edge_inference;
  ckpt.epoch = result.best_epoch;
  ckpt.adam_step = result.adam_step;
  ckpt.params = result.best_params;
  ckpt.adam_m = result.adam_m;
  ckpt.adam_v = result.adam_v;
  net::save_checkpoint(ckpt, (out / "checkpoint.bin").string());

  const eval::EvalOutcome outcome =
      eval::evaluate_dataset(result.best_params, dims, net::NetConfig{cfg.edge_inference}, cfg.gamma,
                             dataset, pipeline.features, split.second);
  json report = metrics_to_json(outcome.metrics, dataset.label_set);
  report["best_epoch"] = result.best_epoch;
  report["best_val_loss"] = result.best_val_loss;
  report["epochs_run"] = result.epochs_run;
  report["diverged"] = result.diverged;
  write_json(report, out / "metrics.json");

  if (result.diverged) {
    std::cerr << "training diverged; best checkpoint up to that point was kept\n";
    return 3;
  }
  std::cout << "trained " << result.epochs_run << " epochs (best " << result.best_epoch
            << ", val loss " << result.best_val_loss << ", val acc " << outcome.metrics.accuracy
            << ")\n";
  return 0;
}

struct LoadedModel {
  net::Checkpoint ckpt;
  cascade::Dataset dataset;
  text::DatasetFeatures features;
};

LoadedModel load_model_and_data(const Run& run) {
  LoadedModel lm;
  lm.ckpt = net::load_checkpoint(run.require_str("checkpoint"));

  Run patched = run;
  if (!patched.has("labels")) {
    std::string joined;
    for (const std::string& name : lm.ckpt.labels) joined += (joined.empty() ? "" : ",") + name;
    patched.kv["labels"] = joined;
  }
  lm.dataset = load_dataset(patched);
  if (lm.dataset.label_set.names != lm.ckpt.labels)
    throw DataError("dataset label set does not match the checkpoint's");

  Run feat = patched;
  if (!feat.has("features")) feat.kv["features"] = lm.ckpt.feature_mode;
  if (feat.str("features") == "tfidf" && !feat.has("vocab"))
    throw ConfigError("tfidf evaluation needs the frozen vocab file (set 'vocab')");
  std::vector<int> all_idx(lm.dataset.claims.size());
  for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = static_cast<int>(i);
  lm.features = build_features(feat, lm.dataset, all_idx).features;
  if (lm.features.dim() != lm.ckpt.dims.in_dim)
    throw DataError("feature dim " + std::to_string(lm.features.dim()) +
                    " does not match checkpoint in_dim " + std::to_string(lm.ckpt.dims.in_dim));
  return lm;
}

int cmd_evaluate(const Run& run) {
  const fs::path out = prepare_out_dir(run);
  const LoadedModel lm = load_model_and_data(run);

  std::vector<int> idx(lm.dataset.claims.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  const net::NetConfig net_cfg{lm.ckpt.edge_inference};
  const eval::EvalOutcome outcome = eval::evaluate_dataset(
      lm.ckpt.params, lm.ckpt.dims, net_cfg, run.num("gamma", 1.0), lm.dataset, lm.features, idx);
  write_json(metrics_to_json(outcome.metrics, lm.dataset.label_set), out / "metrics.json");

  if (run.flag("dump_edges", false)) {
    // One line per refined edge, for case inspection.
    std::ofstream dump((out / "edge_weights.txt").string(), std::ios::binary);
    char buf[64];
    for (int i : idx) {
      const cascade::PropagationGraph g =
          cascade::build_graph(lm.dataset.claims[i], lm.features.claim_rows(i));
      const net::ForwardValues fv = net::forward_values(g, lm.ckpt.params, lm.ckpt.dims, net_cfg,
                                                        net::RunMode::Eval, 0);
      for (const net::GateDump& gd : fv.gates) {
        std::snprintf(buf, sizeof buf, "%.17g", gd.gate);
        dump << lm.dataset.claims[i].id << "," << gd.direction << "," << gd.layer << "," << gd.parent
             << "," << gd.child << "," << buf << "\n";
      }
    }
  }

  std::cout << "accuracy " << outcome.metrics.accuracy << " macro_f1 " << outcome.metrics.macro_f1
            << " weighted_f1 " << outcome.metrics.weighted_f1 << " on " << idx.size() << " claims\n";
  return 0;
}

int cmd_early_detect(const Run& run) {
  const fs::path out = prepare_out_dir(run);
  const LoadedModel lm = load_model_and_data(run);

  const std::vector<double> raw = run.num_list("budgets", /*allow_inf=*/true);
  std::vector<eval::Budget> budgets;
  for (double b : raw) budgets.push_back({std::isinf(b), b});
  const std::string kind_str = run.str("budget_kind", "tweets");
  const cascade::TruncatePolicy::Kind kind = kind_str == "minutes"
                                                 ? cascade::TruncatePolicy::Kind::DeadlineMinutes
                                                 : cascade::TruncatePolicy::Kind::MaxTweets;

  std::vector<int> idx(lm.dataset.claims.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  const auto curve =
      eval::early_detection_curve(lm.ckpt.params, lm.ckpt.dims, net::NetConfig{lm.ckpt.edge_inference},
                                  lm.dataset, lm.features, idx, budgets, kind);

  std::ofstream csv((out / "curve.csv").string(), std::ios::binary);
  csv << "budget,accuracy,macro_f1,weighted_f1\n";
  char buf[160];
  for (const eval::CurvePoint& pt : curve) {
    if (pt.budget.unlimited)
      csv << "inf";
    else
      csv << pt.budget.value;
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", pt.metrics.accuracy, pt.metrics.macro_f1,
                  pt.metrics.weighted_f1);
    csv << buf;
  }
  std::cout << "wrote " << curve.size() << "-point curve to " << (out / "curve.csv").string() << "\n";
  return 0;
}

int cmd_robustness(const Run& run) {
  const std::uint64_t seed = run.require_seed();
  const fs::path out = prepare_out_dir(run);

  const cascade::Dataset dataset = load_dataset(run);
  const eval::Split split = split_dataset(run, dataset, seed);
  const FeaturePipeline pipeline = build_features(run, dataset, split.first);

  eval::RobustnessConfig cfg;
  cfg.train = train_config(run, seed);
  if (run.has("rhos")) cfg.rhos = run.num_list("rhos");
  if (run.has("seeds")) {
    cfg.seeds.clear();
    for (double s : run.num_list("seeds")) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }

  const eval::RobustnessReport report =
      eval::robustness_experiment(dataset, pipeline.features, split.first, split.second, cfg);

  std::ofstream csv((out / "robustness.csv").string(), std::ios::binary);
  csv << "seed,rho,ebgcn_acc,ablation_acc\n";
  char buf[200];
  for (const eval::RobustnessRun& r : report.runs)
    for (std::size_t k = 0; k < report.rhos.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g\n",
                    static_cast<unsigned long long>(r.seed), report.rhos[k], r.model_acc[k],
                    r.ablation_acc[k]);
      csv << buf;
    }
  for (std::size_t k = 0; k < report.rhos.size(); ++k) {
    std::snprintf(buf, sizeof buf, "mean,%.17g,%.17g,%.17g\n", report.rhos[k],
                  report.mean_model_acc[k], report.mean_ablation_acc[k]);
    csv << buf;
  }
  std::cout << "mean accuracy drop at rho=" << report.rhos.back() << ": ebgcn "
            << report.mean_model_drop << " vs ablation " << report.mean_ablation_drop << "\n";
  return 0;
}

int cmd_sweep(const Run& run) {
  const std::uint64_t seed = run.require_seed();
  const fs::path out = prepare_out_dir(run);

  const cascade::Dataset dataset = load_dataset(run);
  const eval::Split split = split_dataset(run, dataset, seed);
  const FeaturePipeline pipeline = build_features(run, dataset, split.first);
  const std::vector<cascade::PropagationGraph> graphs = build_graphs(dataset, pipeline.features);
  std::vector<int> labels;
  for (const cascade::Claim& c : dataset.claims) labels.push_back(c.label);

  // The grid mirrors the model-analysis axes: T in [1,5], gamma in
  // {0.0, 0.1, ..., 1.0}.
  struct Cell {
    int t;
    double gamma;
    double acc = -1.0;
    bool failed = false;
    std::string what;
  };
  std::vector<Cell> cells;
  for (int t = 1; t <= 5; ++t)
    for (int g10 = 0; g10 <= 10; ++g10) cells.push_back({t, g10 / 10.0});

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    Cell& cell = cells[i];
    try {
      train::TrainConfig cfg = train_config(run, derive_seed(seed, 0x53EEDu + i));
      cfg.relation_types = cell.t;
      cfg.gamma = cell.gamma;
      const net::ModelDims dims{pipeline.features.dim(), cfg.hidden, cell.t, dataset.label_set.size()};
      const train::FitResult r = train::fit(graphs, labels, split.first, split.second, dims, cfg);
      if (r.diverged) throw NumericError("training diverged");
      const eval::EvalOutcome outcome =
          eval::evaluate_dataset(r.best_params, dims, net::NetConfig{cfg.edge_inference}, cfg.gamma,
                                 dataset, pipeline.features, split.second);
      cell.acc = outcome.metrics.accuracy;
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.what = e.what();
    }
  }

  std::ofstream csv((out / "sweep.csv").string(), std::ios::binary);
  csv << "T,gamma,accuracy\n";
  char buf[96];
  int failures = 0;
  for (const Cell& cell : cells) {
    if (cell.failed) {
      ++failures;
      std::cerr << "cell T=" << cell.t << " gamma=" << cell.gamma << " failed: " << cell.what << "\n";
      csv << cell.t << "," << cell.gamma << ",failed\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%d,%.1f,%.17g\n", cell.t, cell.gamma, cell.acc);
    csv << buf;
  }
  std::cout << "sweep grid " << cells.size() << " cells, " << failures << " failed\n";
  return failures == 0 ? 0 : 3;
}

int cmd_convert(const Run& run) {
  const fs::path out = prepare_out_dir(run);
  const std::string from = run.str("from", "ma-tree");
  Run patched = run;
  patched.kv["format"] = from == "canonical" ? "jsonl" : from;

  const cascade::Dataset dataset = load_dataset(patched);
  cascade::write_claims(dataset, (out / "claims.jsonl").string());
  std::cout << "converted " << dataset.claims.size() << " claims to "
            << (out / "claims.jsonl").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

void add_common_flags(CLI::App* cmd, KvMap& overrides, std::string& config_path) {
  cmd->add_option("--config", config_path, "key = value run configuration file");
  const auto opt = [cmd, &overrides](const std::string& flag, const std::string& key,
                                     const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
  };
  opt("--seed", "seed", "random seed (required for stochastic commands)");
  opt("--threads", "threads", "worker threads (default 1, reproducible)");
  opt("--out", "out", "output directory");
  opt("--data", "data", "dataset path (jsonl file or ma-tree directory)");
  opt("--format", "format", "dataset format: jsonl | ma-tree");
  opt("--labels", "labels", "comma-separated label set (default NR,F,T,U)");
  opt("--label-file", "label_file", "label file for ma-tree data");
  opt("--features", "features", "feature mode: tfidf | embeddings");
  opt("--embeddings", "embeddings", "embedding tsv path");
  opt("--vocab", "vocab", "frozen vocabulary json path");
  opt("--gamma", "gamma", "trade-off coefficient in [0,1]");
  opt("--T", "T", "latent relation types in [1,5]");
  opt("--lr", "lr", "learning rate");
  opt("--epochs", "epochs", "max training epochs");
  opt("--patience", "patience", "early-stopping patience");
  opt("--hidden", "hidden", "hidden width");
  opt("--batch-size", "batch_size", "mini-batch size");
  opt("--precision", "precision", "training precision: 32 | 64");
  opt("--split", "split", "split policy: holdout | kfold | loeo");
  opt("--val-fraction", "val_fraction", "holdout validation fraction");
  opt("--k", "k", "fold count for kfold");
  opt("--fold", "fold", "fold / event index");
  opt("--edge-inference", "edge_inference", "true|false (false = ablation baseline)");
  opt("--checkpoint", "checkpoint", "checkpoint path");
  opt("--budget-list", "budgets", "comma list of detection budgets ('inf' allowed)");
  opt("--budget-kind", "budget_kind", "tweets | minutes");
  opt("--rhos", "rhos", "comma list of edge-noise levels");
  opt("--seeds", "seeds", "comma list of robustness seeds");
  opt("--from", "from", "convert source format: ma-tree | canonical");
  opt("--dump-edges", "dump_edges", "true to write edge_weights.txt");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edge-enhanced bayesian GCN for rumor cascades"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    KvMap overrides;
    std::string config_path;
    int (*fn)(const Run&);
  };
  std::vector<Sub> subs;
  subs.reserve(8);  // option callbacks hold references into the elements
  const auto add = [&](const std::string& name, const std::string& help, int (*fn)(const Run&)) {
    subs.push_back({app.add_subcommand(name, help), {}, "", fn});
    add_common_flags(subs.back().cmd, subs.back().overrides, subs.back().config_path);
  };
  add("generate", "emit a synthetic cascade dataset (claims.jsonl + features.tsv)", cmd_generate);
  add("train", "fit the model; writes checkpoint.bin, history.csv, metrics.json", cmd_train);
  add("evaluate", "score a checkpoint on a dataset; writes metrics.json", cmd_evaluate);
  add("early-detect", "accuracy under truncation budgets; writes curve.csv", cmd_early_detect);
  add("robustness", "model vs ablation under edge noise; writes robustness.csv", cmd_robustness);
  add("sweep", "T x gamma grid; writes sweep.csv", cmd_sweep);
  add("convert", "convert ma-tree (or normalize jsonl) into canonical jsonl", cmd_convert);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  for (Sub& sub : subs) {
    if (!sub.cmd->parsed()) continue;
    try {
      Run run;
      if (!sub.config_path.empty()) run.kv = parse_config_file(sub.config_path);
      for (const auto& [key, value] : sub.overrides) run.kv[key] = value;  // flags win
      set_threads(run);
      return sub.fn(run);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 1;
    } catch (const DataError& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  }
  return 1;
}
