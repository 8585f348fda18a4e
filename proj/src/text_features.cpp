#include "ebgcn/text_features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ebgcn/errors.hpp"

namespace ebgcn::text {

using nlohmann::json;

double Vocabulary::idf(int term_idx) const {
  return std::log((1.0 + static_cast<double>(num_docs)) / (1.0 + static_cast<double>(df[term_idx]))) + 1.0;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      if (cur.size() >= 2) out.push_back(cur);
      cur.clear();
    }
  }
  if (cur.size() >= 2) out.push_back(cur);
  return out;
}

Vocabulary fit_vocabulary(const std::vector<std::string>& texts, int max_terms) {
  if (max_terms < 1) throw DataError("fit_vocabulary: max_terms must be positive");

  const long long n_docs = static_cast<long long>(texts.size());
  std::map<std::string, long long> df;          // ordered: lexicographic ties resolve for free
  std::map<std::string, long long> max_tf;
  bool any_token = false;
  for (const std::string& text : texts) {
    std::map<std::string, long long> tf;
    for (const std::string& tok : tokenize(text)) ++tf[tok];
    for (const auto& [term, count] : tf) {
      any_token = true;
      ++df[term];
      max_tf[term] = std::max(max_tf[term], count);
    }
  }
  if (!any_token) throw DataError("fit_vocabulary: corpus has no usable tokens");

  struct Scored {
    double score;
    const std::string* term;
  };
  std::vector<Scored> scored;
  scored.reserve(df.size());
  for (const auto& [term, d] : df) {
    const double idf = std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(d))) + 1.0;
    scored.push_back({static_cast<double>(max_tf[term]) * idf, &term});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return *a.term < *b.term;
  });

  Vocabulary vocab;
  vocab.num_docs = n_docs;
  const int keep = std::min<int>(max_terms, static_cast<int>(scored.size()));
  for (int i = 0; i < keep; ++i) {
    vocab.index[*scored[i].term] = i;
    vocab.terms.push_back(*scored[i].term);
    vocab.df.push_back(df[*scored[i].term]);
  }
  return vocab;
}

Tensor64 transform(const Vocabulary& vocab, const std::vector<std::string>& texts) {
  if (vocab.dim() == 0) throw DataError("transform: vocabulary is empty");
  Tensor64 out(static_cast<int>(texts.size()), vocab.dim());
  for (int i = 0; i < out.rows(); ++i) {
    std::unordered_map<int, long long> tf;
    for (const std::string& tok : tokenize(texts[i])) {
      const auto it = vocab.index.find(tok);
      if (it != vocab.index.end()) ++tf[it->second];
    }
    double norm_sq = 0.0;
    for (const auto& [col, count] : tf) {
      const double w = static_cast<double>(count) * vocab.idf(col);
      out(i, col) = w;
      norm_sq += w * w;
    }
    if (norm_sq > 0.0) {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (const auto& [col, count] : tf) out(i, col) *= inv;
    }
  }
  return out;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  json j;
  j["terms"] = vocab.terms;
  j["df"] = vocab.df;
  j["num_docs"] = vocab.num_docs;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary to '" + path + "'");
  out << j.dump() << "\n";
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("vocabulary '" + path + "': " + e.what());
  }
  Vocabulary vocab;
  vocab.terms = j.at("terms").get<std::vector<std::string>>();
  vocab.df = j.at("df").get<std::vector<long long>>();
  vocab.num_docs = j.at("num_docs").get<long long>();
  if (vocab.df.size() != vocab.terms.size()) throw DataError("vocabulary '" + path + "': df/terms mismatch");
  for (std::size_t i = 0; i < vocab.terms.size(); ++i) vocab.index[vocab.terms[i]] = static_cast<int>(i);
  return vocab;
}

Tensor64 DatasetFeatures::claim_rows(int claim_idx) const {
  const int lo = offsets.at(claim_idx);
  const int hi = offsets.at(claim_idx + 1);
  Tensor64 out(hi - lo, rows.cols());
  for (int i = lo; i < hi; ++i)
    for (int j = 0; j < rows.cols(); ++j) out(i - lo, j) = rows(i, j);
  return out;
}

DatasetFeatures featurize_tfidf(const Vocabulary& vocab, const cascade::Dataset& dataset) {
  std::vector<std::string> texts;
  DatasetFeatures feats;
  feats.offsets.push_back(0);
  for (const cascade::Claim& c : dataset.claims) {
    for (const cascade::TweetNode& node : c.nodes) texts.push_back(node.text);
    feats.offsets.push_back(static_cast<int>(texts.size()));
  }
  feats.rows = transform(vocab, texts);
  return feats;
}

DatasetFeatures load_embeddings(const std::string& path, const cascade::Dataset& dataset,
                                int* missing_uids) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path + "'");

  std::unordered_map<std::string, std::vector<double>> table;
  int dim = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 'uid<TAB>values'");
    const std::string uid = line.substr(0, tab);
    std::vector<double> vec;
    std::stringstream ss(line.substr(tab + 1));
    double v;
    while (ss >> v) vec.push_back(v);
    if (vec.empty()) throw DataError(path + ":" + std::to_string(lineno) + ": no values");
    if (dim < 0) dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != dim)
      throw DataError(path + ":" + std::to_string(lineno) + ": dimension " + std::to_string(vec.size()) +
                      " != " + std::to_string(dim));
    table[uid] = std::move(vec);
  }
  if (dim <= 0) throw DataError("'" + path + "': empty embedding file");

  DatasetFeatures feats;
  feats.offsets.push_back(0);
  int total = 0;
  for (const cascade::Claim& c : dataset.claims) {
    total += c.n();
    feats.offsets.push_back(total);
  }
  feats.rows = Tensor64(total, dim);
  int missing = 0;
  int row = 0;
  for (const cascade::Claim& c : dataset.claims) {
    for (const cascade::TweetNode& node : c.nodes) {
      const auto it = table.find(node.uid);
      if (it == table.end()) {
        ++missing;  // zero row stands in
      } else {
        for (int j = 0; j < dim; ++j) feats.rows(row, j) = it->second[j];
      }
      ++row;
    }
  }
  if (missing_uids) *missing_uids = missing;
  return feats;
}

void write_embeddings(const std::string& path, const cascade::Dataset& dataset,
                      const DatasetFeatures& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embeddings to '" + path + "'");
  char buf[64];
  int row = 0;
  for (const cascade::Claim& c : dataset.claims) {
    for (const cascade::TweetNode& node : c.nodes) {
      out << node.uid << '\t';
      for (int j = 0; j < features.rows.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", features.rows(row, j));
        if (j) out << ' ';
        out << buf;
      }
      out << '\n';
      ++row;
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace ebgcn::text
