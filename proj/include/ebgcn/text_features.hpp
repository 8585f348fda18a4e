#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ebgcn/cascade.hpp"
#include "ebgcn/tensor.hpp"

namespace ebgcn::text {

using num::Tensor64;

struct Vocabulary {
  std::vector<std::string> terms;  // selection order: score desc, term asc
  std::unordered_map<std::string, int> index;
  std::vector<long long> df;  // aligned with terms
  long long num_docs = 0;

  int dim() const { return static_cast<int>(terms.size()); }
  double idf(int term_idx) const;
};

// Lowercase, split on any non-alphanumeric byte, drop tokens shorter than 2.
std::vector<std::string> tokenize(const std::string& text);

// Scores each term by max over documents of tf * idf with the smoothed
// idf = ln((1+N)/(1+df)) + 1 and keeps the max_terms highest, ties broken
// lexicographically. Fit on training texts only.
Vocabulary fit_vocabulary(const std::vector<std::string>& texts, int max_terms = 5000);

// Row i = L2-normalized tf*idf of texts[i] over the frozen vocabulary.
// Out-of-vocabulary tokens are ignored; an empty text yields a zero row.
Tensor64 transform(const Vocabulary& vocab, const std::vector<std::string>& texts);

void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

// Node features for a whole dataset, claim-major. claim_rows(i) copies out
// the block for claim i (these matrices are small).
struct DatasetFeatures {
  Tensor64 rows;
  std::vector<int> offsets;  // offsets[i] = first row of claim i; size m+1

  int dim() const { return rows.cols(); }
  Tensor64 claim_rows(int claim_idx) const;
};

DatasetFeatures featurize_tfidf(const Vocabulary& vocab, const cascade::Dataset& dataset);

// Embedding file: one line per uid, "uid<TAB>v1 v2 ... vd". Missing uids get
// zero rows and are counted in missing_uids; inconsistent dimensions are an
// error.
DatasetFeatures load_embeddings(const std::string& path, const cascade::Dataset& dataset,
                                int* missing_uids = nullptr);

void write_embeddings(const std::string& path, const cascade::Dataset& dataset,
                      const DatasetFeatures& features);

}  // namespace ebgcn::text
