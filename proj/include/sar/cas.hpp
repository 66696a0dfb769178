#pragma once

#include <map>
#include <string>
#include <vector>

#include "sar/data.hpp"

namespace sar {

// One selected candidate: index into the answer vocabulary plus its score.
struct Candidate {
  int answer_index = 0;
  double score = 0.0;

  bool operator==(const Candidate&) const = default;
};

// Candidates for one example, scores non-increasing, ties broken by
// ascending vocabulary index, no duplicates.
struct CandidateSet {
  std::string example_id;
  std::vector<Candidate> entries;
};

// Linear scorer over (bag-of-tokens question vector ++ mean-pooled image
// features). Deliberately simple: it learns the train-split priors fast,
// which is exactly what the reranker is there to correct.
struct CasModel {
  std::vector<std::string> answer_vocabulary;
  std::vector<std::string> question_vocab;  // sorted, lowercase
  int feature_dim = 0;
  Tensor weights;  // |A| x (|question_vocab| + feature_dim)
  Tensor bias;     // 1 x |A|
  uint64_t seed = 0;
  std::string config_hash;

  int question_token_index(const std::string& lowercase_token) const;
};

struct CasTrainResult {
  CasModel model;
  std::vector<double> loss_curve;  // mean cross-entropy per epoch
};

CasTrainResult train_cas(const DatasetSplit& train_split, const FeatureSet& features, int epochs,
                         double lr, uint64_t seed);

// Regression scores over the full vocabulary. Throws on unknown image_id.
std::vector<double> predict_scores(const CasModel& model, const VqaExample& example,
                                   const FeatureSet& features);

// The N largest scores, sorted descending, stable tie-break by vocabulary
// index. Throws unless 1 <= n <= |scores|.
std::vector<Candidate> select_topn(const std::vector<double>& scores, int n);

// recall(N) = fraction of examples whose max-t answer appears in the top N.
std::map<int, double> topn_recall(const CasModel& model, const DatasetSplit& split,
                                  const FeatureSet& features, const std::vector<int>& n_values);

void save_cas(const CasModel& model, const std::string& path);
CasModel load_cas(const std::string& path);

}  // namespace sar
