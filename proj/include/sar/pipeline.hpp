#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sar/captions.hpp"
#include "sar/cas.hpp"
#include "sar/data.hpp"
#include "sar/qtd.hpp"
#include "sar/ve.hpp"

namespace sar {

// Everything inference needs; all models immutable and shared.
struct PipelineModels {
  const CasModel* cas = nullptr;
  const VeModel* ve = nullptr;
  const QtdModel* qtd = nullptr;  // optional when policy is symmetric
  const CategoryDict* dict = nullptr;
  StrategyPlan plan;
  NPrimePolicy policy;
};

struct Prediction {
  std::string example_id;
  std::string chosen_answer;
  DenseCaption chosen_caption;
  std::vector<std::pair<std::string, double>> candidate_scores;  // CAS order: (answer, ve score)
  int n_prime_used = 0;
  bool fmm_fallback = false;  // test-phase R with no category match, served as C
};

// Eq-5 style inference: top-N' CAS candidates, captions per the plan's test
// strategy, sigmoid(Trm) per caption, argmax with ties going to the higher
// CAS rank. Throws when N' exceeds the N the scorer was trained with.
Prediction infer_answer(const PipelineModels& models, const VqaExample& example,
                        const FeatureSet& features);

// Soft VQA metric: the chosen answer's target score, 0 when absent, capped
// at 1.
double vqa_accuracy(const Prediction& prediction, const VqaExample& example);

struct EvalReport {
  double accuracy_all = 0.0;
  double accuracy_yes_no = 0.0;
  double accuracy_non_yes_no = 0.0;
  long count_all = 0;
  long count_yes_no = 0;
  long count_non_yes_no = 0;
  std::optional<double> gap;  // set only when both splits were evaluated
  std::map<int, double> topn_recall_curve;
  std::map<std::string, double> per_category_breakdown;
  long fmm_fallbacks = 0;
};

// Mean vqa_accuracy overall, per question type, and per category, plus the
// CAS top-N recall curve over the full vocabulary. Aggregation is done in
// example_id order, so the report is independent of split ordering.
EvalReport evaluate(const PipelineModels& models, const DatasetSplit& split,
                    const FeatureSet& features);

// accuracy(val_iid) - accuracy(test_shifted); positive means prior-dependent.
double gap_between(const EvalReport& val_iid, const EvalReport& test_shifted);

struct AblationInputs {
  const DatasetSplit* train = nullptr;
  const DatasetSplit* test_shifted = nullptr;
  const DatasetSplit* val_iid = nullptr;
  const FeatureSet* features = nullptr;
  int n = 12;  // candidates per example for reranker training
  NPrimePolicy policy;
  std::vector<std::string> rows = {"cas_only", "cas_ve", "cas_ve_qtd", "cas_ve_ssl_qtd"};
  std::vector<std::string> strategies = {"RtoC"};
  int cas_epochs = 30;
  double cas_lr = 0.05;
  uint64_t cas_seed = 11;
  QtdTrainConfig qtd;
  VeConfig ve_arch;
  VeTrainConfig ve;
};

struct AblationRow {
  std::string name;
  std::string strategy;
  EvalReport test_shifted;
  EvalReport val_iid;
  double gap = 0.0;
  double delta_vs_cas_only = 0.0;  // test_shifted accuracy_all difference
};

// Shared data and seeds across rows; cas_only is realized as the degenerate
// policy (1,1), so it equals the CAS argmax by construction.
std::vector<AblationRow> ablate(const AblationInputs& inputs);

struct SweepPoint {
  QuestionType type = QuestionType::yes_no;
  int n_prime = 1;
  double accuracy = 0.0;
};

// Accuracy per (ground-truth type, N'), QTD bypassed. Ranges are inclusive
// and must stay within [1, trained N].
std::vector<SweepPoint> sweep_n_prime(const PipelineModels& models, const DatasetSplit& split,
                                      const FeatureSet& features, std::pair<int, int> range_yes_no,
                                      std::pair<int, int> range_other);

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);

}  // namespace sar
