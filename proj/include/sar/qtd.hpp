#pragma once

#include <string>
#include <vector>

#include "sar/autodiff.hpp"
#include "sar/data.hpp"

namespace sar {

// Test-time candidate counts per question type (N' in the pipeline).
struct NPrimePolicy {
  int n_prime_yes_no = 2;
  int n_prime_other = 10;

  void validate(int trained_n) const;  // both in [1, trained_n]
};

// Gated-recurrence binary classifier over question tokens: yes/no vs
// non-yes/no. Off-line module, applied only at test time.
struct QtdModel {
  std::vector<std::string> text_vocab;  // [0] is <unk>
  int embed_dim = 16;
  int hidden_dim = 32;
  uint64_t seed = 0;
  std::string config_hash;
  std::string answer_vocab_hash;  // of the dataset it was trained on

  Param embed;                 // [V, E]
  Param gate_w, gate_u, gate_b;  // forget gate
  Param cand_w, cand_u, cand_b;  // candidate state
  Param head_w, head_b;          // hidden -> 1

  static QtdModel init(std::vector<std::string> text_vocab, int embed_dim, int hidden_dim,
                       uint64_t seed);
  std::vector<Param*> params();
  int token_index(const std::string& token) const;
};

struct QtdTrainConfig {
  int folds = 5;
  int epochs = 4;
  int batch_size = 16;
  double lr = 3e-3;
  int embed_dim = 16;
  int hidden_dim = 32;
  uint64_t seed = 13;
};

struct QtdTrainResult {
  QtdModel model;        // trained on the full split
  double cv_accuracy = 0.0;  // mean held-out accuracy over the folds
};

// Deterministic k-fold assignment; every index lands in exactly one fold.
std::vector<int> fold_assignment(size_t count, int folds, uint64_t seed);

// 5-fold cross-validation accuracy plus a final model trained on everything.
// Throws if the split holds a single class.
QtdTrainResult train_qtd(const DatasetSplit& train_split, const QtdTrainConfig& cfg);

// P(yes_no) in [0,1].
double qtd_probability(const QtdModel& model, const Tokens& question_tokens);

// Thresholded at 0.5.
QuestionType classify_type(const QtdModel& model, const Tokens& question_tokens);

int n_prime_for(const QtdModel& model, const Tokens& question_tokens, const NPrimePolicy& policy);

void save_qtd(const QtdModel& model, double cv_accuracy, const std::string& path);
std::pair<QtdModel, double> load_qtd(const std::string& path);

}  // namespace sar
