#pragma once

#include <string>
#include <vector>

#include "sar/autodiff.hpp"
#include "sar/captions.hpp"
#include "sar/data.hpp"

namespace sar {

struct VeConfig {
  int text_dim = 32;  // d
  int heads = 2;
  int max_caption_len = kTrimC;
  // Disabling both blocks leaves embeddings -> mean -> dense head, the
  // shallow smooth path grad-checked at the tight tolerance.
  bool text_self_attention = true;
  bool cross_attention = true;

  void validate() const;
};

struct VeTrainConfig {
  int epochs = 5;
  int batch_size = 32;
  double lr = 1e-3;
  uint64_t seed = 17;
  double alpha = 1.0;  // SSL down-weighting coefficient
  bool ssl_enabled = false;

  void validate() const;  // alpha >= 0; batch_size >= 2 when ssl_enabled
};

// Two-stream entailment scorer: token embeddings + self-attention encode the
// caption, a linear projection encodes the object features, cross-attention
// lets caption tokens look at objects, and a dense head emits one pre-sigmoid
// real. sigmoid(z) is the entailment score.
struct VeModel {
  VeConfig cfg;
  std::vector<std::string> text_vocab;  // [0] is <unk>
  std::vector<std::string> answer_vocabulary;
  int visual_dim = 0;
  int trained_n = 0;  // candidates per example in the training captions
  StrategyPlan plan;
  uint64_t seed = 0;
  std::string config_hash;
  double alpha = 1.0;
  bool ssl = false;

  Param tok_embed;  // [V, d]
  Param pos_embed;  // [max_caption_len, d]

  struct Block {
    std::vector<Param> wq, wk, wv, wo;  // per head
    Param ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };
  Block text_block;
  Param vis_w, vis_b;  // D -> d projection
  Block cross_block;
  Param head_w1, head_b1, head_w2, head_b2;  // d -> d -> 1

  static VeModel init(const VeConfig& cfg, std::vector<std::string> text_vocab,
                      std::vector<std::string> answer_vocabulary, int visual_dim, uint64_t seed);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  int token_index(const std::string& token) const;  // case-insensitive, 0 when unknown
  bool all_finite() const;
};

// <unk> plus the sorted lowercase tokens of the caption dataset.
std::vector<std::string> build_text_vocab(const CaptionDataset& ds);

// One (image, caption, target) triple ready for the scorer.
struct VeInstance {
  std::string image_id;
  const Tensor* image = nullptr;
  Tokens caption_tokens;
  double target = 0.0;
};

std::vector<VeInstance> make_instances(const CaptionDataset& ds, const FeatureSet& features);

// Pre-sigmoid graph output for one pair; used by training and scoring.
// When bind_grads, parameter leaves accumulate into Param::grad on backward.
Tape::Id ve_logit(Tape& tape, const VeModel& model, const Tensor& image, const Tokens& caption,
                  bool bind_grads);

// sigmoid(Trm(image, caption)), strictly inside (0,1). Pure; throws on an
// empty caption.
double score(const VeModel& model, const Tensor& image, const DenseCaption& caption);
double score(const VeModel& model, const Tensor& image, const Tokens& caption_tokens);

// Multi-label soft loss over pre-sigmoid scores:
//   -1/(M*N) sum [ t*log(sigmoid(z)) + (1-t)*log(1-sigmoid(z)) ]
// in the numerically stable formulation. Throws if any t is outside [0,1].
double loss_ve(const Tensor& logits, const Tensor& targets);

// alpha/(M*N) * sum of irrelevant-pair confidences (sigmoid scores in (0,1)).
double loss_ssl(const Tensor& irrelevant_scores, double alpha);

// L = L_VE + L_ssl.
double loss_total(double l_ve, double l_ssl);

struct VeTrainResult {
  std::vector<double> loss_curve;  // mean total loss per epoch
};

// Mini-batch Adam over the caption dataset. Deterministic given cfg.seed.
// With SSL enabled, each caption is also paired with the image of the next
// batch slot holding a different image, and those pair confidences are pushed
// down. Throws TrainingDiverged (with step index and parameter norm) if the
// loss goes non-finite.
VeTrainResult train_ve(VeModel& model, const CaptionDataset& ds, const FeatureSet& features,
                       const VeTrainConfig& cfg);

struct GradCheckResult {
  double max_rel_error = 0.0;
  long params_checked = 0;
};

// Reverse-mode gradients of loss_total versus central finite differences,
// sampled per parameter tensor. Relative error uses |ga - gn| / (|ga| + |gn|)
// with both-near-zero treated as exact.
GradCheckResult grad_check(VeModel& model, const std::vector<VeInstance>& batch,
                           double epsilon = 1e-4, int samples_per_tensor = 20,
                           uint64_t seed = 0, double alpha = 1.0, bool ssl = true);

// Forward-only batch loss (L_VE + optional SSL term); the quantity grad_check
// differentiates.
double ve_batch_loss(const VeModel& model, const std::vector<VeInstance>& batch, double alpha,
                     bool ssl);

// Same quantity built on a gradient tape; fills Param::grad on backward.
double ve_batch_backward(VeModel& model, const std::vector<VeInstance>& batch, double alpha,
                         bool ssl);

void save_ve(const VeModel& model, const std::string& path);
VeModel load_ve(const std::string& path);

void write_loss_curve(const std::vector<double>& curve, const std::string& path);

}  // namespace sar
