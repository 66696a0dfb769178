#include "sar/ve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>

#include "sar/errors.hpp"
#include "sar/hash.hpp"
#include "sar/optimizer.hpp"
#include "sar/rng.hpp"

namespace sar {

using nlohmann::json;

void VeConfig::validate() const {
  if (text_dim < 2) throw ConfigError("ve: text_dim must be >= 2");
  if (heads < 1) throw ConfigError("ve: heads must be >= 1");
  if (text_dim % heads != 0) throw ConfigError("ve: text_dim must be divisible by heads");
  if (max_caption_len < 1) throw ConfigError("ve: max_caption_len must be >= 1");
}

void VeTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("ve: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("ve: batch_size must be >= 1");
  if (alpha < 0.0) throw ConfigError("ve: alpha must be >= 0");
  if (ssl_enabled && batch_size < 2)
    throw ConfigError("ve: batch_size must be >= 2 when ssl is enabled");
  if (!(lr >= 0.0)) throw ConfigError("ve: lr must be >= 0");
}

namespace {

VeModel::Block make_block(const std::string& prefix, int d, int heads) {
  VeModel::Block b;
  const int dh = d / heads;
  for (int h = 0; h < heads; ++h) {
    const std::string hs = prefix + ".h" + std::to_string(h);
    b.wq.emplace_back(hs + ".wq", d, dh);
    b.wk.emplace_back(hs + ".wk", d, dh);
    b.wv.emplace_back(hs + ".wv", d, dh);
    b.wo.emplace_back(hs + ".wo", dh, d);
  }
  b.ffn_w1 = Param(prefix + ".ffn_w1", d, 2 * d);
  b.ffn_b1 = Param(prefix + ".ffn_b1", 1, 2 * d);
  b.ffn_w2 = Param(prefix + ".ffn_w2", 2 * d, d);
  b.ffn_b2 = Param(prefix + ".ffn_b2", 1, d);
  return b;
}

void collect_block(VeModel::Block& b, std::vector<Param*>& out) {
  for (auto& p : b.wq) out.push_back(&p);
  for (auto& p : b.wk) out.push_back(&p);
  for (auto& p : b.wv) out.push_back(&p);
  for (auto& p : b.wo) out.push_back(&p);
  out.push_back(&b.ffn_w1);
  out.push_back(&b.ffn_b1);
  out.push_back(&b.ffn_w2);
  out.push_back(&b.ffn_b2);
}

}  // namespace

VeModel VeModel::init(const VeConfig& cfg, std::vector<std::string> text_vocab,
                      std::vector<std::string> answer_vocabulary, int visual_dim, uint64_t seed) {
  cfg.validate();
  VeModel m;
  m.cfg = cfg;
  m.text_vocab = std::move(text_vocab);
  if (m.text_vocab.empty() || m.text_vocab[0] != "<unk>")
    throw ConfigError("ve: text vocabulary must start with <unk>");
  std::sort(m.text_vocab.begin() + 1, m.text_vocab.end());  // token_index bisects
  m.answer_vocabulary = std::move(answer_vocabulary);
  m.visual_dim = visual_dim;
  m.seed = seed;
  const int d = cfg.text_dim;
  m.tok_embed = Param("tok_embed", static_cast<int>(m.text_vocab.size()), d);
  m.pos_embed = Param("pos_embed", cfg.max_caption_len, d);
  m.text_block = make_block("text", d, cfg.heads);
  m.vis_w = Param("vis_w", visual_dim, d);
  m.vis_b = Param("vis_b", 1, d);
  m.cross_block = make_block("cross", d, cfg.heads);
  m.head_w1 = Param("head_w1", d, d);
  m.head_b1 = Param("head_b1", 1, d);
  m.head_w2 = Param("head_w2", d, 1);
  m.head_b2 = Param("head_b2", 1, 1);

  Rng rng(seed);
  for (Param* p : m.params()) init_uniform(*p, rng);
  return m;
}

std::vector<Param*> VeModel::params() {
  std::vector<Param*> out;
  out.push_back(&tok_embed);
  out.push_back(&pos_embed);
  collect_block(text_block, out);
  out.push_back(&vis_w);
  out.push_back(&vis_b);
  collect_block(cross_block, out);
  out.push_back(&head_w1);
  out.push_back(&head_b1);
  out.push_back(&head_w2);
  out.push_back(&head_b2);
  return out;
}

std::vector<const Param*> VeModel::params() const {
  auto mut = const_cast<VeModel*>(this)->params();
  return std::vector<const Param*>(mut.begin(), mut.end());
}

int VeModel::token_index(const std::string& token) const {
  const std::string t = to_lower(token);
  auto it = std::lower_bound(text_vocab.begin() + 1, text_vocab.end(), t);
  if (it != text_vocab.end() && *it == t) return static_cast<int>(it - text_vocab.begin());
  return 0;
}

bool VeModel::all_finite() const {
  for (const Param* p : params())
    if (!p->value.all_finite()) return false;
  return true;
}

std::vector<std::string> build_text_vocab(const CaptionDataset& ds) {
  std::set<std::string> toks;
  for (const auto& inst : ds.instances)
    for (const auto& t : inst.caption.tokens) toks.insert(to_lower(t));
  std::vector<std::string> vocab;
  vocab.push_back("<unk>");
  vocab.insert(vocab.end(), toks.begin(), toks.end());
  return vocab;
}

std::vector<VeInstance> make_instances(const CaptionDataset& ds, const FeatureSet& features) {
  std::vector<VeInstance> out;
  out.reserve(ds.instances.size());
  for (const auto& inst : ds.instances) {
    VeInstance vi;
    vi.image_id = inst.image_id;
    vi.image = &features.require(inst.image_id).vectors;
    vi.caption_tokens = inst.caption.tokens;
    vi.target = inst.target;
    out.push_back(std::move(vi));
  }
  return out;
}

namespace {

// Parameter leaves, bound once per tape and shared by every pair in a batch.
struct BoundModel {
  Tape::Id tok, pos;
  struct BoundBlock {
    std::vector<Tape::Id> wq, wk, wv, wo;
    Tape::Id w1, b1, w2, b2;
  } text, cross;
  Tape::Id vis_w, vis_b;
  Tape::Id head_w1, head_b1, head_w2, head_b2;
};

Tape::Id bind_param(Tape& tape, const Param& p, bool bind_grads) {
  // backward() is never invoked on tapes built with bind_grads=false, so the
  // const_cast cannot leak a mutation.
  return bind_grads ? tape.param(const_cast<Param&>(p)) : tape.constant(p.value);
}

BoundModel::BoundBlock bind_block(Tape& tape, const VeModel::Block& b, bool g) {
  BoundModel::BoundBlock out;
  for (const auto& p : b.wq) out.wq.push_back(bind_param(tape, p, g));
  for (const auto& p : b.wk) out.wk.push_back(bind_param(tape, p, g));
  for (const auto& p : b.wv) out.wv.push_back(bind_param(tape, p, g));
  for (const auto& p : b.wo) out.wo.push_back(bind_param(tape, p, g));
  out.w1 = bind_param(tape, b.ffn_w1, g);
  out.b1 = bind_param(tape, b.ffn_b1, g);
  out.w2 = bind_param(tape, b.ffn_w2, g);
  out.b2 = bind_param(tape, b.ffn_b2, g);
  return out;
}

BoundModel bind_model(Tape& tape, const VeModel& m, bool g) {
  BoundModel b;
  b.tok = bind_param(tape, m.tok_embed, g);
  b.pos = bind_param(tape, m.pos_embed, g);
  b.text = bind_block(tape, m.text_block, g);
  b.vis_w = bind_param(tape, m.vis_w, g);
  b.vis_b = bind_param(tape, m.vis_b, g);
  b.cross = bind_block(tape, m.cross_block, g);
  b.head_w1 = bind_param(tape, m.head_w1, g);
  b.head_b1 = bind_param(tape, m.head_b1, g);
  b.head_w2 = bind_param(tape, m.head_w2, g);
  b.head_b2 = bind_param(tape, m.head_b2, g);
  return b;
}

// queries [T,d] attend over keys/values [S,d]; residual + 0.5 rescale, then
// a tanh FFN with the same skip. Scaling instead of layer norm keeps the op
// set closed and the magnitudes bounded.
Tape::Id attention_block(Tape& tape, const BoundModel::BoundBlock& blk, Tape::Id queries,
                         Tape::Id keys_values, int heads, int dh) {
  std::vector<Tape::Id> head_outs;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Tape::Id q = tape.matmul(queries, blk.wq[static_cast<size_t>(h)]);
    Tape::Id k = tape.matmul(keys_values, blk.wk[static_cast<size_t>(h)]);
    Tape::Id v = tape.matmul(keys_values, blk.wv[static_cast<size_t>(h)]);
    Tape::Id scores = tape.scale(tape.matmul_nt(q, k), inv_sqrt);
    Tape::Id attn = tape.softmax_rows(scores);
    head_outs.push_back(tape.matmul(tape.matmul(attn, v), blk.wo[static_cast<size_t>(h)]));
  }
  Tape::Id mixed = heads == 1 ? head_outs[0] : tape.sum(head_outs);
  Tape::Id x = tape.scale(tape.add(queries, mixed), 0.5);
  Tape::Id f = tape.add_rowvec(
      tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(x, blk.w1), blk.b1)), blk.w2), blk.b2);
  return tape.scale(tape.add(x, f), 0.5);
}

Tape::Id logit_from_bound(Tape& tape, const VeModel& m, const BoundModel& b, const Tensor& image,
                          const Tokens& caption) {
  if (caption.empty()) throw ConfigError("ve: empty caption");
  std::vector<int> tok_idx, pos_idx;
  const int limit = std::min<int>(m.cfg.max_caption_len, static_cast<int>(caption.size()));
  for (int i = 0; i < limit; ++i) {
    tok_idx.push_back(m.token_index(caption[static_cast<size_t>(i)]));
    pos_idx.push_back(i);
  }
  Tape::Id x = tape.add(tape.gather_rows(b.tok, tok_idx), tape.gather_rows(b.pos, pos_idx));

  const int dh = m.cfg.text_dim / m.cfg.heads;
  if (m.cfg.text_self_attention) x = attention_block(tape, b.text, x, x, m.cfg.heads, dh);

  Tape::Id vis = tape.relu(
      tape.add_rowvec(tape.matmul(tape.constant(image), b.vis_w), b.vis_b));

  Tape::Id pooled;
  if (m.cfg.cross_attention) {
    Tape::Id fused = attention_block(tape, b.cross, x, vis, m.cfg.heads, dh);
    pooled = tape.mean_rows(fused);
  } else {
    pooled = tape.scale(tape.add(tape.mean_rows(x), tape.mean_rows(vis)), 0.5);
  }

  Tape::Id hidden = tape.relu(tape.add_rowvec(tape.matmul(pooled, b.head_w1), b.head_b1));
  return tape.add_rowvec(tape.matmul(hidden, b.head_w2), b.head_b2);
}

}  // namespace

Tape::Id ve_logit(Tape& tape, const VeModel& model, const Tensor& image, const Tokens& caption,
                  bool bind_grads) {
  BoundModel b = bind_model(tape, model, bind_grads);
  return logit_from_bound(tape, model, b, image, caption);
}

double score(const VeModel& model, const Tensor& image, const Tokens& caption_tokens) {
  Tape tape;
  Tape::Id z = ve_logit(tape, model, image, caption_tokens, false);
  return stable_sigmoid(tape.value(z).at(0, 0));
}

double score(const VeModel& model, const Tensor& image, const DenseCaption& caption) {
  return score(model, image, caption.tokens);
}

double loss_ve(const Tensor& logits, const Tensor& targets) {
  if (!logits.same_shape(targets))
    throw ConfigError("loss_ve: logits and targets must have the same shape");
  for (double t : targets.data)
    if (t < 0.0 || t > 1.0)
      throw ConfigError("loss_ve: target " + std::to_string(t) + " outside [0,1]");
  double s = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) s += bce_with_logits(logits.data[i], targets.data[i]);
  return s / static_cast<double>(logits.size());
}

double loss_ssl(const Tensor& irrelevant_scores, double alpha) {
  if (alpha < 0.0) throw ConfigError("loss_ssl: alpha must be >= 0");
  for (double p : irrelevant_scores.data)
    if (!(p > 0.0 && p < 1.0))
      throw ConfigError("loss_ssl: score " + std::to_string(p) + " outside (0,1)");
  double s = 0.0;
  for (double p : irrelevant_scores.data) s += p;
  return alpha * s / static_cast<double>(irrelevant_scores.size());
}

double loss_total(double l_ve, double l_ssl) { return l_ve + l_ssl; }

namespace {

// Cyclic partner for in-batch irrelevant pairs: the next slot with a
// different image. Returns -1 when the batch holds a single image.
int ssl_partner(const std::vector<const VeInstance*>& batch, size_t i) {
  for (size_t step = 1; step < batch.size(); ++step) {
    size_t j = (i + step) % batch.size();
    if (batch[j]->image_id != batch[i]->image_id) return static_cast<int>(j);
  }
  return -1;
}

// Builds L_VE + L_ssl for one batch on the given tape.
Tape::Id batch_loss_node(Tape& tape, const VeModel& model,
                         const std::vector<const VeInstance*>& batch, double alpha, bool ssl,
                         bool bind_grads) {
  BoundModel bound = bind_model(tape, model, bind_grads);
  std::vector<Tape::Id> bce_terms;
  std::vector<Tape::Id> ssl_terms;
  for (size_t i = 0; i < batch.size(); ++i) {
    const VeInstance& inst = *batch[i];
    Tape::Id z = logit_from_bound(tape, model, bound, *inst.image, inst.caption_tokens);
    bce_terms.push_back(tape.bce_with_logits_mean(z, {inst.target}));
    if (ssl && alpha > 0.0) {
      int j = ssl_partner(batch, i);
      if (j >= 0) {
        Tape::Id zp = logit_from_bound(tape, model, bound, *batch[static_cast<size_t>(j)]->image,
                                       inst.caption_tokens);
        ssl_terms.push_back(tape.sigmoid(zp));
      }
    }
  }
  Tape::Id loss = tape.scale(tape.sum(bce_terms), 1.0 / static_cast<double>(batch.size()));
  if (!ssl_terms.empty()) {
    Tape::Id ssl_term =
        tape.scale(tape.sum(ssl_terms), alpha / static_cast<double>(batch.size()));
    loss = tape.add(loss, ssl_term);
  }
  return loss;
}

std::vector<const VeInstance*> as_pointers(const std::vector<VeInstance>& v) {
  std::vector<const VeInstance*> out;
  out.reserve(v.size());
  for (const auto& i : v) out.push_back(&i);
  return out;
}

}  // namespace

double ve_batch_loss(const VeModel& model, const std::vector<VeInstance>& batch, double alpha,
                     bool ssl) {
  Tape tape;
  Tape::Id loss = batch_loss_node(tape, model, as_pointers(batch), alpha, ssl, false);
  return tape.value(loss).at(0, 0);
}

double ve_batch_backward(VeModel& model, const std::vector<VeInstance>& batch, double alpha,
                         bool ssl) {
  Tape tape;
  Tape::Id loss = batch_loss_node(tape, model, as_pointers(batch), alpha, ssl, true);
  tape.backward(loss);
  return tape.value(loss).at(0, 0);
}

VeTrainResult train_ve(VeModel& model, const CaptionDataset& ds, const FeatureSet& features,
                       const VeTrainConfig& cfg) {
  cfg.validate();
  if (ds.instances.empty()) throw ConfigError("train_ve: empty caption dataset");

  std::vector<VeInstance> instances = make_instances(ds, features);
  Adam adam(model.params(), cfg.lr);
  Rng rng(cfg.seed);
  std::vector<size_t> order(instances.size());
  std::iota(order.begin(), order.end(), size_t{0});

  VeTrainResult result;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    long counted = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<const VeInstance*> batch;
      for (size_t i = start; i < end; ++i) batch.push_back(&instances[order[i]]);

      Tape tape;
      Tape::Id loss = batch_loss_node(tape, model, batch, cfg.alpha, cfg.ssl_enabled, true);
      const double loss_value = tape.value(loss).at(0, 0);
      if (!std::isfinite(loss_value)) {
        double norm = 0.0;
        for (const Param* p : model.params()) norm += p->value.sq_norm();
        throw TrainingDiverged("train_ve: non-finite loss at step " + std::to_string(step) +
                               " (epoch " + std::to_string(epoch) + "), parameter norm " +
                               std::to_string(std::sqrt(norm)));
      }
      if (cfg.lr > 0.0) {
        tape.backward(loss);
        adam.step();
        adam.zero_grads();
      }
      epoch_loss += loss_value * static_cast<double>(batch.size());
      counted += static_cast<long>(batch.size());
      ++step;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(counted));
  }
  return result;
}

GradCheckResult grad_check(VeModel& model, const std::vector<VeInstance>& batch, double epsilon,
                           int samples_per_tensor, uint64_t seed, double alpha, bool ssl) {
  // Analytic pass.
  for (Param* p : model.params()) p->zero_grad();
  ve_batch_backward(model, batch, alpha, ssl);
  std::vector<Tensor> analytic;
  for (Param* p : model.params()) analytic.push_back(p->grad);

  GradCheckResult result;
  Rng rng(seed);
  auto params = model.params();
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    const size_t n = p.value.size();
    std::vector<size_t> picks;
    if (static_cast<long>(n) <= samples_per_tensor) {
      picks.resize(n);
      std::iota(picks.begin(), picks.end(), size_t{0});
    } else {
      std::set<size_t> chosen;
      while (static_cast<int>(chosen.size()) < samples_per_tensor)
        chosen.insert(static_cast<size_t>(rng.next_below(n)));
      picks.assign(chosen.begin(), chosen.end());
    }
    for (size_t j : picks) {
      const double saved = p.value.data[j];
      p.value.data[j] = saved + epsilon;
      const double up = ve_batch_loss(model, batch, alpha, ssl);
      p.value.data[j] = saved - epsilon;
      const double down = ve_batch_loss(model, batch, alpha, ssl);
      p.value.data[j] = saved;
      const double gn = (up - down) / (2.0 * epsilon);
      const double ga = analytic[pi].data[j];
      double err = 0.0;
      if (std::abs(ga) > 1e-8 || std::abs(gn) > 1e-8)
        err = std::abs(ga - gn) / std::max(std::abs(ga) + std::abs(gn), 1e-8);
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.params_checked;
    }
  }
  for (Param* p : model.params()) p->zero_grad();
  return result;
}

namespace {

json param_to_json(const Param& p) {
  return json{{"rows", p.value.rows}, {"cols", p.value.cols}, {"data", p.value.data}};
}

void param_from_json(const json& j, Param& p) {
  p.value = Tensor(j.at("rows").get<int>(), j.at("cols").get<int>(),
                   j.at("data").get<std::vector<double>>());
  p.grad = Tensor(p.value.rows, p.value.cols);
}

}  // namespace

void save_ve(const VeModel& model, const std::string& path) {
  json j{{"format", "sar.ve"},
         {"version", 1},
         {"tool_version", kToolVersion},
         {"seed", model.seed},
         {"config_hash", model.config_hash},
         {"vocab_hash", vocab_hash(model.answer_vocabulary)},
         {"answer_vocabulary", model.answer_vocabulary},
         {"text_vocab", model.text_vocab},
         {"text_dim", model.cfg.text_dim},
         {"heads", model.cfg.heads},
         {"max_caption_len", model.cfg.max_caption_len},
         {"text_self_attention", model.cfg.text_self_attention},
         {"cross_attention", model.cfg.cross_attention},
         {"visual_dim", model.visual_dim},
         {"trained_n", model.trained_n},
         {"plan", model.plan.label()},
         {"alpha", model.alpha},
         {"ssl", model.ssl}};
  json params = json::object();
  for (const Param* p : model.params()) params[p->name] = param_to_json(*p);
  j["params"] = std::move(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
}

VeModel load_ve(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.value("format", "") != "sar.ve") throw ParseError(path + ": not a sar.ve model file");
  try {
    VeConfig cfg;
    cfg.text_dim = j.at("text_dim").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.max_caption_len = j.at("max_caption_len").get<int>();
    cfg.text_self_attention = j.at("text_self_attention").get<bool>();
    cfg.cross_attention = j.at("cross_attention").get<bool>();
    VeModel m = VeModel::init(cfg, j.at("text_vocab").get<std::vector<std::string>>(),
                              j.at("answer_vocabulary").get<std::vector<std::string>>(),
                              j.at("visual_dim").get<int>(), j.at("seed").get<uint64_t>());
    m.trained_n = j.at("trained_n").get<int>();
    m.plan = StrategyPlan::from_label(j.at("plan").get<std::string>());
    m.config_hash = j.at("config_hash").get<std::string>();
    m.alpha = j.at("alpha").get<double>();
    m.ssl = j.at("ssl").get<bool>();
    const json& params = j.at("params");
    for (Param* p : m.params()) param_from_json(params.at(p->name), *p);
    return m;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_loss_curve(const std::vector<double>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "epoch,mean_loss\n";
  out.precision(17);
  for (size_t i = 0; i < curve.size(); ++i) out << (i + 1) << ',' << curve[i] << '\n';
}

}  // namespace sar
