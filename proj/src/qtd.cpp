#include "sar/qtd.hpp"

#include <algorithm>
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

void NPrimePolicy::validate(int trained_n) const {
  if (n_prime_yes_no < 1 || n_prime_other < 1)
    throw ConfigError("policy: N' values must be >= 1");
  if (n_prime_yes_no > trained_n || n_prime_other > trained_n)
    throw ConfigError("policy: N' (" + std::to_string(n_prime_yes_no) + ", " +
                      std::to_string(n_prime_other) + ") exceeds trained N=" +
                      std::to_string(trained_n));
}

QtdModel QtdModel::init(std::vector<std::string> text_vocab, int embed_dim, int hidden_dim,
                        uint64_t seed) {
  QtdModel m;
  m.text_vocab = std::move(text_vocab);
  m.embed_dim = embed_dim;
  m.hidden_dim = hidden_dim;
  m.seed = seed;
  const int v = static_cast<int>(m.text_vocab.size());
  m.embed = Param("embed", v, embed_dim);
  m.gate_w = Param("gate_w", embed_dim, hidden_dim);
  m.gate_u = Param("gate_u", hidden_dim, hidden_dim);
  m.gate_b = Param("gate_b", 1, hidden_dim);
  m.cand_w = Param("cand_w", embed_dim, hidden_dim);
  m.cand_u = Param("cand_u", hidden_dim, hidden_dim);
  m.cand_b = Param("cand_b", 1, hidden_dim);
  m.head_w = Param("head_w", hidden_dim, 1);
  m.head_b = Param("head_b", 1, 1);
  Rng rng(seed);
  for (Param* p : m.params()) init_uniform(*p, rng);
  return m;
}

std::vector<Param*> QtdModel::params() {
  return {&embed,  &gate_w, &gate_u, &gate_b, &cand_w,
          &cand_u, &cand_b, &head_w, &head_b};
}

int QtdModel::token_index(const std::string& token) const {
  const std::string t = to_lower(token);
  auto it = std::lower_bound(text_vocab.begin() + 1, text_vocab.end(), t);
  if (it != text_vocab.end() && *it == t) return static_cast<int>(it - text_vocab.begin());
  return 0;
}

namespace {

struct BoundQtd {
  Tape::Id embed, gate_w, gate_u, gate_b, cand_w, cand_u, cand_b, head_w, head_b;
};

BoundQtd bind(Tape& tape, const QtdModel& m, bool grads) {
  auto leaf = [&](const Param& p) {
    return grads ? tape.param(const_cast<Param&>(p)) : tape.constant(p.value);
  };
  return BoundQtd{leaf(m.embed),  leaf(m.gate_w), leaf(m.gate_u),
                  leaf(m.gate_b), leaf(m.cand_w), leaf(m.cand_u),
                  leaf(m.cand_b), leaf(m.head_w), leaf(m.head_b)};
}

// Minimal gated recurrence:
//   f_t = sigmoid(x W_f + h U_f + b_f)
//   c_t = tanh(x W_c + (f_t . h) U_c + b_c)
//   h_t = (1 - f_t) . h + f_t . c_t
Tape::Id qtd_logit(Tape& tape, const QtdModel& m, const BoundQtd& b, const Tokens& tokens) {
  Tape::Id h = tape.constant(Tensor(1, m.hidden_dim));
  for (const auto& tok : tokens) {
    Tape::Id x = tape.gather_rows(b.embed, {m.token_index(tok)});
    Tape::Id f = tape.sigmoid(tape.add_rowvec(
        tape.add(tape.matmul(x, b.gate_w), tape.matmul(h, b.gate_u)), b.gate_b));
    Tape::Id gated = tape.mul(f, h);
    Tape::Id c = tape.tanh_op(tape.add_rowvec(
        tape.add(tape.matmul(x, b.cand_w), tape.matmul(gated, b.cand_u)), b.cand_b));
    Tape::Id keep = tape.add_const(tape.scale(f, -1.0), 1.0);
    h = tape.add(tape.mul(keep, h), tape.mul(f, c));
  }
  return tape.add_rowvec(tape.matmul(h, b.head_w), b.head_b);
}

double label_of(const VqaExample& e) {
  return e.question_type == QuestionType::yes_no ? 1.0 : 0.0;
}

void train_on(QtdModel& model, const std::vector<const VqaExample*>& examples,
              const QtdTrainConfig& cfg, uint64_t seed) {
  Adam adam(model.params(), cfg.lr);
  Rng rng(seed);
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Tape tape;
      BoundQtd b = bind(tape, model, true);
      std::vector<Tape::Id> terms;
      for (size_t i = start; i < end; ++i) {
        const VqaExample& e = *examples[order[i]];
        Tape::Id z = qtd_logit(tape, model, b, e.question_tokens);
        terms.push_back(tape.bce_with_logits_mean(z, {label_of(e)}));
      }
      Tape::Id loss = tape.scale(tape.sum(terms), 1.0 / static_cast<double>(terms.size()));
      tape.backward(loss);
      adam.step();
      adam.zero_grads();
    }
  }
}

double accuracy_on(const QtdModel& model, const std::vector<const VqaExample*>& examples) {
  if (examples.empty()) return 0.0;
  long correct = 0;
  for (const VqaExample* e : examples)
    if (classify_type(model, e->question_tokens) == e->question_type) ++correct;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

}  // namespace

std::vector<int> fold_assignment(size_t count, int folds, uint64_t seed) {
  std::vector<int> assignment(count);
  std::vector<size_t> order(count);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  for (size_t pos = 0; pos < order.size(); ++pos)
    assignment[order[pos]] = static_cast<int>(pos % static_cast<size_t>(folds));
  return assignment;
}

QtdTrainResult train_qtd(const DatasetSplit& train_split, const QtdTrainConfig& cfg) {
  if (cfg.folds < 2) throw ConfigError("train_qtd: folds must be >= 2");
  bool has_yes = false, has_non = false;
  for (const auto& e : train_split.examples) {
    (e.question_type == QuestionType::yes_no ? has_yes : has_non) = true;
  }
  if (!has_yes || !has_non)
    throw ConfigError("train_qtd: split holds a single question type class");

  std::set<std::string> toks;
  for (const auto& e : train_split.examples)
    for (const auto& t : e.question_tokens) toks.insert(to_lower(t));
  std::vector<std::string> vocab;
  vocab.push_back("<unk>");
  vocab.insert(vocab.end(), toks.begin(), toks.end());

  const std::vector<int> folds =
      fold_assignment(train_split.examples.size(), cfg.folds, cfg.seed);

  double acc_sum = 0.0;
  for (int fold = 0; fold < cfg.folds; ++fold) {
    std::vector<const VqaExample*> train_part, held_out;
    for (size_t i = 0; i < train_split.examples.size(); ++i) {
      (folds[i] == fold ? held_out : train_part).push_back(&train_split.examples[i]);
    }
    QtdModel fold_model =
        QtdModel::init(vocab, cfg.embed_dim, cfg.hidden_dim, cfg.seed + 1 + static_cast<uint64_t>(fold));
    train_on(fold_model, train_part, cfg, cfg.seed + 101 + static_cast<uint64_t>(fold));
    acc_sum += accuracy_on(fold_model, held_out);
  }

  QtdTrainResult result;
  result.cv_accuracy = acc_sum / static_cast<double>(cfg.folds);

  std::vector<const VqaExample*> all;
  for (const auto& e : train_split.examples) all.push_back(&e);
  result.model = QtdModel::init(vocab, cfg.embed_dim, cfg.hidden_dim, cfg.seed);
  train_on(result.model, all, cfg, cfg.seed + 7);
  result.model.answer_vocab_hash = vocab_hash(train_split.answer_vocabulary);
  result.model.config_hash = config_hash(
      "train-qtd|folds=" + std::to_string(cfg.folds) + "|epochs=" + std::to_string(cfg.epochs) +
      "|lr=" + std::to_string(cfg.lr) + "|seed=" + std::to_string(cfg.seed));
  return result;
}

double qtd_probability(const QtdModel& model, const Tokens& question_tokens) {
  Tape tape;
  BoundQtd b = bind(tape, model, false);
  Tape::Id z = qtd_logit(tape, model, b, question_tokens);
  return stable_sigmoid(tape.value(z).at(0, 0));
}

QuestionType classify_type(const QtdModel& model, const Tokens& question_tokens) {
  return qtd_probability(model, question_tokens) >= 0.5 ? QuestionType::yes_no
                                                        : QuestionType::non_yes_no;
}

int n_prime_for(const QtdModel& model, const Tokens& question_tokens, const NPrimePolicy& policy) {
  return classify_type(model, question_tokens) == QuestionType::yes_no ? policy.n_prime_yes_no
                                                                       : policy.n_prime_other;
}

void save_qtd(const QtdModel& model, double cv_accuracy, const std::string& path) {
  json params = json::object();
  for (const Param* p : const_cast<QtdModel&>(model).params())
    params[p->name] = json{{"rows", p->value.rows}, {"cols", p->value.cols}, {"data", p->value.data}};
  json j{{"format", "sar.qtd"},
         {"version", 1},
         {"tool_version", kToolVersion},
         {"seed", model.seed},
         {"config_hash", model.config_hash},
         {"vocab_hash", model.answer_vocab_hash},
         {"text_vocab", model.text_vocab},
         {"embed_dim", model.embed_dim},
         {"hidden_dim", model.hidden_dim},
         {"cv_accuracy", cv_accuracy},
         {"params", std::move(params)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
}

std::pair<QtdModel, double> load_qtd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.value("format", "") != "sar.qtd") throw ParseError(path + ": not a sar.qtd model file");
  try {
    QtdModel m = QtdModel::init(j.at("text_vocab").get<std::vector<std::string>>(),
                                j.at("embed_dim").get<int>(), j.at("hidden_dim").get<int>(),
                                j.at("seed").get<uint64_t>());
    m.config_hash = j.at("config_hash").get<std::string>();
    m.answer_vocab_hash = j.at("vocab_hash").get<std::string>();
    const json& params = j.at("params");
    for (Param* p : m.params()) {
      const json& pj = params.at(p->name);
      p->value = Tensor(pj.at("rows").get<int>(), pj.at("cols").get<int>(),
                        pj.at("data").get<std::vector<double>>());
      p->grad = Tensor(p->value.rows, p->value.cols);
    }
    return {std::move(m), j.at("cv_accuracy").get<double>()};
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace sar
