#include "sar/cas.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>

#include "sar/errors.hpp"
#include "sar/hash.hpp"
#include "sar/rng.hpp"

namespace sar {

using nlohmann::json;

int CasModel::question_token_index(const std::string& lowercase_token) const {
  auto it = std::lower_bound(question_vocab.begin(), question_vocab.end(), lowercase_token);
  if (it != question_vocab.end() && *it == lowercase_token)
    return static_cast<int>(it - question_vocab.begin());
  return -1;
}

namespace {

// x = [bag of question tokens | mean-pooled image feature vector]
std::vector<double> featurize(const CasModel& model, const VqaExample& example,
                              const FeatureSet& features) {
  const size_t vq = model.question_vocab.size();
  std::vector<double> x(vq + static_cast<size_t>(model.feature_dim), 0.0);
  for (const auto& tok : example.question_tokens) {
    int idx = model.question_token_index(to_lower(tok));
    if (idx >= 0) x[static_cast<size_t>(idx)] += 1.0;
  }
  const ImageFeatures& img = features.require(example.image_id);
  const Tensor& v = img.vectors;
  for (int c = 0; c < v.cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < v.rows; ++r) s += v.at(r, c);
    x[vq + static_cast<size_t>(c)] = s / v.rows;
  }
  return x;
}

std::vector<double> scores_for(const CasModel& model, const std::vector<double>& x) {
  const int na = static_cast<int>(model.answer_vocabulary.size());
  std::vector<double> scores(static_cast<size_t>(na), 0.0);
  for (int a = 0; a < na; ++a) {
    const double* wrow = &model.weights.data[static_cast<size_t>(a) * model.weights.cols];
    double s = model.bias.at(0, a);
    for (size_t j = 0; j < x.size(); ++j)
      if (x[j] != 0.0) s += wrow[j] * x[j];
    scores[static_cast<size_t>(a)] = s;
  }
  return scores;
}

// softmax in place, returns cross entropy against the normalized targets
double softmax_ce(std::vector<double>& scores, const std::vector<double>& targets) {
  double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    z += s;
  }
  double ce = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] /= z;
    if (targets[i] > 0.0) ce -= targets[i] * std::log(std::max(scores[i], 1e-300));
  }
  return ce;
}

}  // namespace

CasTrainResult train_cas(const DatasetSplit& train_split, const FeatureSet& features, int epochs,
                         double lr, uint64_t seed) {
  if (train_split.examples.empty()) throw ConfigError("train_cas: empty training split");

  CasModel model;
  model.answer_vocabulary = train_split.answer_vocabulary;
  model.seed = seed;
  std::set<std::string> toks;
  for (const auto& e : train_split.examples)
    for (const auto& t : e.question_tokens) toks.insert(to_lower(t));
  model.question_vocab.assign(toks.begin(), toks.end());
  const auto& first_img = features.require(train_split.examples[0].image_id);
  model.feature_dim = first_img.vectors.cols;

  const int na = static_cast<int>(model.answer_vocabulary.size());
  const int dim = static_cast<int>(model.question_vocab.size()) + model.feature_dim;
  model.weights = Tensor(na, dim);
  model.bias = Tensor(1, na);
  model.config_hash = config_hash("train-cas|epochs=" + std::to_string(epochs) +
                                  "|lr=" + std::to_string(lr) + "|seed=" + std::to_string(seed) +
                                  "|vocab=" + vocab_hash(model.answer_vocabulary));

  // Cache featurizations; the split is immutable during training.
  std::vector<std::vector<double>> xs;
  std::vector<std::vector<double>> ts;
  xs.reserve(train_split.examples.size());
  for (const auto& e : train_split.examples) {
    xs.push_back(featurize(model, e, features));
    std::vector<double> t(static_cast<size_t>(na), 0.0);
    double total = 0.0;
    for (const auto& [label, score] : e.answer_targets) {
      int idx = train_split.answer_index(label);
      t[static_cast<size_t>(idx)] = score;
      total += score;
    }
    if (total > 0.0)
      for (double& v : t) v /= total;
    ts.push_back(std::move(t));
  }

  Rng rng(seed);
  std::vector<size_t> order(xs.size());
  std::iota(order.begin(), order.end(), size_t{0});

  CasTrainResult result;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t oi : order) {
      const auto& x = xs[oi];
      const auto& t = ts[oi];
      std::vector<double> p = scores_for(model, x);
      loss_sum += softmax_ce(p, t);
      if (lr != 0.0) {
        for (int a = 0; a < na; ++a) {
          const double g = p[static_cast<size_t>(a)] - t[static_cast<size_t>(a)];
          if (g == 0.0) continue;
          double* wrow = &model.weights.data[static_cast<size_t>(a) * model.weights.cols];
          for (size_t j = 0; j < x.size(); ++j)
            if (x[j] != 0.0) wrow[j] -= lr * g * x[j];
          model.bias.at(0, a) -= lr * g;
        }
      }
    }
    result.loss_curve.push_back(loss_sum / static_cast<double>(xs.size()));
  }
  result.model = std::move(model);
  return result;
}

std::vector<double> predict_scores(const CasModel& model, const VqaExample& example,
                                   const FeatureSet& features) {
  return scores_for(model, featurize(model, example, features));
}

std::vector<Candidate> select_topn(const std::vector<double>& scores, int n) {
  const int na = static_cast<int>(scores.size());
  if (n < 1 || n > na)
    throw ConfigError("select_topn: N=" + std::to_string(n) + " outside [1, " +
                      std::to_string(na) + "]");
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&scores](int a, int b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
      return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    return a < b;  // ties: ascending vocabulary index
  };
  std::partial_sort(idx.begin(), idx.begin() + n, idx.end(), better);
  std::vector<Candidate> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    out.push_back(Candidate{idx[static_cast<size_t>(i)], scores[static_cast<size_t>(idx[static_cast<size_t>(i)])]});
  return out;
}

std::map<int, double> topn_recall(const CasModel& model, const DatasetSplit& split,
                                  const FeatureSet& features, const std::vector<int>& n_values) {
  const int na = static_cast<int>(model.answer_vocabulary.size());
  for (int n : n_values)
    if (n < 1 || n > na)
      throw ConfigError("topn_recall: N=" + std::to_string(n) + " outside [1, " +
                        std::to_string(na) + "]");
  std::map<int, double> hits;
  for (int n : n_values) hits[n] = 0.0;
  for (const auto& e : split.examples) {
    std::vector<double> scores = predict_scores(model, e, features);
    const int truth = split.answer_index(e.best_answer());
    // One full ranking serves every N.
    std::vector<Candidate> ranked = select_topn(scores, na);
    int rank = na;
    for (int i = 0; i < na; ++i)
      if (ranked[static_cast<size_t>(i)].answer_index == truth) {
        rank = i;
        break;
      }
    for (int n : n_values)
      if (rank < n) hits[n] += 1.0;
  }
  const double m = static_cast<double>(split.examples.size());
  for (auto& [n, h] : hits) h = m > 0 ? h / m : 0.0;
  return hits;
}

void save_cas(const CasModel& model, const std::string& path) {
  json j{{"format", "sar.cas"},
         {"version", 1},
         {"tool_version", kToolVersion},
         {"seed", model.seed},
         {"config_hash", model.config_hash},
         {"vocab_hash", vocab_hash(model.answer_vocabulary)},
         {"answer_vocabulary", model.answer_vocabulary},
         {"question_vocab", model.question_vocab},
         {"feature_dim", model.feature_dim},
         {"weights", model.weights.data},
         {"bias", model.bias.data}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
}

CasModel load_cas(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.value("format", "") != "sar.cas") throw ParseError(path + ": not a sar.cas model file");
  CasModel m;
  try {
    m.seed = j.at("seed").get<uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.answer_vocabulary = j.at("answer_vocabulary").get<std::vector<std::string>>();
    m.question_vocab = j.at("question_vocab").get<std::vector<std::string>>();
    m.feature_dim = j.at("feature_dim").get<int>();
    const int na = static_cast<int>(m.answer_vocabulary.size());
    const int dim = static_cast<int>(m.question_vocab.size()) + m.feature_dim;
    m.weights = Tensor(na, dim, j.at("weights").get<std::vector<double>>());
    m.bias = Tensor(1, na, j.at("bias").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return m;
}

}  // namespace sar
