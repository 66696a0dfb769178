#include "sar/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "sar/errors.hpp"

namespace sar {

namespace {

DenseCaption caption_for(const PipelineModels& models, const VqaExample& example,
                         const std::string& answer_label,
                         const std::optional<Tokens>& category, bool* fallback) {
  if (models.plan.test_strategy == Strategy::R) {
    if (category) return combine_r(example.question_tokens, *category, answer_label);
    *fallback = true;
    return combine_c(example.question_tokens, answer_label);
  }
  return combine_c(example.question_tokens, answer_label);
}

}  // namespace

Prediction infer_answer(const PipelineModels& models, const VqaExample& example,
                        const FeatureSet& features) {
  models.plan.validate();
  const int trained_n = models.ve->trained_n;
  models.policy.validate(trained_n);

  int n_prime;
  if (models.policy.n_prime_yes_no == models.policy.n_prime_other) {
    n_prime = models.policy.n_prime_yes_no;  // QTD bypassed for symmetric policies
  } else {
    if (!models.qtd) throw ConfigError("infer_answer: asymmetric policy requires a QTD model");
    n_prime = n_prime_for(*models.qtd, example.question_tokens, models.policy);
  }
  if (n_prime > trained_n)
    throw ConfigError("infer_answer: N'=" + std::to_string(n_prime) + " exceeds trained N=" +
                      std::to_string(trained_n));

  std::vector<double> scores = predict_scores(*models.cas, example, features);
  std::vector<Candidate> candidates = select_topn(scores, n_prime);

  std::optional<Tokens> category;
  if (models.plan.test_strategy == Strategy::R)
    category = fmm_match(*models.dict, example.question_tokens);

  const ImageFeatures& image = features.require(example.image_id);

  Prediction pred;
  pred.example_id = example.example_id;
  pred.n_prime_used = n_prime;

  double best_score = -1.0;
  for (const Candidate& cand : candidates) {
    const std::string& label =
        models.cas->answer_vocabulary[static_cast<size_t>(cand.answer_index)];
    bool fallback = false;
    DenseCaption caption = caption_for(models, example, label, category, &fallback);
    pred.fmm_fallback = pred.fmm_fallback || fallback;
    const double s = score(*models.ve, image.vectors, caption);
    pred.candidate_scores.emplace_back(label, s);
    if (s > best_score) {  // strict: ties keep the higher CAS rank
      best_score = s;
      pred.chosen_answer = label;
      pred.chosen_caption = std::move(caption);
    }
  }
  return pred;
}

double vqa_accuracy(const Prediction& prediction, const VqaExample& example) {
  auto it = example.answer_targets.find(prediction.chosen_answer);
  if (it == example.answer_targets.end()) return 0.0;
  return std::min(it->second, 1.0);
}

EvalReport evaluate(const PipelineModels& models, const DatasetSplit& split,
                    const FeatureSet& features) {
  // Evaluate in example_id order so float accumulation never depends on the
  // order the split happens to be stored in.
  std::vector<const VqaExample*> ordered;
  ordered.reserve(split.examples.size());
  for (const auto& e : split.examples) ordered.push_back(&e);
  std::sort(ordered.begin(), ordered.end(),
            [](const VqaExample* a, const VqaExample* b) { return a->example_id < b->example_id; });

  EvalReport report;
  std::map<std::string, std::pair<double, long>> per_category;
  double sum_all = 0.0, sum_yes = 0.0, sum_non = 0.0;
  for (const VqaExample* e : ordered) {
    Prediction pred = infer_answer(models, *e, features);
    const double acc = vqa_accuracy(pred, *e);
    sum_all += acc;
    ++report.count_all;
    if (e->question_type == QuestionType::yes_no) {
      sum_yes += acc;
      ++report.count_yes_no;
    } else {
      sum_non += acc;
      ++report.count_non_yes_no;
    }
    auto& [s, c] = per_category[e->question_category];
    s += acc;
    ++c;
    if (pred.fmm_fallback) ++report.fmm_fallbacks;
  }
  report.accuracy_all = report.count_all ? sum_all / static_cast<double>(report.count_all) : 0.0;
  report.accuracy_yes_no =
      report.count_yes_no ? sum_yes / static_cast<double>(report.count_yes_no) : 0.0;
  report.accuracy_non_yes_no =
      report.count_non_yes_no ? sum_non / static_cast<double>(report.count_non_yes_no) : 0.0;
  for (const auto& [cat, sc] : per_category)
    report.per_category_breakdown[cat] = sc.first / static_cast<double>(sc.second);

  std::vector<int> n_values(models.cas->answer_vocabulary.size());
  std::iota(n_values.begin(), n_values.end(), 1);
  report.topn_recall_curve = topn_recall(*models.cas, split, features, n_values);
  return report;
}

double gap_between(const EvalReport& val_iid, const EvalReport& test_shifted) {
  return val_iid.accuracy_all - test_shifted.accuracy_all;
}

std::vector<AblationRow> ablate(const AblationInputs& in) {
  if (!in.train || !in.test_shifted || !in.val_iid || !in.features)
    throw ConfigError("ablate: missing dataset inputs");
  in.policy.validate(in.n);

  CasModel cas = train_cas(*in.train, *in.features, in.cas_epochs, in.cas_lr, in.cas_seed).model;
  QtdTrainResult qtd = train_qtd(*in.train, in.qtd);
  CategoryDict dict = build_category_dict(*in.train);

  std::vector<CandidateSet> train_candidates;
  train_candidates.reserve(in.train->examples.size());
  for (const auto& e : in.train->examples) {
    CandidateSet cs;
    cs.example_id = e.example_id;
    cs.entries = select_topn(predict_scores(cas, e, *in.features), in.n);
    train_candidates.push_back(std::move(cs));
  }

  struct VeKey {
    std::string strategy;
    bool ssl;
    bool operator<(const VeKey& o) const {
      return strategy != o.strategy ? strategy < o.strategy : ssl < o.ssl;
    }
  };
  std::map<VeKey, VeModel> ve_models;
  auto ve_for = [&](const std::string& strategy, bool ssl) -> const VeModel& {
    VeKey key{strategy, ssl};
    auto it = ve_models.find(key);
    if (it != ve_models.end()) return it->second;
    StrategyPlan plan = StrategyPlan::from_label(strategy);
    CaptionDataset captions =
        build_captions(*in.train, train_candidates, plan, Phase::train, dict);
    VeModel model = VeModel::init(in.ve_arch, build_text_vocab(captions),
                                  in.train->answer_vocabulary,
                                  in.features->images().front().vectors.cols, in.ve.seed);
    model.trained_n = in.n;
    model.plan = plan;
    VeTrainConfig cfg = in.ve;
    cfg.ssl_enabled = ssl;
    model.ssl = ssl;
    model.alpha = cfg.alpha;
    train_ve(model, captions, *in.features, cfg);
    return ve_models.emplace(key, std::move(model)).first->second;
  };

  std::vector<AblationRow> rows;
  for (const std::string& strategy : in.strategies) {
    auto eval_row = [&](const std::string& row_name) {
      const bool ssl = row_name == "cas_ve_ssl_qtd";
      NPrimePolicy policy = in.policy;
      if (row_name == "cas_only") {
        policy = NPrimePolicy{1, 1};
      } else if (row_name == "cas_ve") {
        policy = NPrimePolicy{in.n, in.n};  // no QTD effect: one N' for everything
      } else if (row_name != "cas_ve_qtd" && row_name != "cas_ve_ssl_qtd") {
        throw ConfigError("ablate: unknown row '" + row_name + "'");
      }

      PipelineModels models;
      models.cas = &cas;
      models.ve = &ve_for(strategy, ssl);
      models.qtd = &qtd.model;
      models.dict = &dict;
      models.plan = StrategyPlan::from_label(strategy);
      models.policy = policy;

      AblationRow row;
      row.name = row_name;
      row.strategy = strategy;
      row.test_shifted = evaluate(models, *in.test_shifted, *in.features);
      row.val_iid = evaluate(models, *in.val_iid, *in.features);
      row.gap = gap_between(row.val_iid, row.test_shifted);
      row.test_shifted.gap = row.gap;
      return row;
    };

    // The delta column is against CAS-only, so that baseline is always run.
    AblationRow baseline = eval_row("cas_only");
    const double base_acc = baseline.test_shifted.accuracy_all;
    for (const std::string& row_name : in.rows) {
      AblationRow row = row_name == "cas_only" ? baseline : eval_row(row_name);
      row.delta_vs_cas_only = row.test_shifted.accuracy_all - base_acc;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<SweepPoint> sweep_n_prime(const PipelineModels& models, const DatasetSplit& split,
                                      const FeatureSet& features, std::pair<int, int> range_yes_no,
                                      std::pair<int, int> range_other) {
  const int trained_n = models.ve->trained_n;
  for (auto [lo, hi] : {range_yes_no, range_other}) {
    if (lo < 1 || hi < lo || hi > trained_n)
      throw ConfigError("sweep: range [" + std::to_string(lo) + "," + std::to_string(hi) +
                        "] outside [1, " + std::to_string(trained_n) + "]");
  }

  // Score the widest candidate list once per example; the argmax over the
  // first k candidates then yields every smaller N' for free. select_topn's
  // deterministic ordering makes each prefix exactly the top-k set.
  struct PerType {
    std::pair<int, int> range;
    std::vector<double> acc_sum;  // indexed by n' - lo
    long count = 0;
  };
  std::map<QuestionType, PerType> per_type{{QuestionType::yes_no, {range_yes_no, {}, 0}},
                                           {QuestionType::non_yes_no, {range_other, {}, 0}}};
  for (auto& [t, pt] : per_type)
    pt.acc_sum.assign(static_cast<size_t>(pt.range.second - pt.range.first + 1), 0.0);

  std::vector<const VqaExample*> ordered;
  for (const auto& e : split.examples) ordered.push_back(&e);
  std::sort(ordered.begin(), ordered.end(),
            [](const VqaExample* a, const VqaExample* b) { return a->example_id < b->example_id; });

  for (const VqaExample* e : ordered) {
    PerType& pt = per_type.at(e->question_type);
    PipelineModels forced = models;
    forced.policy = NPrimePolicy{pt.range.second, pt.range.second};
    Prediction full = infer_answer(forced, *e, features);
    ++pt.count;

    // Walk candidates in CAS order keeping the running argmax.
    double best = -1.0;
    std::string best_answer;
    for (int k = 1; k <= pt.range.second; ++k) {
      const auto& [answer, s] = full.candidate_scores[static_cast<size_t>(k - 1)];
      if (s > best) {
        best = s;
        best_answer = answer;
      }
      if (k >= pt.range.first) {
        auto it = e->answer_targets.find(best_answer);
        const double acc = it == e->answer_targets.end() ? 0.0 : std::min(it->second, 1.0);
        pt.acc_sum[static_cast<size_t>(k - pt.range.first)] += acc;
      }
    }
  }

  std::vector<SweepPoint> points;
  for (auto& [type, pt] : per_type) {
    for (int k = pt.range.first; k <= pt.range.second; ++k) {
      SweepPoint p;
      p.type = type;
      p.n_prime = k;
      p.accuracy =
          pt.count ? pt.acc_sum[static_cast<size_t>(k - pt.range.first)] / static_cast<double>(pt.count)
                   : 0.0;
      points.push_back(p);
    }
  }
  return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "type,n_prime,accuracy\n";
  out.precision(17);
  for (const auto& p : points)
    out << to_string(p.type) << ',' << p.n_prime << ',' << p.accuracy << '\n';
}

}  // namespace sar
