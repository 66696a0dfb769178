#include "sar/synthworld.hpp"

#include <algorithm>
#include <cassert>

#include "sar/errors.hpp"
#include "sar/rng.hpp"

namespace sar {

void WorldConfig::validate() const {
  if (objects_per_image < 1) throw ConfigError("world: objects_per_image must be >= 1");
  if (num_images < 1) throw ConfigError("world: num_images must be >= 1");
  if (questions_per_image < 1) throw ConfigError("world: questions_per_image must be >= 1");
  if (object_types.empty()) throw ConfigError("world: object_types must be non-empty");
  if (colors.empty()) throw ConfigError("world: colors must be non-empty");
  if (max_count < 1) throw ConfigError("world: max_count must be >= 1");
  if (prior_skew < 0.0 || prior_skew > 1.0)
    throw ConfigError("world: prior_skew must be in [0,1]");
  const int min_dim = static_cast<int>(object_types.size() + colors.size()) + 2;
  if (feature_dim < min_dim)
    throw ConfigError("world: feature_dim must be >= |object_types| + |colors| + 2 = " +
                      std::to_string(min_dim));
  if (static_cast<int>(object_types.size()) < questions_per_image + 1)
    throw ConfigError("world: need at least questions_per_image + 1 object types, got " +
                      std::to_string(object_types.size()));
  if (questions_per_image > objects_per_image)
    throw ConfigError("world: questions_per_image must be <= objects_per_image");
}

namespace {

enum class Category { what_color, how_many, is_there, is_this, are_there };

constexpr Category kCategories[] = {Category::what_color, Category::how_many,
                                    Category::is_there, Category::is_this, Category::are_there};

const char* category_name(Category c) {
  switch (c) {
    case Category::what_color: return "what color";
    case Category::how_many: return "how many";
    case Category::is_there: return "is there";
    case Category::is_this: return "is this";
    case Category::are_there: return "are there";
  }
  return "";
}

bool is_yes_no(Category c) {
  return c == Category::is_there || c == Category::is_this || c == Category::are_there;
}

// Greedy quota sampler: empirical counts track the target distribution to
// within one draw per answer, so per-category histograms match the configured
// prior almost exactly instead of fluctuating like iid sampling would.
class QuotaSampler {
 public:
  QuotaSampler(std::vector<std::string> answers, int majority_index, double skew, uint64_t seed)
      : answers_(std::move(answers)), counts_(answers_.size(), 0), rng_(seed) {
    const double uniform = 1.0 / static_cast<double>(answers_.size());
    target_.assign(answers_.size(), (1.0 - skew) * uniform);
    target_[static_cast<size_t>(majority_index)] += skew;
  }

  // Draw the next answer, restricted to `feasible` indices into answers().
  int draw(const std::vector<int>& feasible) {
    assert(!feasible.empty());
    const double n1 = static_cast<double>(total_ + 1);
    double best = -1e300;
    std::vector<int> best_set;
    for (int i : feasible) {
      const double deficit = target_[static_cast<size_t>(i)] * n1 - counts_[static_cast<size_t>(i)];
      if (deficit > best + 1e-12) {
        best = deficit;
        best_set.assign(1, i);
      } else if (deficit > best - 1e-12) {
        best_set.push_back(i);
      }
    }
    const int pick = best_set[rng_.next_below(best_set.size())];
    ++counts_[static_cast<size_t>(pick)];
    ++total_;
    return pick;
  }

  const std::vector<std::string>& answers() const { return answers_; }

 private:
  std::vector<std::string> answers_;
  std::vector<double> target_;
  std::vector<int> counts_;
  long total_ = 0;
  Rng rng_;
};

struct ObjectSpec {
  int type = 0;
  int color = 0;
};

// Per-image accumulation of question constraints.
struct ImagePlan {
  std::map<int, int> type_count;      // exact count per constrained type
  std::map<int, int> type_color;      // forced color for single-instance types
  int allocated = 0;
};

struct SplitSamplers {
  std::vector<QuotaSampler> per_category;  // indexed like kCategories
};

int count_space_size(const WorldConfig& cfg) {
  // counts 0..min(max_count, K-1); K slots bound what an image can show
  return std::min(cfg.max_count, cfg.objects_per_image - 1) + 1;
}

SplitSamplers make_samplers(const WorldConfig& cfg, bool shifted, uint64_t seed) {
  SplitSamplers s;
  const int ncat = static_cast<int>(std::size(kCategories));
  for (int ci = 0; ci < ncat; ++ci) {
    const Category cat = kCategories[ci];
    std::vector<std::string> answers;
    if (cat == Category::what_color) {
      answers = cfg.colors;
    } else if (cat == Category::how_many) {
      for (int k = 0; k < count_space_size(cfg); ++k) answers.push_back(std::to_string(k));
    } else {
      answers = {"yes", "no"};
    }
    // Majority answer per category, derived from the seed; the shifted split
    // rotates it so train priors point at the wrong answer.
    const int n = static_cast<int>(answers.size());
    int maj = static_cast<int>((seed / 7 + static_cast<uint64_t>(ci) * 3) % static_cast<uint64_t>(n));
    if (shifted) maj = (maj + 1 + static_cast<int>(static_cast<uint64_t>(ci) % static_cast<uint64_t>(std::max(1, n - 1)))) % n;
    s.per_category.emplace_back(std::move(answers), maj, cfg.prior_skew,
                                seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(ci) + 1)) ^
                                    (shifted ? 0x5bf03635ULL : 0ULL));
  }
  return s;
}

Tokens question_tokens_for(Category cat, const std::string& type, const std::string& color) {
  switch (cat) {
    case Category::what_color: return {"what", "color", "is", "the", type, "?"};
    case Category::how_many: return {"how", "many", type, "?"};
    case Category::is_there: return {"is", "there", "a", type, "?"};
    case Category::is_this: return {"is", "this", type, color, "?"};
    case Category::are_there: return {"are", "there", "multiple", type, "?"};
  }
  return {};
}

struct GenContext {
  const WorldConfig& cfg;
  std::vector<std::string> vocabulary;
  int global_image_index = 0;
  int global_example_index = 0;
};

void assign_targets(VqaExample& e, const std::string& truth, Category cat,
                    const SplitSamplers& samplers, int cat_index, const WorldConfig& cfg,
                    Rng& rng) {
  if (!cfg.soft_targets) {
    e.answer_targets[truth] = 1.0;
    return;
  }
  // Simulated annotator agreement for the true answer.
  const double u = rng.next_double();
  double t = 1.0;
  if (u < 0.05)
    t = 0.3;
  else if (u < 0.20)
    t = 0.6;
  else if (u < 0.45)
    t = 0.9;
  e.answer_targets[truth] = t;
  // Occasionally a same-category distractor with low agreement.
  if (t >= 0.6 && rng.next_double() < 0.25) {
    const auto& space = samplers.per_category[static_cast<size_t>(cat_index)].answers();
    if (space.size() > 1) {
      for (int attempt = 0; attempt < 4; ++attempt) {
        const std::string& d = space[rng.next_below(space.size())];
        if (d != truth) {
          e.answer_targets[d] = 0.3;
          break;
        }
      }
    }
  }
  (void)cat;
}

// Build one image and its questions. Answers are drawn first from the
// split's prior samplers, then the image is constructed to make each
// answer true.
void generate_image(GenContext& ctx, SplitSamplers& samplers, SplitName split_name, Rng& rng,
                    std::vector<ImageFeatures>& features_out, std::vector<VqaExample>& examples_out) {
  const WorldConfig& cfg = ctx.cfg;
  const int K = cfg.objects_per_image;
  const int num_types = static_cast<int>(cfg.object_types.size());
  const int num_colors = static_cast<int>(cfg.colors.size());

  char idbuf[32];
  std::snprintf(idbuf, sizeof idbuf, "img_%06d", ctx.global_image_index++);
  const std::string image_id = idbuf;

  ImagePlan plan;
  struct PendingQuestion {
    Category cat;
    int cat_index;
    Tokens tokens;
    std::string answer;
  };
  std::vector<PendingQuestion> pending;

  for (int q = 0; q < cfg.questions_per_image; ++q) {
    const int remaining_after = cfg.questions_per_image - q - 1;
    const int free_slots = K - plan.allocated - remaining_after;  // reserve one per later question

    const int cat_index = static_cast<int>(rng.next_below(std::size(kCategories)));
    const Category cat = kCategories[static_cast<size_t>(cat_index)];
    QuotaSampler& sampler = samplers.per_category[static_cast<size_t>(cat_index)];

    // Subject type, distinct from previously constrained types.
    int subject;
    do {
      subject = static_cast<int>(rng.next_below(static_cast<uint64_t>(num_types)));
    } while (plan.type_count.count(subject));
    const std::string& type = cfg.object_types[static_cast<size_t>(subject)];

    // Feasible answers given the remaining slot budget.
    std::vector<int> feasible;
    const auto& answers = sampler.answers();
    for (int i = 0; i < static_cast<int>(answers.size()); ++i) {
      int needed = 0;
      switch (cat) {
        case Category::what_color: needed = 1; break;
        case Category::how_many: needed = std::stoi(answers[static_cast<size_t>(i)]); break;
        case Category::is_there: needed = answers[static_cast<size_t>(i)] == "yes" ? 1 : 0; break;
        case Category::is_this: needed = 1; break;
        case Category::are_there: needed = answers[static_cast<size_t>(i)] == "yes" ? 2 : 0; break;
      }
      if (needed <= free_slots) feasible.push_back(i);
    }
    if (feasible.empty()) continue;  // cannot happen with validated configs; stay safe

    const int ans_index = sampler.draw(feasible);
    const std::string& answer = answers[static_cast<size_t>(ans_index)];

    std::string asked_color;
    switch (cat) {
      case Category::what_color: {
        plan.type_count[subject] = 1;
        plan.type_color[subject] = static_cast<int>(
            std::find(cfg.colors.begin(), cfg.colors.end(), answer) - cfg.colors.begin());
        plan.allocated += 1;
        break;
      }
      case Category::how_many: {
        const int k = std::stoi(answer);
        plan.type_count[subject] = k;
        plan.allocated += k;
        break;
      }
      case Category::is_there: {
        const int k = answer == "yes" ? 1 : 0;
        plan.type_count[subject] = k;
        plan.allocated += k;
        break;
      }
      case Category::is_this: {
        const int true_color = static_cast<int>(rng.next_below(static_cast<uint64_t>(num_colors)));
        plan.type_count[subject] = 1;
        plan.type_color[subject] = true_color;
        plan.allocated += 1;
        int asked = true_color;
        if (answer == "no") {
          asked = (true_color + 1 + static_cast<int>(rng.next_below(
                                        static_cast<uint64_t>(num_colors - 1)))) %
                  num_colors;
        }
        asked_color = cfg.colors[static_cast<size_t>(asked)];
        break;
      }
      case Category::are_there: {
        int k = 0;
        if (answer == "yes") {
          k = 2 + ((free_slots > 2 && rng.next_double() < 0.3) ? 1 : 0);
        } else {
          k = static_cast<int>(rng.next_below(2));  // 0 or 1 is "not multiple"
        }
        plan.type_count[subject] = k;
        plan.allocated += k;
        break;
      }
    }

    pending.push_back({cat, cat_index, question_tokens_for(cat, type, asked_color), answer});
  }

  // Materialize objects: constrained types first, then fillers of
  // unconstrained types so zero-count and exactly-one constraints hold.
  std::vector<ObjectSpec> objects;
  for (const auto& [type, count] : plan.type_count) {
    for (int i = 0; i < count; ++i) {
      ObjectSpec o;
      o.type = type;
      auto forced = plan.type_color.find(type);
      o.color = forced != plan.type_color.end()
                    ? forced->second
                    : static_cast<int>(rng.next_below(static_cast<uint64_t>(num_colors)));
      objects.push_back(o);
    }
  }
  std::vector<int> filler_types;
  for (int t = 0; t < num_types; ++t)
    if (!plan.type_count.count(t)) filler_types.push_back(t);
  while (static_cast<int>(objects.size()) < K) {
    ObjectSpec o;
    o.type = filler_types[rng.next_below(filler_types.size())];
    o.color = static_cast<int>(rng.next_below(static_cast<uint64_t>(num_colors)));
    objects.push_back(o);
  }
  rng.shuffle(objects);

  ImageFeatures feat;
  feat.image_id = image_id;
  feat.vectors = Tensor(K, cfg.feature_dim);
  for (int r = 0; r < K; ++r) {
    const ObjectSpec& o = objects[static_cast<size_t>(r)];
    feat.vectors.at(r, o.type) = 1.0;
    feat.vectors.at(r, num_types + o.color) = 1.0;
    feat.vectors.at(r, num_types + num_colors) = rng.next_double();      // position x
    feat.vectors.at(r, num_types + num_colors + 1) = rng.next_double();  // position y
    for (int c = num_types + num_colors + 2; c < cfg.feature_dim; ++c)
      feat.vectors.at(r, c) = rng.uniform(0.0, 0.05);  // noise padding below signal scale
  }
  features_out.push_back(std::move(feat));

  for (const auto& p : pending) {
    VqaExample e;
    char ebuf[48];
    std::snprintf(ebuf, sizeof ebuf, "%s_%06d", to_string(split_name).c_str(),
                  ctx.global_example_index++);
    e.example_id = ebuf;
    e.question_tokens = p.tokens;
    e.image_id = image_id;
    e.question_category = category_name(p.cat);
    e.question_type = is_yes_no(p.cat) ? QuestionType::yes_no : QuestionType::non_yes_no;
    assign_targets(e, p.answer, p.cat, samplers, p.cat_index, cfg, rng);
    examples_out.push_back(std::move(e));
  }
}

DatasetSplit generate_split(GenContext& ctx, SplitName name, int num_images, bool shifted,
                            uint64_t stream_tag, std::vector<ImageFeatures>& features_out) {
  DatasetSplit split;
  split.name = name;
  split.answer_vocabulary = ctx.vocabulary;
  SplitSamplers samplers = make_samplers(ctx.cfg, shifted, ctx.cfg.seed);
  Rng base(ctx.cfg.seed ^ stream_tag);
  for (int i = 0; i < num_images; ++i) {
    Rng img_rng = base.substream(static_cast<uint64_t>(i));
    generate_image(ctx, samplers, name, img_rng, features_out, split.examples);
  }
  return split;
}

}  // namespace

World generate_world(const WorldConfig& cfg) {
  cfg.validate();

  GenContext ctx{cfg, {}, 0, 0};
  for (const auto& c : cfg.colors) ctx.vocabulary.push_back(c);
  for (int k = 0; k <= cfg.max_count; ++k) ctx.vocabulary.push_back(std::to_string(k));
  ctx.vocabulary.push_back("yes");
  ctx.vocabulary.push_back("no");

  World w;
  const int eval_images = (cfg.num_images + 3) / 4;
  w.train = generate_split(ctx, SplitName::train, cfg.num_images, false, 0x7261696eULL, w.features);
  w.test_shifted =
      generate_split(ctx, SplitName::test_shifted, eval_images, true, 0x74657374ULL, w.features);
  // val_iid keeps the train-split distribution, on fresh images.
  w.val_iid = generate_split(ctx, SplitName::val_iid, eval_images, false, 0x76616cULL, w.features);

  validate_split(w.train);
  validate_split(w.test_shifted);
  validate_split(w.val_iid);
  return w;
}

int decode_object_type(const Tensor& vectors, int row, int num_types) {
  for (int c = 0; c < num_types; ++c)
    if (vectors.at(row, c) == 1.0) return c;
  return -1;
}

int decode_object_color(const Tensor& vectors, int row, int num_types, int num_colors) {
  for (int c = 0; c < num_colors; ++c)
    if (vectors.at(row, num_types + c) == 1.0) return c;
  return -1;
}

std::map<std::string, std::map<std::string, int>> category_answer_histogram(
    const DatasetSplit& split) {
  std::map<std::string, std::map<std::string, int>> hist;
  for (const auto& e : split.examples) hist[e.question_category][e.best_answer()] += 1;
  return hist;
}

std::string histogram_majority(const std::map<std::string, int>& hist) {
  std::string best;
  int best_count = -1;
  for (const auto& [label, count] : hist) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

double histogram_tv_distance(const std::map<std::string, int>& a,
                             const std::map<std::string, int>& b) {
  long na = 0, nb = 0;
  for (const auto& [k, v] : a) na += v;
  for (const auto& [k, v] : b) nb += v;
  if (na == 0 || nb == 0) return na == nb ? 0.0 : 1.0;
  std::map<std::string, double> keys;
  for (const auto& [k, v] : a) keys[k] += static_cast<double>(v) / static_cast<double>(na);
  for (const auto& [k, v] : b) keys[k] -= static_cast<double>(v) / static_cast<double>(nb);
  double tv = 0.0;
  for (const auto& [k, v] : keys) tv += std::abs(v);
  return tv / 2.0;
}

}  // namespace sar
