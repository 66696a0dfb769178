#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sar/cas.hpp"
#include "sar/data.hpp"

namespace sar {

// Question categories of the train set, lowercase token sequences.
class CategoryDict {
 public:
  CategoryDict() = default;
  explicit CategoryDict(const std::vector<Tokens>& entries);

  bool contains(const Tokens& lowercase_entry) const;
  size_t size() const { return entries_.size(); }
  int max_length() const { return max_length_; }
  std::vector<Tokens> entries() const;  // sorted

  void save(const std::string& path) const;  // sorted newline-delimited text
  static CategoryDict load(const std::string& path);

  bool operator==(const CategoryDict&) const = default;

 private:
  std::set<Tokens> entries_;
  int max_length_ = 0;
};

enum class Strategy { R, C };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

// Train/test strategy pairing. {R,R}, {C,C} and {R,C} are the paper's three
// modes; {C,R} is rejected.
struct StrategyPlan {
  Strategy train_strategy = Strategy::R;
  Strategy test_strategy = Strategy::C;

  void validate() const;
  std::string label() const;  // "R", "C" or "RtoC"
  static StrategyPlan from_label(const std::string& label);

  bool operator==(const StrategyPlan&) const = default;
};

// Question fused with one candidate answer.
struct DenseCaption {
  Tokens tokens;
  Strategy strategy = Strategy::R;
  std::string source_answer;
  int trimmed_to = 0;

  std::string text() const { return join_tokens(tokens); }

  bool operator==(const DenseCaption&) const = default;
};

inline constexpr int kTrimR = 15;
inline constexpr int kTrimC = 18;

CategoryDict build_category_dict(const DatasetSplit& train_split);

// Longest dictionary entry that is a token-prefix of the question, or
// nullopt. Matching is case-insensitive.
std::optional<Tokens> fmm_match(const CategoryDict& dict, const Tokens& question_tokens);

// R: replace the question-category prefix with the answer; terminal question
// mark dropped; trimmed to 15 tokens. Throws if the category is not a prefix.
DenseCaption combine_r(const Tokens& question_tokens, const Tokens& category,
                       const std::string& answer_label);

// C: answer prepended to the untouched question, trimmed to 18 tokens from
// the end so the answer always survives.
DenseCaption combine_c(const Tokens& question_tokens, const std::string& answer_label);

enum class Phase { train, test };

struct CaptionInstance {
  std::string example_id;
  std::string image_id;
  DenseCaption caption;
  int answer_index = 0;  // into the answer vocabulary
  double target = 0.0;   // soft target t, 0 for answers absent from the example
};

struct CaptionDataset {
  std::vector<CaptionInstance> instances;  // M x N
  int n = 0;                               // candidates per example
  long fmm_fallbacks = 0;                  // test-time R questions with no category match
};

// The M*N caption dataset for the reranker. Train-phase R uses the example's
// own category; test-phase R locates it with FMM and falls back to C when no
// entry matches.
CaptionDataset build_captions(const DatasetSplit& split,
                              const std::vector<CandidateSet>& candidates,
                              const StrategyPlan& plan, Phase phase, const CategoryDict& dict);

void write_caption_dataset(const CaptionDataset& ds, const std::string& path);
CaptionDataset read_caption_dataset(const std::string& path);

}  // namespace sar
