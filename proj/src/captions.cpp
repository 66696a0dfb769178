#include "sar/captions.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "sar/errors.hpp"

namespace sar {

using nlohmann::json;

CategoryDict::CategoryDict(const std::vector<Tokens>& entries) {
  for (const auto& e : entries) {
    if (e.empty()) continue;
    Tokens lower = to_lower(e);
    max_length_ = std::max(max_length_, static_cast<int>(lower.size()));
    entries_.insert(std::move(lower));
  }
}

bool CategoryDict::contains(const Tokens& lowercase_entry) const {
  return entries_.count(lowercase_entry) > 0;
}

std::vector<Tokens> CategoryDict::entries() const {
  return std::vector<Tokens>(entries_.begin(), entries_.end());
}

void CategoryDict::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  for (const auto& e : entries_) out << join_tokens(e) << '\n';
}

CategoryDict CategoryDict::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  std::vector<Tokens> entries;
  std::string line;
  while (std::getline(in, line)) {
    Tokens toks = tokenize(line);
    if (!toks.empty()) entries.push_back(std::move(toks));
  }
  return CategoryDict(entries);
}

std::string to_string(Strategy s) { return s == Strategy::R ? "R" : "C"; }

Strategy strategy_from_string(const std::string& s) {
  if (s == "R") return Strategy::R;
  if (s == "C") return Strategy::C;
  throw ConfigError("unknown combination strategy '" + s + "'");
}

void StrategyPlan::validate() const {
  if (train_strategy == Strategy::C && test_strategy == Strategy::R)
    throw ConfigError("strategy plan C->R is not allowed");
}

std::string StrategyPlan::label() const {
  if (train_strategy == test_strategy) return to_string(train_strategy);
  return "RtoC";
}

StrategyPlan StrategyPlan::from_label(const std::string& label) {
  StrategyPlan plan;
  if (label == "R") {
    plan.train_strategy = plan.test_strategy = Strategy::R;
  } else if (label == "C") {
    plan.train_strategy = plan.test_strategy = Strategy::C;
  } else if (label == "RtoC") {
    plan.train_strategy = Strategy::R;
    plan.test_strategy = Strategy::C;
  } else {
    throw ConfigError("unknown strategy plan '" + label + "' (expected R, C or RtoC)");
  }
  return plan;
}

CategoryDict build_category_dict(const DatasetSplit& train_split) {
  if (train_split.examples.empty()) throw ConfigError("build_category_dict: empty split");
  std::vector<Tokens> cats;
  for (const auto& e : train_split.examples) cats.push_back(tokenize(e.question_category));
  return CategoryDict(cats);
}

std::optional<Tokens> fmm_match(const CategoryDict& dict, const Tokens& question_tokens) {
  const int limit = std::min<int>(dict.max_length(), static_cast<int>(question_tokens.size()));
  for (int len = limit; len >= 1; --len) {
    Tokens prefix(question_tokens.begin(), question_tokens.begin() + len);
    prefix = to_lower(prefix);
    if (dict.contains(prefix)) return prefix;
  }
  return std::nullopt;
}

DenseCaption combine_r(const Tokens& question_tokens, const Tokens& category,
                       const std::string& answer_label) {
  if (!is_token_prefix(category, question_tokens))
    throw ConfigError("combine_r: category '" + join_tokens(category) +
                      "' is not a prefix of '" + join_tokens(question_tokens) + "'");
  DenseCaption cap;
  cap.strategy = Strategy::R;
  cap.source_answer = answer_label;
  cap.trimmed_to = kTrimR;
  cap.tokens = tokenize(answer_label);
  Tokens rest = strip_question_mark(question_tokens);
  for (size_t i = category.size(); i < rest.size(); ++i) cap.tokens.push_back(rest[i]);
  if (cap.tokens.size() > static_cast<size_t>(kTrimR)) cap.tokens.resize(kTrimR);
  return cap;
}

DenseCaption combine_c(const Tokens& question_tokens, const std::string& answer_label) {
  DenseCaption cap;
  cap.strategy = Strategy::C;
  cap.source_answer = answer_label;
  cap.trimmed_to = kTrimC;
  cap.tokens = tokenize(answer_label);
  cap.tokens.insert(cap.tokens.end(), question_tokens.begin(), question_tokens.end());
  if (cap.tokens.size() > static_cast<size_t>(kTrimC)) cap.tokens.resize(kTrimC);
  return cap;
}

CaptionDataset build_captions(const DatasetSplit& split,
                              const std::vector<CandidateSet>& candidates,
                              const StrategyPlan& plan, Phase phase, const CategoryDict& dict) {
  plan.validate();
  if (candidates.size() != split.examples.size())
    throw ConfigError("build_captions: " + std::to_string(split.examples.size()) +
                      " examples but " + std::to_string(candidates.size()) + " candidate sets");

  const Strategy strategy =
      phase == Phase::train ? plan.train_strategy : plan.test_strategy;
  CaptionDataset ds;
  ds.n = candidates.empty() ? 0 : static_cast<int>(candidates[0].entries.size());

  for (size_t i = 0; i < split.examples.size(); ++i) {
    const VqaExample& e = split.examples[i];
    const CandidateSet& cs = candidates[i];

    // The category token sequence used by R. Training uses the example's own
    // category; at test it is recovered with forward maximum matching.
    std::optional<Tokens> category;
    if (strategy == Strategy::R) {
      if (phase == Phase::train) {
        category = tokenize(e.question_category);
      } else {
        category = fmm_match(dict, e.question_tokens);
        if (!category) ++ds.fmm_fallbacks;
      }
    }

    for (const Candidate& cand : cs.entries) {
      const std::string& label = split.answer_vocabulary[static_cast<size_t>(cand.answer_index)];
      CaptionInstance inst;
      inst.example_id = e.example_id;
      inst.image_id = e.image_id;
      inst.answer_index = cand.answer_index;
      auto it = e.answer_targets.find(label);
      inst.target = it == e.answer_targets.end() ? 0.0 : it->second;
      if (strategy == Strategy::R && category) {
        inst.caption = combine_r(e.question_tokens, *category, label);
      } else {
        inst.caption = combine_c(e.question_tokens, label);  // also the no-match fallback
      }
      ds.instances.push_back(std::move(inst));
    }
  }
  return ds;
}

void write_caption_dataset(const CaptionDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  json h{{"format", "sar.captions"},
         {"version", 1},
         {"n", ds.n},
         {"fmm_fallbacks", ds.fmm_fallbacks},
         {"num_instances", ds.instances.size()}};
  out << h.dump() << '\n';
  for (const auto& inst : ds.instances) {
    json rec{{"id", inst.example_id},
             {"image_id", inst.image_id},
             {"caption", inst.caption.tokens},
             {"strategy", to_string(inst.caption.strategy)},
             {"answer", inst.caption.source_answer},
             {"answer_index", inst.answer_index},
             {"t", inst.target}};
    out << rec.dump() << '\n';
  }
}

CaptionDataset read_caption_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
  CaptionDataset ds;
  size_t expected = 0;
  try {
    json h = json::parse(line);
    if (h.value("format", "") != "sar.captions")
      throw ParseError(path + ":1: not a caption dataset");
    ds.n = h.at("n").get<int>();
    ds.fmm_fallbacks = h.value("fmm_fallbacks", 0L);
    expected = h.value("num_instances", size_t{0});
  } catch (const json::exception& e) {
    throw ParseError(path + ":1: " + e.what());
  }
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      CaptionInstance inst;
      inst.example_id = rec.at("id").get<std::string>();
      inst.image_id = rec.at("image_id").get<std::string>();
      inst.caption.tokens = rec.at("caption").get<Tokens>();
      inst.caption.strategy = strategy_from_string(rec.at("strategy").get<std::string>());
      inst.caption.source_answer = rec.at("answer").get<std::string>();
      inst.caption.trimmed_to = inst.caption.strategy == Strategy::R ? kTrimR : kTrimC;
      inst.answer_index = rec.at("answer_index").get<int>();
      inst.target = rec.at("t").get<double>();
      ds.instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (expected != 0 && ds.instances.size() != expected)
    throw ParseError(path + ": truncated caption dataset");
  return ds;
}

}  // namespace sar
