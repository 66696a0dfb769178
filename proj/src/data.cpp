#include "sar/data.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "sar/errors.hpp"
#include "sar/hash.hpp"

namespace sar {

using nlohmann::json;

std::string to_string(QuestionType t) {
  return t == QuestionType::yes_no ? "yes_no" : "non_yes_no";
}

QuestionType question_type_from_string(const std::string& s) {
  if (s == "yes_no") return QuestionType::yes_no;
  if (s == "non_yes_no") return QuestionType::non_yes_no;
  throw ParseError("unknown question type '" + s + "'");
}

std::string to_string(SplitName n) {
  switch (n) {
    case SplitName::train: return "train";
    case SplitName::test_shifted: return "test_shifted";
    case SplitName::val_iid: return "val_iid";
  }
  return "train";
}

SplitName split_name_from_string(const std::string& s) {
  if (s == "train") return SplitName::train;
  if (s == "test_shifted") return SplitName::test_shifted;
  if (s == "val_iid") return SplitName::val_iid;
  throw ParseError("unknown split name '" + s + "'");
}

const std::string& VqaExample::best_answer() const {
  const std::string* best = nullptr;
  double best_t = -1.0;
  for (const auto& [label, t] : answer_targets) {
    if (t > best_t) {  // map iteration is ordered, first label wins ties
      best = &label;
      best_t = t;
    }
  }
  static const std::string empty;
  return best ? *best : empty;
}

int DatasetSplit::answer_index(const std::string& label) const {
  for (size_t i = 0; i < answer_vocabulary.size(); ++i)
    if (answer_vocabulary[i] == label) return static_cast<int>(i);
  return -1;
}

FeatureSet::FeatureSet(std::vector<ImageFeatures> images) : images_(std::move(images)) {
  for (size_t i = 0; i < images_.size(); ++i) index_[images_[i].image_id] = i;
}

const ImageFeatures* FeatureSet::find(const std::string& image_id) const {
  auto it = index_.find(image_id);
  return it == index_.end() ? nullptr : &images_[it->second];
}

const ImageFeatures& FeatureSet::require(const std::string& image_id) const {
  const ImageFeatures* f = find(image_id);
  if (!f) throw ValidationError("unknown image_id '" + image_id + "'");
  return *f;
}

namespace {

json meta_header(const char* format, const ArtifactMeta& meta) {
  return json{{"format", format},
              {"version", 1},
              {"tool_version", kToolVersion},
              {"seed", meta.seed},
              {"config_hash", meta.config_hash}};
}

json read_header(std::istream& in, const char* format, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(path + ":1: bad header: " + e.what());
  }
  if (!h.is_object() || h.value("format", "") != format)
    throw ParseError(path + ":1: expected format '" + std::string(format) + "'");
  return h;
}

json tensor_to_json(const Tensor& t) {
  json rows = json::array();
  for (int r = 0; r < t.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < t.cols; ++c) row.push_back(t.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor tensor_from_json(const json& j) {
  int rows = static_cast<int>(j.size());
  int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Tensor t(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[static_cast<size_t>(r)].size()) != cols)
      throw ParseError("ragged feature matrix");
    for (int c = 0; c < cols; ++c) t.at(r, c) = j[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
  }
  return t;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: one '\n' per record on every platform
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

void write_features(const std::vector<ImageFeatures>& features, const ArtifactMeta& meta,
                    const std::string& path) {
  auto out = open_out(path);
  json h = meta_header("sar.features", meta);
  h["num_images"] = features.size();
  out << h.dump() << '\n';
  for (const auto& f : features) {
    json rec{{"image_id", f.image_id}, {"vectors", tensor_to_json(f.vectors)}};
    out << rec.dump() << '\n';
  }
}

std::vector<ImageFeatures> read_features(const std::string& path) {
  auto in = open_in(path);
  json h = read_header(in, "sar.features", path);
  const size_t expected = h.value("num_images", size_t{0});
  std::vector<ImageFeatures> out;
  std::string line;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ImageFeatures f;
    try {
      f.image_id = rec.at("image_id").get<std::string>();
      f.vectors = tensor_from_json(rec.at("vectors"));
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(f));
  }
  if (expected != 0 && out.size() != expected)
    throw ParseError(path + ": truncated: header says " + std::to_string(expected) +
                     " images, found " + std::to_string(out.size()));
  return out;
}

void write_split(const DatasetSplit& split, const ArtifactMeta& meta, const std::string& path) {
  auto out = open_out(path);
  json h = meta_header("sar.split", meta);
  h["split"] = to_string(split.name);
  h["answer_vocabulary"] = split.answer_vocabulary;
  h["vocab_hash"] = vocab_hash(split.answer_vocabulary);
  h["num_examples"] = split.examples.size();
  out << h.dump() << '\n';
  for (const auto& e : split.examples) {
    json rec{{"id", e.example_id},
             {"question", e.question_tokens},
             {"image_id", e.image_id},
             {"targets", e.answer_targets},
             {"category", e.question_category},
             {"qtype", to_string(e.question_type)}};
    out << rec.dump() << '\n';
  }
}

DatasetSplit read_split(const std::string& path) {
  auto in = open_in(path);
  json h = read_header(in, "sar.split", path);
  DatasetSplit split;
  try {
    split.name = split_name_from_string(h.at("split").get<std::string>());
    split.answer_vocabulary = h.at("answer_vocabulary").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(path + ":1: " + e.what());
  }
  const size_t expected = h.value("num_examples", size_t{0});
  std::string line;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    VqaExample e;
    try {
      e.example_id = rec.at("id").get<std::string>();
      e.question_tokens = rec.at("question").get<Tokens>();
      e.image_id = rec.at("image_id").get<std::string>();
      e.answer_targets = rec.at("targets").get<std::map<std::string, double>>();
      e.question_category = rec.at("category").get<std::string>();
      e.question_type = question_type_from_string(rec.at("qtype").get<std::string>());
    } catch (const json::exception& ex) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    split.examples.push_back(std::move(e));
  }
  if (expected != 0 && split.examples.size() != expected)
    throw ParseError(path + ": truncated: header says " + std::to_string(expected) +
                     " examples, found " + std::to_string(split.examples.size()));
  validate_split(split);
  return split;
}

void write_dataset(const DatasetSplit& split, const std::vector<ImageFeatures>& features,
                   const ArtifactMeta& meta, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_split(split, meta, dir + "/" + to_string(split.name) + ".jsonl");
  write_features(features, meta, dir + "/features.jsonl");
}

std::pair<DatasetSplit, std::vector<ImageFeatures>> read_dataset(const std::string& dir,
                                                                 SplitName name) {
  DatasetSplit split = read_split(dir + "/" + to_string(name) + ".jsonl");
  std::vector<ImageFeatures> features = read_features(dir + "/features.jsonl");
  validate_against_features(split, FeatureSet(features));
  return {std::move(split), std::move(features)};
}

void validate_split(const DatasetSplit& split) {
  for (const auto& e : split.examples) {
    bool any_positive = false;
    for (const auto& [label, t] : e.answer_targets) {
      if (split.answer_index(label) < 0)
        throw ValidationError("example '" + e.example_id + "': answer label '" + label +
                              "' is not in the vocabulary");
      if (t < 0.0 || t > 1.0)
        throw ValidationError("example '" + e.example_id + "': target " + std::to_string(t) +
                              " outside [0,1]");
      if (t > 0.0) any_positive = true;
    }
    if (!any_positive)
      throw ValidationError("example '" + e.example_id + "': no positive answer target");
    if (!is_token_prefix(tokenize(e.question_category), e.question_tokens))
      throw ValidationError("example '" + e.example_id + "': category '" + e.question_category +
                            "' is not a prefix of the question");
  }
}

void validate_against_features(const DatasetSplit& split, const FeatureSet& features) {
  for (const auto& e : split.examples) {
    const ImageFeatures* f = features.find(e.image_id);
    if (!f)
      throw ValidationError("example '" + e.example_id + "': unknown image_id '" + e.image_id +
                            "'");
    if (!f->vectors.all_finite())
      throw ValidationError("image '" + e.image_id + "': non-finite feature value");
  }
}

}  // namespace sar
