#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "sar/tensor.hpp"
#include "sar/tokens.hpp"

namespace sar {

enum class QuestionType { yes_no, non_yes_no };

std::string to_string(QuestionType t);
QuestionType question_type_from_string(const std::string& s);

enum class SplitName { train, test_shifted, val_iid };

std::string to_string(SplitName n);
SplitName split_name_from_string(const std::string& s);

// One (image, question, soft answer targets) sample.
struct VqaExample {
  std::string example_id;
  Tokens question_tokens;
  std::string image_id;
  std::map<std::string, double> answer_targets;  // answer label -> t in [0,1]
  std::string question_category;                 // token prefix, e.g. "what color"
  QuestionType question_type = QuestionType::non_yes_no;

  // Answer with the highest t; ties go to the lexicographically first label.
  const std::string& best_answer() const;

  bool operator==(const VqaExample&) const = default;
};

// K object feature vectors of dimension D for one image.
struct ImageFeatures {
  std::string image_id;
  Tensor vectors;  // K x D

  bool operator==(const ImageFeatures&) const = default;
};

struct DatasetSplit {
  SplitName name = SplitName::train;
  std::vector<VqaExample> examples;
  std::vector<std::string> answer_vocabulary;  // fixed order, shared across splits

  int answer_index(const std::string& label) const;  // -1 if absent

  bool operator==(const DatasetSplit&) const = default;
};

// Immutable-after-load image feature store with id lookup.
class FeatureSet {
 public:
  FeatureSet() = default;
  explicit FeatureSet(std::vector<ImageFeatures> images);

  const ImageFeatures* find(const std::string& image_id) const;
  const ImageFeatures& require(const std::string& image_id) const;  // throws ValidationError
  const std::vector<ImageFeatures>& images() const { return images_; }

 private:
  std::vector<ImageFeatures> images_;
  std::unordered_map<std::string, size_t> index_;
};

// Metadata embedded in every artifact file.
struct ArtifactMeta {
  uint64_t seed = 0;
  std::string config_hash;
};

// On-disk layout under a dataset directory:
//   features.jsonl        header line + one record per image
//   <split name>.jsonl    header line + one record per example
// Reals are written in shortest round-trip decimal form, so
// read(write(x)) == x exactly.
void write_features(const std::vector<ImageFeatures>& features, const ArtifactMeta& meta,
                    const std::string& path);
std::vector<ImageFeatures> read_features(const std::string& path);

void write_split(const DatasetSplit& split, const ArtifactMeta& meta, const std::string& path);
DatasetSplit read_split(const std::string& path);

// Convenience pair used by the CLI: split file plus the shared features file
// in one directory.
void write_dataset(const DatasetSplit& split, const std::vector<ImageFeatures>& features,
                   const ArtifactMeta& meta, const std::string& dir);
std::pair<DatasetSplit, std::vector<ImageFeatures>> read_dataset(const std::string& dir,
                                                                 SplitName name);

// Dataset invariants: every target label is in the vocabulary (error names the
// label), every t is in [0,1], at least one t > 0, the category is a token
// prefix of the question, and every referenced image exists with finite rows.
void validate_split(const DatasetSplit& split);
void validate_against_features(const DatasetSplit& split, const FeatureSet& features);

}  // namespace sar
