#pragma once

#include <map>
#include <string>
#include <vector>

#include "sar/data.hpp"

namespace sar {

// Controls the synthetic world and the train/test answer-prior shift.
struct WorldConfig {
  uint64_t seed = 7;
  int num_images = 1000;  // train images; test_shifted and val_iid get ceil(n/4) each
  int objects_per_image = 6;
  int feature_dim = 24;
  std::vector<std::string> object_types = {"vase", "flower", "dog",  "cat",
                                           "car",  "ball",   "book", "cup"};
  std::vector<std::string> colors = {"red", "blue", "green", "yellow", "black", "white"};
  int max_count = 9;
  double prior_skew = 0.0;  // train-split concentration of the majority answer per category
  int questions_per_image = 2;
  bool soft_targets = false;

  void validate() const;  // throws ConfigError naming the violated bound
};

struct World {
  std::vector<ImageFeatures> features;
  DatasetSplit train;
  DatasetSplit test_shifted;
  DatasetSplit val_iid;
};

// Pure in (cfg); same config and seed give identical output, bit for bit.
// Train and val_iid share per-category answer distributions; test_shifted
// rotates each category's majority answer so priors learned on train point
// the wrong way. Every question is answerable from its image's object
// attributes.
World generate_world(const WorldConfig& cfg);

// Feature row layout: one-hot type | one-hot color | 2 position reals |
// noise padding in [0, 0.05). Decoders used by consistency checks and tests.
int decode_object_type(const Tensor& vectors, int row, int num_types);
int decode_object_color(const Tensor& vectors, int row, int num_types, int num_colors);

// Histogram helpers for prior-shift analysis.
std::map<std::string, std::map<std::string, int>> category_answer_histogram(
    const DatasetSplit& split);
// Majority answer of one category histogram (ties: lexicographically first).
std::string histogram_majority(const std::map<std::string, int>& hist);
// Total variation distance between two histograms over the union of keys.
double histogram_tv_distance(const std::map<std::string, int>& a,
                             const std::map<std::string, int>& b);

}  // namespace sar
