#pragma once

#include <string>
#include <vector>

#include "sar/captions.hpp"
#include "sar/qtd.hpp"
#include "sar/synthworld.hpp"
#include "sar/ve.hpp"

namespace sar {

// Declarative experiment description. Every seed is explicit; everything
// else has a documented default.
struct ExperimentConfig {
  WorldConfig world;
  int cas_epochs = 30;
  double cas_lr = 0.05;
  uint64_t cas_seed = 0;
  QtdTrainConfig qtd;
  VeConfig ve_arch;
  VeTrainConfig ve;
  StrategyPlan plan;  // default R->C
  NPrimePolicy policy;
  int n = 12;  // candidates per example for reranker training
  std::string output_dir = "out";
  std::vector<std::string> ablate_rows = {"cas_only", "cas_ve", "cas_ve_qtd", "cas_ve_ssl_qtd"};
  std::vector<std::string> ablate_strategies = {"RtoC"};

  void validate() const;  // n >= max(policy values) among other bounds
  std::string canonical() const;  // stable serialization for config hashing
};

// Parses and validates; unknown keys are rejected, missing seeds are an
// error, missing anything else takes the default.
ExperimentConfig load_config(const std::string& path);

}  // namespace sar
