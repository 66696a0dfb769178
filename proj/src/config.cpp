#include "sar/config.hpp"

#include <sstream>

#include "sar/errors.hpp"
#include "sar/toml.hpp"

namespace sar {

void ExperimentConfig::validate() const {
  world.validate();
  ve.validate();
  ve_arch.validate();
  plan.validate();
  if (n < 1) throw ConfigError("n must be >= 1");
  policy.validate(n);
  if (cas_epochs < 0) throw ConfigError("cas.epochs must be >= 0");
  if (qtd.folds < 2) throw ConfigError("qtd.folds must be >= 2");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "n=" << n << ";plan=" << plan.label() << ";policy=" << policy.n_prime_yes_no << ','
     << policy.n_prime_other << ";world.seed=" << world.seed << ";world.images=" << world.num_images
     << ";world.k=" << world.objects_per_image << ";world.d=" << world.feature_dim
     << ";world.skew=" << world.prior_skew << ";world.qpi=" << world.questions_per_image
     << ";world.soft=" << world.soft_targets << ";world.types=";
  for (const auto& t : world.object_types) ss << t << ',';
  ss << ";world.colors=";
  for (const auto& c : world.colors) ss << c << ',';
  ss << ";world.max_count=" << world.max_count << ";cas=" << cas_epochs << ',' << cas_lr << ','
     << cas_seed << ";qtd=" << qtd.folds << ',' << qtd.epochs << ',' << qtd.lr << ','
     << qtd.embed_dim << ',' << qtd.hidden_dim << ',' << qtd.seed << ";ve=" << ve.epochs << ','
     << ve.batch_size << ',' << ve.lr << ',' << ve.seed << ',' << ve.alpha << ','
     << ve.ssl_enabled << ";ve_arch=" << ve_arch.text_dim << ',' << ve_arch.heads;
  return ss.str();
}

ExperimentConfig load_config(const std::string& path) {
  TomlTable t = TomlTable::parse_file(path);
  ExperimentConfig cfg;

  cfg.n = static_cast<int>(t.get_int("n", cfg.n));
  cfg.output_dir = t.get_string("output_dir", cfg.output_dir);

  cfg.world.seed = static_cast<uint64_t>(t.require_int("world.seed"));
  cfg.world.num_images = static_cast<int>(t.get_int("world.num_images", cfg.world.num_images));
  cfg.world.objects_per_image =
      static_cast<int>(t.get_int("world.objects_per_image", cfg.world.objects_per_image));
  cfg.world.feature_dim = static_cast<int>(t.get_int("world.feature_dim", cfg.world.feature_dim));
  cfg.world.object_types = t.get_string_array("world.object_types", cfg.world.object_types);
  cfg.world.colors = t.get_string_array("world.colors", cfg.world.colors);
  cfg.world.max_count = static_cast<int>(t.get_int("world.max_count", cfg.world.max_count));
  cfg.world.prior_skew = t.get_double("world.prior_skew", cfg.world.prior_skew);
  cfg.world.questions_per_image =
      static_cast<int>(t.get_int("world.questions_per_image", cfg.world.questions_per_image));
  cfg.world.soft_targets = t.get_bool("world.soft_targets", cfg.world.soft_targets);

  cfg.cas_seed = static_cast<uint64_t>(t.require_int("cas.seed"));
  cfg.cas_epochs = static_cast<int>(t.get_int("cas.epochs", cfg.cas_epochs));
  cfg.cas_lr = t.get_double("cas.lr", cfg.cas_lr);

  cfg.qtd.seed = static_cast<uint64_t>(t.require_int("qtd.seed"));
  cfg.qtd.folds = static_cast<int>(t.get_int("qtd.folds", cfg.qtd.folds));
  cfg.qtd.epochs = static_cast<int>(t.get_int("qtd.epochs", cfg.qtd.epochs));
  cfg.qtd.batch_size = static_cast<int>(t.get_int("qtd.batch_size", cfg.qtd.batch_size));
  cfg.qtd.lr = t.get_double("qtd.lr", cfg.qtd.lr);
  cfg.qtd.embed_dim = static_cast<int>(t.get_int("qtd.embed_dim", cfg.qtd.embed_dim));
  cfg.qtd.hidden_dim = static_cast<int>(t.get_int("qtd.hidden_dim", cfg.qtd.hidden_dim));

  cfg.ve.seed = static_cast<uint64_t>(t.require_int("ve.seed"));
  cfg.ve.epochs = static_cast<int>(t.get_int("ve.epochs", cfg.ve.epochs));
  cfg.ve.batch_size = static_cast<int>(t.get_int("ve.batch_size", cfg.ve.batch_size));
  cfg.ve.lr = t.get_double("ve.lr", cfg.ve.lr);
  cfg.ve.alpha = t.get_double("ve.alpha", cfg.ve.alpha);
  cfg.ve.ssl_enabled = t.get_bool("ve.ssl", cfg.ve.ssl_enabled);
  cfg.ve_arch.text_dim = static_cast<int>(t.get_int("ve.text_dim", cfg.ve_arch.text_dim));
  cfg.ve_arch.heads = static_cast<int>(t.get_int("ve.heads", cfg.ve_arch.heads));

  cfg.plan = StrategyPlan::from_label(t.get_string("plan.strategy", cfg.plan.label()));
  cfg.policy.n_prime_yes_no =
      static_cast<int>(t.get_int("policy.yes_no", cfg.policy.n_prime_yes_no));
  cfg.policy.n_prime_other =
      static_cast<int>(t.get_int("policy.other", cfg.policy.n_prime_other));

  cfg.ablate_rows = t.get_string_array("ablate.rows", cfg.ablate_rows);
  cfg.ablate_strategies = t.get_string_array("ablate.strategies", cfg.ablate_strategies);

  const auto unknown = t.unconsumed_keys();
  if (!unknown.empty()) throw ConfigError(path + ": unknown key '" + unknown.front() + "'");

  cfg.validate();
  return cfg;
}

}  // namespace sar
