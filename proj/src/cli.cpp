#include "sar/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "sar/config.hpp"
#include "sar/errors.hpp"
#include "sar/hash.hpp"
#include "sar/pipeline.hpp"
#include "sar/rng.hpp"

namespace sar::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GenDataOpts {
  std::string config_path;
  std::string out_dir;
  long long seed_override = -1;
};

struct TrainCasOpts {
  std::string data_dir, out_path;
  int epochs = 30;
  double lr = 0.05;
  long long seed = -1;
};

struct TrainQtdOpts {
  std::string data_dir, out_path;
  long long seed = -1;
  int folds = 5, epochs = 4, batch_size = 16, embed_dim = 16, hidden_dim = 32;
  double lr = 3e-3;
};

struct TrainVeOpts {
  std::string data_dir, cas_path, out_path, strategy = "RtoC";
  std::string loss_curve_path, dump_captions_path;
  int n = 12, epochs = 5, batch_size = 32, dim = 32, heads = 2;
  double lr = 1e-3, alpha = 1.0;
  bool ssl = false, no_self_attn = false, no_cross_attn = false;
  long long seed = -1;
};

struct EvalOpts {
  std::string data_dir, cas_path, ve_path, qtd_path, strategy = "RtoC", report_path;
  int nprime_yesno = 2, nprime_other = 10;
};

struct SweepOpts {
  std::string data_dir, cas_path, ve_path, out_path;
  std::string range_yesno = "1:2", range_other = "1:12";
};

struct AblateOpts {
  std::string config_path, out_dir = "out";
};

struct GradCheckOpts {
  int dim = 16, samples = 20;
  double eps = 1e-4;
  long long seed = 5;
  bool head_only = false;
};

void require_set(const std::string& value, const std::string& flag, const std::string& what) {
  if (value.empty())
    throw ConfigError("missing required " + flag + " (" + what + ")");
}

void require_seed(long long seed, const std::string& flag) {
  if (seed < 0) throw ConfigError("missing required " + flag + " (explicit seed)");
}

std::pair<DatasetSplit, FeatureSet> load_split(const std::string& dir, SplitName name) {
  auto [split, features] = read_dataset(dir, name);
  return {std::move(split), FeatureSet(std::move(features))};
}

void check_vocab(const std::string& artifact, const std::string& artifact_hash,
                 const std::string& reference, const std::string& reference_hash) {
  if (artifact_hash != reference_hash)
    throw ConfigError("vocabulary hash mismatch: " + artifact + " (" + artifact_hash +
                      ") vs " + reference + " (" + reference_hash + ")");
}

json report_to_json(const EvalReport& r) {
  json j{{"accuracy_all", r.accuracy_all},
         {"accuracy_yes_no", r.accuracy_yes_no},
         {"accuracy_non_yes_no", r.accuracy_non_yes_no},
         {"count_all", r.count_all},
         {"count_yes_no", r.count_yes_no},
         {"count_non_yes_no", r.count_non_yes_no},
         {"per_category", r.per_category_breakdown},
         {"fmm_fallbacks", r.fmm_fallbacks}};
  json recall = json::object();
  for (const auto& [n, v] : r.topn_recall_curve) recall[std::to_string(n)] = v;
  j["topn_recall"] = std::move(recall);
  return j;
}

int cmd_gen_data(const GenDataOpts& o) {
  require_set(o.config_path, "--config", "experiment config file");
  require_set(o.out_dir, "--out", "output directory");
  ExperimentConfig cfg = load_config(o.config_path);
  if (o.seed_override >= 0) cfg.world.seed = static_cast<uint64_t>(o.seed_override);

  World world = generate_world(cfg.world);
  ArtifactMeta meta{cfg.world.seed, config_hash(cfg.canonical())};
  fs::create_directories(o.out_dir);
  write_features(world.features, meta, o.out_dir + "/features.jsonl");
  write_split(world.train, meta, o.out_dir + "/train.jsonl");
  write_split(world.test_shifted, meta, o.out_dir + "/test_shifted.jsonl");
  write_split(world.val_iid, meta, o.out_dir + "/val_iid.jsonl");

  json manifest{{"format", "sar.dataset"},
                {"version", 1},
                {"tool_version", kToolVersion},
                {"seed", meta.seed},
                {"config_hash", meta.config_hash},
                {"vocab_hash", vocab_hash(world.train.answer_vocabulary)},
                {"images", world.features.size()},
                {"train_examples", world.train.examples.size()},
                {"test_examples", world.test_shifted.examples.size()},
                {"val_examples", world.val_iid.examples.size()}};
  std::ofstream mf(o.out_dir + "/manifest.json", std::ios::binary);
  mf << manifest.dump(2) << '\n';

  std::cout << "gen-data: images=" << world.features.size()
            << " train=" << world.train.examples.size()
            << " test_shifted=" << world.test_shifted.examples.size()
            << " val_iid=" << world.val_iid.examples.size() << "\n";
  return 0;
}

int cmd_train_cas(const TrainCasOpts& o) {
  require_set(o.data_dir, "--data", "dataset directory");
  require_set(o.out_path, "--out", "model output path");
  require_seed(o.seed, "--seed");
  auto [train, features] = load_split(o.data_dir, SplitName::train);
  CasTrainResult res =
      train_cas(train, features, o.epochs, o.lr, static_cast<uint64_t>(o.seed));
  save_cas(res.model, o.out_path);
  std::cout << "train-cas: epochs=" << o.epochs << " initial_loss=" << res.loss_curve.front()
            << " final_loss=" << res.loss_curve.back() << "\n";
  return 0;
}

int cmd_train_qtd(const TrainQtdOpts& o) {
  require_set(o.data_dir, "--data", "dataset directory");
  require_set(o.out_path, "--out", "model output path");
  require_seed(o.seed, "--seed");
  auto [train, features] = load_split(o.data_dir, SplitName::train);
  QtdTrainConfig cfg;
  cfg.folds = o.folds;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.lr = o.lr;
  cfg.embed_dim = o.embed_dim;
  cfg.hidden_dim = o.hidden_dim;
  cfg.seed = static_cast<uint64_t>(o.seed);
  QtdTrainResult res = train_qtd(train, cfg);
  save_qtd(res.model, res.cv_accuracy, o.out_path);
  std::cout << "train-qtd: folds=" << cfg.folds << " cv_accuracy=" << res.cv_accuracy << "\n";
  return 0;
}

int cmd_train_ve(const TrainVeOpts& o) {
  require_set(o.data_dir, "--data", "dataset directory");
  require_set(o.cas_path, "--cas", "candidate selector model");
  require_set(o.out_path, "--out", "model output path");
  require_seed(o.seed, "--seed");
  auto [train, features] = load_split(o.data_dir, SplitName::train);
  CasModel cas = load_cas(o.cas_path);
  check_vocab("cas model", vocab_hash(cas.answer_vocabulary), "train split",
              vocab_hash(train.answer_vocabulary));
  StrategyPlan plan = StrategyPlan::from_label(o.strategy);

  std::vector<CandidateSet> candidates;
  candidates.reserve(train.examples.size());
  for (const auto& e : train.examples) {
    CandidateSet cs;
    cs.example_id = e.example_id;
    cs.entries = select_topn(predict_scores(cas, e, features), o.n);
    candidates.push_back(std::move(cs));
  }
  CategoryDict dict = build_category_dict(train);
  CaptionDataset captions = build_captions(train, candidates, plan, Phase::train, dict);
  if (!o.dump_captions_path.empty()) write_caption_dataset(captions, o.dump_captions_path);

  VeConfig arch;
  arch.text_dim = o.dim;
  arch.heads = o.heads;
  arch.text_self_attention = !o.no_self_attn;
  arch.cross_attention = !o.no_cross_attn;
  VeModel model =
      VeModel::init(arch, build_text_vocab(captions), train.answer_vocabulary,
                    features.images().front().vectors.cols, static_cast<uint64_t>(o.seed));
  model.trained_n = o.n;
  model.plan = plan;
  model.alpha = o.alpha;
  model.ssl = o.ssl;
  model.config_hash = config_hash(
      "train-ve|n=" + std::to_string(o.n) + "|strategy=" + o.strategy +
      "|ssl=" + std::to_string(o.ssl) + "|alpha=" + std::to_string(o.alpha) +
      "|epochs=" + std::to_string(o.epochs) + "|batch=" + std::to_string(o.batch_size) +
      "|lr=" + std::to_string(o.lr) + "|dim=" + std::to_string(o.dim) +
      "|heads=" + std::to_string(o.heads) + "|seed=" + std::to_string(o.seed));

  VeTrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.lr = o.lr;
  cfg.seed = static_cast<uint64_t>(o.seed);
  cfg.alpha = o.alpha;
  cfg.ssl_enabled = o.ssl;
  VeTrainResult res = train_ve(model, captions, features, cfg);

  save_ve(model, o.out_path);
  const std::string curve_path =
      o.loss_curve_path.empty() ? o.out_path + ".loss.csv" : o.loss_curve_path;
  write_loss_curve(res.loss_curve, curve_path);
  std::cout << "train-ve: instances=" << captions.instances.size()
            << " epochs=" << o.epochs << " first_loss="
            << (res.loss_curve.empty() ? 0.0 : res.loss_curve.front())
            << " final_loss=" << (res.loss_curve.empty() ? 0.0 : res.loss_curve.back()) << "\n";
  return 0;
}

int cmd_eval(const EvalOpts& o) {
  require_set(o.data_dir, "--data", "dataset directory");
  require_set(o.cas_path, "--cas", "candidate selector model");
  require_set(o.ve_path, "--ve", "entailment scorer model");
  require_set(o.report_path, "--report", "report output path");

  auto [train, features] = load_split(o.data_dir, SplitName::train);
  CasModel cas = load_cas(o.cas_path);
  VeModel ve = load_ve(o.ve_path);
  const std::string data_hash = vocab_hash(train.answer_vocabulary);
  check_vocab("cas model", vocab_hash(cas.answer_vocabulary), "dataset", data_hash);
  check_vocab("ve model", vocab_hash(ve.answer_vocabulary), "dataset", data_hash);

  StrategyPlan plan = StrategyPlan::from_label(o.strategy);
  if (!(plan == ve.plan))
    throw ConfigError("eval: --strategy " + o.strategy + " does not match the ve model's plan " +
                      ve.plan.label());

  NPrimePolicy policy{o.nprime_yesno, o.nprime_other};
  policy.validate(ve.trained_n);

  QtdModel qtd;
  double qtd_cv = 0.0;
  const bool needs_qtd = policy.n_prime_yes_no != policy.n_prime_other;
  if (needs_qtd) {
    require_set(o.qtd_path, "--qtd", "question type discriminator model");
    auto loaded = load_qtd(o.qtd_path);
    qtd = std::move(loaded.first);
    qtd_cv = loaded.second;
    check_vocab("qtd model", qtd.answer_vocab_hash, "dataset", data_hash);
  }

  CategoryDict dict = build_category_dict(train);
  PipelineModels models;
  models.cas = &cas;
  models.ve = &ve;
  models.qtd = needs_qtd ? &qtd : nullptr;
  models.dict = &dict;
  models.plan = plan;
  models.policy = policy;

  json splits = json::object();
  std::optional<EvalReport> test_report, val_report;
  if (fs::exists(o.data_dir + "/test_shifted.jsonl")) {
    auto [split, feats] = load_split(o.data_dir, SplitName::test_shifted);
    test_report = evaluate(models, split, feats);
    splits["test_shifted"] = report_to_json(*test_report);
  }
  if (fs::exists(o.data_dir + "/val_iid.jsonl")) {
    auto [split, feats] = load_split(o.data_dir, SplitName::val_iid);
    val_report = evaluate(models, split, feats);
    splits["val_iid"] = report_to_json(*val_report);
  }
  if (!test_report && !val_report)
    throw ConfigError("eval: no test_shifted.jsonl or val_iid.jsonl under " + o.data_dir);

  json out{{"format", "sar.report"},
           {"version", 1},
           {"tool_version", kToolVersion},
           {"strategy", o.strategy},
           {"n_prime", {{"yes_no", policy.n_prime_yes_no}, {"other", policy.n_prime_other}}},
           {"vocab_hash", data_hash},
           {"qtd_cv_accuracy", qtd_cv},
           {"splits", std::move(splits)}};
  // Missing split: gap is absent from the report, never zero.
  if (test_report && val_report)
    out["gap"] = gap_between(*val_report, *test_report);
  else
    out["gap"] = nullptr;

  std::ofstream rf(o.report_path, std::ios::binary);
  if (!rf) throw ParseError("cannot open '" + o.report_path + "' for writing");
  rf << out.dump(2) << '\n';

  std::cout << "eval:";
  if (test_report) std::cout << " test_shifted=" << test_report->accuracy_all;
  if (val_report) std::cout << " val_iid=" << val_report->accuracy_all;
  if (test_report && val_report) std::cout << " gap=" << gap_between(*val_report, *test_report);
  std::cout << "\n";
  return 0;
}

int cmd_sweep(const SweepOpts& o) {
  require_set(o.data_dir, "--data", "dataset directory");
  require_set(o.cas_path, "--cas", "candidate selector model");
  require_set(o.ve_path, "--ve", "entailment scorer model");
  require_set(o.out_path, "--out", "curve output path");

  auto parse_range = [](const std::string& s) {
    size_t colon = s.find(':');
    if (colon == std::string::npos)
      throw ConfigError("sweep: range '" + s + "' must look like lo:hi");
    return std::pair<int, int>{std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
  };

  auto [train, features] = load_split(o.data_dir, SplitName::train);
  auto [test, test_features] = load_split(o.data_dir, SplitName::test_shifted);
  CasModel cas = load_cas(o.cas_path);
  VeModel ve = load_ve(o.ve_path);
  const std::string data_hash = vocab_hash(train.answer_vocabulary);
  check_vocab("cas model", vocab_hash(cas.answer_vocabulary), "dataset", data_hash);
  check_vocab("ve model", vocab_hash(ve.answer_vocabulary), "dataset", data_hash);

  CategoryDict dict = build_category_dict(train);
  PipelineModels models;
  models.cas = &cas;
  models.ve = &ve;
  models.dict = &dict;
  models.plan = ve.plan;
  models.policy = NPrimePolicy{1, 1};

  std::vector<SweepPoint> points = sweep_n_prime(models, test, test_features,
                                                 parse_range(o.range_yesno),
                                                 parse_range(o.range_other));
  write_sweep_csv(points, o.out_path);
  std::cout << "sweep: points=" << points.size() << " written to " << o.out_path << "\n";
  return 0;
}

int cmd_ablate(const AblateOpts& o) {
  require_set(o.config_path, "--config", "experiment config file");
  ExperimentConfig cfg = load_config(o.config_path);
  World world = generate_world(cfg.world);
  FeatureSet features(world.features);

  AblationInputs inputs;
  inputs.train = &world.train;
  inputs.test_shifted = &world.test_shifted;
  inputs.val_iid = &world.val_iid;
  inputs.features = &features;
  inputs.n = cfg.n;
  inputs.policy = cfg.policy;
  inputs.rows = cfg.ablate_rows;
  inputs.strategies = cfg.ablate_strategies;
  inputs.cas_epochs = cfg.cas_epochs;
  inputs.cas_lr = cfg.cas_lr;
  inputs.cas_seed = cfg.cas_seed;
  inputs.qtd = cfg.qtd;
  inputs.ve_arch = cfg.ve_arch;
  inputs.ve = cfg.ve;

  std::vector<AblationRow> rows = ablate(inputs);

  json jrows = json::array();
  for (const auto& r : rows) {
    jrows.push_back(json{{"row", r.name},
                         {"strategy", r.strategy},
                         {"test_shifted", report_to_json(r.test_shifted)},
                         {"val_iid", report_to_json(r.val_iid)},
                         {"gap", r.gap},
                         {"delta_vs_cas_only", r.delta_vs_cas_only}});
  }
  json out{{"format", "sar.ablation"},
           {"version", 1},
           {"tool_version", kToolVersion},
           {"config_hash", config_hash(cfg.canonical())},
           {"rows", std::move(jrows)}};
  fs::create_directories(o.out_dir);
  const std::string path = o.out_dir + "/ablate.json";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open '" + path + "' for writing");
  f << out.dump(2) << '\n';

  for (const auto& r : rows)
    std::cout << "ablate: " << r.name << "(" << r.strategy
              << ") test=" << r.test_shifted.accuracy_all << " val=" << r.val_iid.accuracy_all
              << " gap=" << r.gap << " delta=" << r.delta_vs_cas_only << "\n";
  return 0;
}

int cmd_grad_check(const GradCheckOpts& o) {
  VeConfig arch;
  arch.text_dim = o.dim;
  arch.heads = 2;
  if (o.head_only) {
    arch.text_self_attention = false;
    arch.cross_attention = false;
  }
  std::vector<std::string> vocab = {"<unk>", "ball", "blue", "dog", "many", "red", "this", "what"};
  const int k = 4, d_vis = 10;
  VeModel model = VeModel::init(arch, vocab, {"red", "blue"}, d_vis,
                                static_cast<uint64_t>(o.seed));
  model.trained_n = 2;

  Rng rng(static_cast<uint64_t>(o.seed) + 1);
  std::vector<Tensor> images;
  for (int i = 0; i < 3; ++i) {
    Tensor img(k, d_vis);
    for (double& v : img.data) v = rng.uniform(-1.0, 1.0);
    images.push_back(std::move(img));
  }
  std::vector<VeInstance> batch;
  const std::vector<Tokens> captions = {{"red", "dog"},
                                        {"blue", "ball", "this"},
                                        {"what", "many", "red", "ball"}};
  for (size_t i = 0; i < captions.size(); ++i) {
    VeInstance inst;
    inst.image_id = "img" + std::to_string(i);
    inst.image = &images[i];
    inst.caption_tokens = captions[i];
    inst.target = i % 2 == 0 ? 1.0 : 0.25;
    batch.push_back(inst);
  }

  GradCheckResult res = grad_check(model, batch, o.eps, o.samples,
                                   static_cast<uint64_t>(o.seed) + 2, 1.0, true);
  std::cout << "grad-check: dim=" << o.dim << " head_only=" << (o.head_only ? 1 : 0)
            << " params_checked=" << res.params_checked
            << " max_rel_error=" << res.max_rel_error << "\n";
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"select-and-rerank VQA pipeline"};
  app.require_subcommand(1);

  GenDataOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config_path, "experiment config (TOML)");
  gen_cmd->add_option("--out", gen.out_dir, "output directory");
  gen_cmd->add_option("--seed", gen.seed_override, "override world.seed");

  TrainCasOpts tcas;
  auto* tcas_cmd = app.add_subcommand("train-cas", "train the candidate answer selector");
  tcas_cmd->add_option("--data", tcas.data_dir, "dataset directory");
  tcas_cmd->add_option("--out", tcas.out_path, "model output path");
  tcas_cmd->add_option("--epochs", tcas.epochs, "training epochs");
  tcas_cmd->add_option("--lr", tcas.lr, "learning rate");
  tcas_cmd->add_option("--seed", tcas.seed, "training seed");

  TrainQtdOpts tqtd;
  auto* tqtd_cmd = app.add_subcommand("train-qtd", "train the question type discriminator");
  tqtd_cmd->add_option("--data", tqtd.data_dir, "dataset directory");
  tqtd_cmd->add_option("--out", tqtd.out_path, "model output path");
  tqtd_cmd->add_option("--seed", tqtd.seed, "training seed");
  tqtd_cmd->add_option("--folds", tqtd.folds, "cross-validation folds");
  tqtd_cmd->add_option("--epochs", tqtd.epochs, "training epochs");
  tqtd_cmd->add_option("--batch-size", tqtd.batch_size, "batch size");
  tqtd_cmd->add_option("--lr", tqtd.lr, "learning rate");
  tqtd_cmd->add_option("--embed-dim", tqtd.embed_dim, "token embedding dim");
  tqtd_cmd->add_option("--hidden-dim", tqtd.hidden_dim, "recurrent hidden dim");

  TrainVeOpts tve;
  auto* tve_cmd = app.add_subcommand("train-ve", "train the visual entailment scorer");
  tve_cmd->add_option("--data", tve.data_dir, "dataset directory");
  tve_cmd->add_option("--cas", tve.cas_path, "candidate selector model");
  tve_cmd->add_option("--strategy", tve.strategy, "R, C or RtoC");
  tve_cmd->add_option("--N", tve.n, "candidates per example");
  tve_cmd->add_flag("--ssl", tve.ssl, "enable the irrelevant-pair loss term");
  tve_cmd->add_option("--alpha", tve.alpha, "ssl down-weighting coefficient");
  tve_cmd->add_option("--epochs", tve.epochs, "training epochs");
  tve_cmd->add_option("--batch-size", tve.batch_size, "batch size");
  tve_cmd->add_option("--lr", tve.lr, "learning rate");
  tve_cmd->add_option("--dim", tve.dim, "text embedding dim");
  tve_cmd->add_option("--heads", tve.heads, "attention heads");
  tve_cmd->add_option("--seed", tve.seed, "training seed");
  tve_cmd->add_flag("--no-self-attn", tve.no_self_attn, "disable the text self-attention block");
  tve_cmd->add_flag("--no-cross-attn", tve.no_cross_attn, "disable the cross-attention block");
  tve_cmd->add_option("--out", tve.out_path, "model output path");
  tve_cmd->add_option("--loss-curve", tve.loss_curve_path, "loss curve CSV (default <out>.loss.csv)");
  tve_cmd->add_option("--dump-captions", tve.dump_captions_path, "write the caption dataset");

  EvalOpts ev;
  auto* ev_cmd = app.add_subcommand("eval", "evaluate the full pipeline");
  ev_cmd->add_option("--data", ev.data_dir, "dataset directory");
  ev_cmd->add_option("--cas", ev.cas_path, "candidate selector model");
  ev_cmd->add_option("--ve", ev.ve_path, "entailment scorer model");
  ev_cmd->add_option("--qtd", ev.qtd_path, "question type discriminator model");
  ev_cmd->add_option("--strategy", ev.strategy, "R, C or RtoC");
  ev_cmd->add_option("--report", ev.report_path, "report JSON output path");
  ev_cmd->add_option("--nprime-yesno", ev.nprime_yesno, "N' for yes/no questions");
  ev_cmd->add_option("--nprime-other", ev.nprime_other, "N' for non-yes/no questions");

  SweepOpts sw;
  auto* sw_cmd = app.add_subcommand("sweep", "accuracy vs N' curves");
  sw_cmd->add_option("--data", sw.data_dir, "dataset directory");
  sw_cmd->add_option("--cas", sw.cas_path, "candidate selector model");
  sw_cmd->add_option("--ve", sw.ve_path, "entailment scorer model");
  sw_cmd->add_option("--range-yesno", sw.range_yesno, "lo:hi for yes/no questions");
  sw_cmd->add_option("--range-other", sw.range_other, "lo:hi for non-yes/no questions");
  sw_cmd->add_option("--out", sw.out_path, "curve CSV output path");

  AblateOpts ab;
  auto* ab_cmd = app.add_subcommand("ablate", "component ablation table");
  ab_cmd->add_option("--config", ab.config_path, "experiment config (TOML)");
  ab_cmd->add_option("--out", ab.out_dir, "output directory");

  GradCheckOpts gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference gradient check");
  gc_cmd->add_option("--dim", gc.dim, "text embedding dim");
  gc_cmd->add_option("--eps", gc.eps, "finite difference step");
  gc_cmd->add_option("--samples", gc.samples, "sampled parameters per tensor");
  gc_cmd->add_option("--seed", gc.seed, "seed");
  gc_cmd->add_flag("--head-only", gc.head_only, "check the dense-head-only model");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (tcas_cmd->parsed()) return cmd_train_cas(tcas);
    if (tqtd_cmd->parsed()) return cmd_train_qtd(tqtd);
    if (tve_cmd->parsed()) return cmd_train_ve(tve);
    if (ev_cmd->parsed()) return cmd_eval(ev);
    if (sw_cmd->parsed()) return cmd_sweep(sw);
    if (ab_cmd->parsed()) return cmd_ablate(ab);
    if (gc_cmd->parsed()) return cmd_grad_check(gc);
    std::cerr << "error: usage: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "error: parse: " << e.what() << "\n";
    return 1;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: training: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sar::cli
