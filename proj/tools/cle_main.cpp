#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cle/experiment.hpp"
#include "cle/kernels.hpp"
#include "cle/metrics.hpp"
#include "cle/offline.hpp"
#include "cle/seeds.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

int cmd_gen(const cle::SyntheticSpec& spec, const std::string& out) {
  cle::save_dataset(cle::gen_synthetic_gaussian(spec), out);
  std::cout << "wrote " << out << " (" << spec.num_classes << " classes x " << spec.examples_per_class
            << " examples, dim " << spec.dim << ")\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides, bool init_only, bool resume,
            const std::string& state) {
  cle::ExperimentConfig cfg = cle::ExperimentConfig::from_file(config_path);
  for (const auto& kv : overrides) cfg.apply_override(kv);
  cle::RunOptions options;
  options.init_only = init_only;
  options.resume = resume;
  if (!state.empty()) options.state_path = state;
  const cle::RunReport report = cle::run_experiment(cfg, options);
  if (init_only) {
    std::cout << "init phase complete; learner snapshot at " << state << "\n";
    return 0;
  }
  std::cout << "final_top1=" << report.final_top1 << " final_top5=" << report.final_top5
            << " average_top5=" << report.average_top5 << " points=" << report.curve.points.size()
            << " wall_seconds=" << report.wall_seconds << "\n";
  return 0;
}

int cmd_eval_offline(const std::string& train_path, const std::string& eval_path, std::vector<int> k_list,
                     const cle::OfflineTrainConfig& cfg, const std::string& save_head) {
  const cle::FeatureDataset train = cle::load_dataset(train_path);
  const cle::FeatureDataset eval = cle::load_dataset(eval_path);
  cle::SoftmaxHead head = cle::train_linear_offline(train, cfg);
  if (!save_head.empty()) {
    std::ofstream os(save_head, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error(save_head + ": cannot open for writing");
    head.save(os);
  }
  nlohmann::ordered_json j;
  j["train"] = train_path;
  j["eval"] = eval_path;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["weight_decay"] = cfg.weight_decay;
  j["seed"] = cfg.seed;
  for (int k : k_list) j["top" + std::to_string(k)] = cle::evaluate_topk(head, eval, k);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs) {
  struct Row {
    std::string name;
    double final_top1;
  };
  std::vector<Row> rows;
  for (const auto& path : inputs) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error(path + ": cannot open report");
    nlohmann::json j = nlohmann::json::parse(is);
    rows.push_back({path, j.at("final_top1").get<double>()});
  }
  const double baseline = rows.front().final_top1;
  std::cout << "run,final_top1,relative_improvement_pct\n";
  for (const auto& row : rows) {
    std::cout << row.name << "," << nlohmann::json(row.final_top1).dump() << ","
              << nlohmann::json(cle::relative_improvement(row.final_top1, baseline)).dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online continual-learning engine over embedding vectors"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "OpenMP thread cap (0 = library default)");
  bool serial = false;
  app.add_flag("--serial", serial, "run the serial reference kernels");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic Gaussian FSET dataset");
  cle::SyntheticSpec spec;
  std::string gen_out;
  gen->add_option("--classes", spec.num_classes, "number of classes")->required();
  gen->add_option("--dim", spec.dim, "embedding dimensionality")->required();
  gen->add_option("--per-class", spec.examples_per_class, "examples per class")->required();
  gen->add_option("--separation", spec.class_separation, "distance scale between class means")
      ->default_val(1.0);
  gen->add_option("--noise", spec.noise_scale, "within-class standard deviation")->default_val(1.0);
  gen->add_option("--seed", spec.seed, "generator seed")->default_val(0);
  gen->add_option("--out", gen_out, "output FSET path")->required();

  // run
  auto* run = app.add_subcommand("run", "run a pre-train + stream experiment from a config file");
  std::string run_config, run_state;
  std::vector<std::string> run_overrides;
  bool run_init_only = false, run_resume = false;
  run->add_option("--config", run_config, "key=value config file")->required();
  run->add_option("--set", run_overrides, "override a config key (key=value, repeatable)");
  run->add_flag("--init-only", run_init_only, "stop after the init phase and write the learner snapshot");
  run->add_flag("--resume", run_resume, "skip the init phase and load the learner snapshot");
  run->add_option("--state", run_state, "learner snapshot path for --init-only / --resume");

  // eval-offline
  auto* ev = app.add_subcommand("eval-offline", "train an offline linear probe and report top-k accuracy");
  std::string ev_train, ev_eval, ev_save_head;
  std::vector<int> ev_k{1, 5};
  cle::OfflineTrainConfig ocfg;
  ev->add_option("--train", ev_train, "training FSET path")->required();
  ev->add_option("--eval", ev_eval, "evaluation FSET path")->required();
  ev->add_option("--k", ev_k, "top-k values to report");
  ev->add_option("--epochs", ocfg.epochs);
  ev->add_option("--batch-size", ocfg.batch_size);
  ev->add_option("--lr", ocfg.learning_rate);
  ev->add_option("--decay-epochs", ocfg.decay_epochs);
  ev->add_option("--decay-factor", ocfg.decay_factor);
  ev->add_option("--weight-decay", ocfg.weight_decay);
  ev->add_option("--seed", ocfg.seed);
  ev->add_option("--save-head", ev_save_head, "write the trained head snapshot here");

  // report
  auto* rep = app.add_subcommand("report", "relative-improvement table across run reports");
  std::vector<std::string> rep_inputs;
  rep->add_option("--inputs", rep_inputs, "report.json files; the first is the baseline")
      ->required()
      ->expected(-1);

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif
  if (serial) cle::kernels::set_backend(cle::kernels::Backend::kSerial);

  try {
    if (gen->parsed()) return cmd_gen(spec, gen_out);
    if (run->parsed()) return cmd_run(run_config, run_overrides, run_init_only, run_resume, run_state);
    if (ev->parsed()) return cmd_eval_offline(ev_train, ev_eval, ev_k, ocfg, ev_save_head);
    if (rep->parsed()) return cmd_report(rep_inputs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
