#include "cle/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "cle/offline.hpp"
#include "cle/remind.hpp"
#include "cle/seeds.hpp"
#include "cle/slda.hpp"
#include "cle/softmax.hpp"
#include "cle/stream.hpp"

namespace cle {

namespace {

struct KeyDefault {
  const char* key;
  const char* value;
};

// Registry: every recognized key with its default. Echo order follows this table.
const KeyDefault kRegistry[] = {
    {"seed", "0"},
    {"learner", ""},                    // slda | replay_softmax | remind
    {"dataset", ""},                    // FSET path; empty means synthetic
    {"eval_dataset", ""},               // FSET path; defaults to `dataset` when that is set
    {"feature_source", ""},             // report label; defaults to dataset stem or "synthetic"
    {"synthetic_classes", "0"},
    {"synthetic_dim", "0"},
    {"synthetic_per_class", "0"},
    {"synthetic_eval_per_class", "50"},
    {"synthetic_separation", "1"},
    {"synthetic_noise", "1"},
    {"pretrain_classes", "0"},
    {"stream", "class_incremental"},    // class_incremental | iid
    {"checkpoint_every", "1"},          // classes (class_incremental) or examples (iid)
    {"slda_shrinkage", "1e-4"},
    {"slda_plastic", "true"},
    {"slda_init", "zeros"},             // zeros | identity
    {"softmax_lr", "0.1"},
    {"softmax_capacity", "735000"},
    {"remind_subspaces", "32"},
    {"remind_codebook", "256"},
    {"remind_capacity", "959665"},
    {"remind_replay", "50"},
    {"remind_mixup_alpha", "0.1"},
    {"remind_lr", "0.1"},
    {"remind_hidden", "256"},
    {"remind_warm_epochs", "10"},
    {"remind_warm_batch", "256"},
    {"remind_pq_iters", "25"},
    {"remind_pq_tol", "1e-4"},
    {"output_dir", "."},
    {"report_name", "report"},
    {"plan_file", ""},                  // optional stream-plan audit dump
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (const auto& kd : kRegistry) entries_.emplace_back(kd.key, kd.value);
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open config file");
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  throw std::invalid_argument("unknown config key: " + key);
}

void ExperimentConfig::apply_override(const std::string& key_equals_value) {
  const auto eq = key_equals_value.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: " + key_equals_value);
  set(trim(key_equals_value.substr(0, eq)), trim(key_equals_value.substr(eq + 1)));
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw std::invalid_argument("unknown config key: " + key);
}

std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const std::int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": not an integer: '" + v + "'");
  }
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": not an unsigned integer: '" + v + "'");
  }
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": not a number: '" + v + "'");
  }
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key " + key + ": not a boolean: '" + v + "'");
}

bool ExperimentConfig::is_set(const std::string& key) const { return !get(key).empty(); }

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const { return entries_; }

// ---------------------------------------------------------------------------

namespace {

struct LearnerBundle {
  std::unique_ptr<OnlineLearner> learner;
  std::string kind;
};

FeatureDataset load_train(const ExperimentConfig& cfg, std::uint64_t master) {
  if (cfg.is_set("dataset")) return load_dataset(cfg.get("dataset"));
  SyntheticSpec spec;
  spec.num_classes = static_cast<std::uint32_t>(cfg.get_int("synthetic_classes"));
  spec.dim = static_cast<std::uint32_t>(cfg.get_int("synthetic_dim"));
  spec.examples_per_class = static_cast<std::uint32_t>(cfg.get_int("synthetic_per_class"));
  spec.class_separation = cfg.get_double("synthetic_separation");
  spec.noise_scale = cfg.get_double("synthetic_noise");
  spec.seed = derive_seed(master, "train-data");
  return gen_synthetic_gaussian(spec);
}

FeatureDataset load_eval(const ExperimentConfig& cfg, std::uint64_t master) {
  if (cfg.is_set("eval_dataset")) return load_dataset(cfg.get("eval_dataset"));
  if (cfg.is_set("dataset")) return load_dataset(cfg.get("dataset"));
  SyntheticSpec spec;
  spec.num_classes = static_cast<std::uint32_t>(cfg.get_int("synthetic_classes"));
  spec.dim = static_cast<std::uint32_t>(cfg.get_int("synthetic_dim"));
  spec.examples_per_class = static_cast<std::uint32_t>(cfg.get_int("synthetic_per_class"));
  spec.class_separation = cfg.get_double("synthetic_separation");
  spec.noise_scale = cfg.get_double("synthetic_noise");
  // Same class means as the training draw, fresh noise.
  spec.seed = derive_seed(master, "train-data");
  return gen_synthetic_heldout(spec, static_cast<std::uint32_t>(cfg.get_int("synthetic_eval_per_class")),
                               derive_seed(master, "eval-data"));
}

LearnerBundle make_learner(const ExperimentConfig& cfg, const FeatureDataset& train, const ClassSplit& split,
                           std::uint64_t master) {
  LearnerBundle out;
  out.kind = cfg.get("learner");
  const int dim = static_cast<int>(train.dim);
  if (out.kind == "slda") {
    SldaConfig sc;
    sc.shrinkage = cfg.get_double("slda_shrinkage");
    sc.covariance_plastic = cfg.get_bool("slda_plastic");
    const std::string init = cfg.get("slda_init");
    if (init == "zeros")
      sc.init = SldaConfig::Init::kZeros;
    else if (init == "identity")
      sc.init = SldaConfig::Init::kIdentity;
    else
      throw std::invalid_argument("slda_init must be zeros or identity");
    auto slda = std::make_unique<SldaState>(dim, sc);
    slda->fit_base(subset_by_class(train, split.pretrain));
    out.learner = std::move(slda);
  } else if (out.kind == "replay_softmax") {
    out.learner = std::make_unique<ReplaySoftmax>(dim, cfg.get_double("softmax_lr"),
                                                  cfg.get_u64("softmax_capacity"), derive_seed(master, "rs-init"));
  } else if (out.kind == "remind") {
    RemindConfig rc;
    rc.pq_subspaces = static_cast<int>(cfg.get_int("remind_subspaces"));
    rc.pq_codebook_size = static_cast<int>(cfg.get_int("remind_codebook"));
    rc.buffer_capacity = cfg.get_u64("remind_capacity");
    rc.replay_samples = static_cast<int>(cfg.get_int("remind_replay"));
    rc.mixup_alpha = cfg.get_double("remind_mixup_alpha");
    rc.learning_rate = cfg.get_double("remind_lr");
    rc.hidden_units = static_cast<int>(cfg.get_int("remind_hidden"));
    rc.warm_epochs = static_cast<int>(cfg.get_int("remind_warm_epochs"));
    rc.warm_batch_size = static_cast<int>(cfg.get_int("remind_warm_batch"));
    rc.pq_opts.max_iters = static_cast<int>(cfg.get_int("remind_pq_iters"));
    rc.pq_opts.rel_tol = cfg.get_double("remind_pq_tol");
    rc.seed = derive_seed(master, "remind-init");
    out.learner = std::make_unique<RemindLearner>(subset_by_class(train, split.pretrain), rc);
  } else {
    throw std::invalid_argument("learner must be slda, replay_softmax or remind (got '" + out.kind + "')");
  }
  return out;
}

void save_learner(const LearnerBundle& bundle, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  if (bundle.kind == "slda")
    static_cast<const SldaState&>(*bundle.learner).save(os);
  else if (bundle.kind == "replay_softmax")
    static_cast<const ReplaySoftmax&>(*bundle.learner).save(os);
  else
    static_cast<const RemindLearner&>(*bundle.learner).save(os);
  if (!os) throw std::runtime_error(path.string() + ": write failure");
}

LearnerBundle load_learner(const std::string& kind, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path.string() + ": cannot open snapshot");
  LearnerBundle out;
  out.kind = kind;
  if (kind == "slda")
    out.learner = std::make_unique<SldaState>(SldaState::load(is));
  else if (kind == "replay_softmax")
    out.learner = std::make_unique<ReplaySoftmax>(ReplaySoftmax::load(is));
  else if (kind == "remind")
    out.learner = std::make_unique<RemindLearner>(RemindLearner::load(is));
  else
    throw std::invalid_argument("unknown learner kind: " + kind);
  return out;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t master = cfg.get_u64("seed");

  const FeatureDataset train = load_train(cfg, master);
  const FeatureDataset eval = load_eval(cfg, master);
  if (eval.dim != train.dim) throw std::invalid_argument("run: train/eval dim mismatch");
  if (eval.num_classes != train.num_classes) throw std::invalid_argument("run: train/eval class-count mismatch");

  SplitSpec split_spec;
  split_spec.pretrain_num_classes = static_cast<int>(cfg.get_int("pretrain_classes"));
  split_spec.seed = derive_seed(master, "split");
  const ClassSplit split = select_pretrain_classes(static_cast<int>(train.num_classes), split_spec);

  LearnerBundle bundle;
  if (options.resume) {
    if (!options.state_path) throw std::invalid_argument("run: resume requires a state path");
    bundle = load_learner(cfg.get("learner"), *options.state_path);
  } else {
    bundle = make_learner(cfg, train, split, master);
    if (options.init_only) {
      if (!options.state_path) throw std::invalid_argument("run: init-only requires a state path");
      save_learner(bundle, *options.state_path);
      return {};
    }
  }
  OnlineLearner& learner = *bundle.learner;
  // Online phase draws come from a phase-scoped stream so an interrupted +
  // resumed run behaves identically to an uninterrupted one.
  learner.reseed(derive_seed(master, "online"));

  const std::string mode = cfg.get("stream");
  StreamPlan plan;
  if (mode == "class_incremental")
    plan = build_class_incremental_stream(train, split.pretrain, derive_seed(master, "stream"),
                                          static_cast<int>(cfg.get_int("checkpoint_every")));
  else if (mode == "iid")
    plan = build_iid_stream(train, derive_seed(master, "stream"), cfg.get_u64("checkpoint_every"));
  else
    throw std::invalid_argument("stream must be class_incremental or iid (got '" + mode + "')");
  if (cfg.is_set("plan_file")) write_stream_plan(plan, cfg.get("plan_file"));

  RunReport report;
  report.config = cfg.echo();
  report.curve.method = bundle.kind;
  report.curve.feature_source = cfg.is_set("feature_source")
                                    ? cfg.get("feature_source")
                                    : (cfg.is_set("dataset")
                                           ? std::filesystem::path(cfg.get("dataset")).stem().string()
                                           : std::string("synthetic"));
  report.curve.pretrain_size = split_spec.pretrain_num_classes;

  const int k_list[] = {1, 5};
  std::vector<char> seen(train.num_classes, 0);
  for (int c : learner.known_classes())
    if (c >= 0 && static_cast<std::uint32_t>(c) < train.num_classes) seen[static_cast<std::size_t>(c)] = 1;

  // Performance right after the init phase, when the learner already knows
  // classes (position 0). A learner with no init phase starts curve-less.
  if (learner.has_trained_class())
    report.curve.points.push_back(checkpoint_evaluate(learner, eval, seen, k_list, 0));

  std::size_t next_cp = 0;
  for (std::size_t p = 0; p < plan.order.size(); ++p) {
    const std::size_t idx = plan.order[p];
    learner.observe(train.vec(idx), train.labels[idx]);
    seen[static_cast<std::size_t>(train.labels[idx])] = 1;
    while (next_cp < plan.checkpoints.size() && plan.checkpoints[next_cp].position == p + 1) {
      report.curve.points.push_back(
          checkpoint_evaluate(learner, eval, seen, k_list, plan.checkpoints[next_cp].progress));
      ++next_cp;
    }
  }

  if (report.curve.points.empty()) throw std::logic_error("run: empty learning curve");
  report.final_top1 = report.curve.points.back().top(1);
  report.final_top5 = report.curve.points.back().top(5);
  report.average_top5 = average_accuracy(report.curve, 5);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::filesystem::path out_dir = cfg.get("output_dir");
  std::filesystem::create_directories(out_dir);
  const std::string name = cfg.get("report_name");
  emit_report(report, out_dir / (name + ".json"), ReportFormat::kJson);
  emit_report(report, out_dir / (name + ".csv"), ReportFormat::kCsv);
  return report;
}

}  // namespace cle
