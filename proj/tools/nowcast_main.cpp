#include "nowcast/checkpoint.hpp"
#include "nowcast/config.hpp"
#include "nowcast/dataset.hpp"
#include "nowcast/evaluation.hpp"
#include "nowcast/krige_cache.hpp"
#include "nowcast/models.hpp"
#include "nowcast/pipeline.hpp"
#include "nowcast/synthetic.hpp"
#include "nowcast/training.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using namespace nowcast;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitHash = 3;
constexpr int kExitMissing = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct HashError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string env_data_root() {
  const char* e = std::getenv("NOWCAST_DATA_ROOT");
  return e ? std::string(e) : std::string();
}

/// Writes the fully resolved configuration and its hash into the run
/// directory, making every artifact directory self-describing.
void freeze_config(const KeyValueConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  cfg.save(out_dir + "/config.txt");
  std::ofstream h(out_dir + "/config.hash");
  h << hex64(cfg.hash()) << "\n";
}

/// Hash over the semantic configuration only: path.* keys are excluded so
/// relocating a corpus does not break the chain.
std::uint64_t chain_hash(const KeyValueConfig& cfg) {
  KeyValueConfig c;
  for (const auto& [k, v] : cfg.entries())
    if (k.rfind("path.", 0) != 0) c.set(k, v);
  return c.hash();
}

std::uint64_t krige_chain_hash(std::uint64_t preprocess_hash, int bins) {
  KeyValueConfig c;
  c.set("krige.preprocess_hash", hex64(preprocess_hash));
  c.set("krige.variogram_bins", static_cast<std::int64_t>(bins));
  return c.hash();
}

struct DataDir {
  std::string dir;
  KeyValueConfig cfg;
  DatasetManifest manifest;
  std::string corpus_root;
  std::uint64_t preprocess_hash = 0;
};

DataDir open_data_dir(const std::string& dir) {
  if (!fs::exists(dir + "/config.txt") || !fs::exists(dir + "/manifest.txt"))
    throw MissingError("no preprocessed dataset at " + dir +
                       " (expected config.txt and manifest.txt)");
  DataDir d;
  d.dir = dir;
  d.cfg = KeyValueConfig::load(dir + "/config.txt");
  d.manifest = DatasetManifest::load(dir + "/manifest.txt");
  d.corpus_root = d.cfg.get("path.corpus", std::string());
  if (d.corpus_root.empty() || !fs::exists(d.corpus_root))
    throw MissingError("corpus root recorded in " + dir + " does not exist");
  d.preprocess_hash = chain_hash(d.cfg);
  return d;
}

std::string read_hash_file(const std::string& path) {
  std::ifstream in(path);
  std::string s;
  in >> s;
  return s;
}

/// Opens (or builds) the kriging cache for a data directory, refusing one
/// written under a different configuration hash.
std::unique_ptr<KrigeCache> open_krige_cache(const DataDir& d,
                                             const std::string& cache_dir,
                                             int bins) {
  const std::string dir = cache_dir.empty() ? d.dir + "/krige_cache" : cache_dir;
  const std::uint64_t expected = krige_chain_hash(d.preprocess_hash, bins);
  const std::string hash_file = dir + "/cache.hash";
  if (fs::exists(hash_file) && read_hash_file(hash_file) != hex64(expected))
    throw HashError("kriging cache at " + dir +
                    " was built under a different configuration");
  auto cache = std::make_unique<KrigeCache>(dir, expected);
  std::ofstream(hash_file) << hex64(expected) << "\n";
  return cache;
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
  std::int64_t seed = 0;
  std::string out;
  int blobs = 3;
  int train_days = 2;
  int test_days = 1;
  int frames_per_day = 48;
};

int cmd_synth(const SynthArgs& a) {
  SyntheticConfig cfg;
  cfg.seed = a.seed;
  cfg.blobs = a.blobs;
  cfg.train_days = a.train_days;
  cfg.test_days = a.test_days;
  cfg.frames_per_day = a.frames_per_day;
  if (cfg.train_days < 1 || cfg.test_days < 1 || cfg.frames_per_day < 1 ||
      cfg.blobs < 0)
    throw ConfigError("synth: day/frame counts must be positive");
  generate_synthetic_corpus(cfg, a.out);
  if (cfg.blobs == 0)
    std::cerr << "warning: --blobs 0 produces a rain-free corpus; the filtered "
                 "manifest will be empty\n";

  KeyValueConfig frozen;
  frozen.set("stage", std::string("synth"));
  frozen.set("synth.seed", a.seed);
  frozen.set("synth.blobs", static_cast<std::int64_t>(a.blobs));
  frozen.set("synth.train_days", static_cast<std::int64_t>(a.train_days));
  frozen.set("synth.test_days", static_cast<std::int64_t>(a.test_days));
  frozen.set("synth.frames_per_day", static_cast<std::int64_t>(a.frames_per_day));
  freeze_config(frozen, a.out);
  std::cout << "synth: wrote corpus to " << a.out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------ preprocess

struct PreprocessArgs {
  std::string corpus;
  std::string out;
  std::int64_t seed = 0;
  double filter_threshold = 0.5;
  std::string filter_frame = "target";
  int test_year = 2019;
};

int cmd_preprocess(const PreprocessArgs& a) {
  if (a.corpus.empty() || !fs::exists(a.corpus))
    throw MissingError("preprocess: corpus directory not found: " + a.corpus);
  if (a.filter_frame != "target" && a.filter_frame != "last_input")
    throw ConfigError("preprocess: --filter-frame must be target or last_input");

  ManifestConfig mc;
  mc.seed = a.seed;
  mc.filter_threshold = a.filter_threshold;
  mc.filter_frame = a.filter_frame;
  mc.test_year = a.test_year;
  DatasetManifest manifest = build_manifest(a.corpus, mc);

  fs::create_directories(a.out);
  manifest.save(a.out + "/manifest.txt");

  KeyValueConfig frozen;
  frozen.set("stage", std::string("preprocess"));
  frozen.set("preprocess.seed", a.seed);
  frozen.set("preprocess.filter_threshold", a.filter_threshold);
  frozen.set("preprocess.filter_frame", a.filter_frame);
  frozen.set("preprocess.test_year", static_cast<std::int64_t>(a.test_year));
  frozen.set("path.corpus", a.corpus);
  freeze_config(frozen, a.out);

  std::cout << "preprocess: " << manifest.candidates << " candidates, kept "
            << manifest.samples.size() << " (train " << manifest.count(Split::kTrain)
            << ", val " << manifest.count(Split::kValidation) << ", test "
            << manifest.count(Split::kTest) << "), dropped "
            << manifest.dropped_by_filter << " by filter, "
            << manifest.dropped_by_alignment << " by alignment\n";
  if (manifest.samples.empty())
    std::cerr << "warning: manifest is empty after filtering\n";
  return kExitOk;
}

// ----------------------------------------------------------------- krige

struct KrigeArgs {
  std::string data;
  std::string cache_dir;
  int bins = 8;
};

int cmd_krige(const KrigeArgs& a) {
  DataDir d = open_data_dir(a.data);
  Corpus corpus = Corpus::load(d.corpus_root);
  auto cache = open_krige_cache(d, a.cache_dir, a.bins);

  KrigeConfig kc;
  kc.variogram_bins = a.bins;
  std::int64_t built = 0;
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    Dataset ds(corpus, d.manifest, s, cache.get(), kc);
    for (size_t i = 0; i < ds.size(); ++i) {
      ds.krige_stack(i);
      ++built;
    }
  }
  std::cout << "krige: cache for " << built << " samples ready under "
            << (a.cache_dir.empty() ? d.dir + "/krige_cache" : a.cache_dir) << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string model = "smaat_unet";
  std::string out;
  std::string krige_cache;
  std::int64_t seed = 0;
  double lr = 1e-3;
  std::int64_t batch_size = 16;
  std::int64_t epochs = 200;
  std::int64_t es_patience = 12;
  std::int64_t lr_patience = 8;
  double lr_factor = 0.1;
  int bins = 8;
  bool resume = false;
};

KeyValueConfig train_run_config(const TrainArgs& a, std::uint64_t pre_hash) {
  KeyValueConfig cfg;
  cfg.set("stage", std::string("train"));
  cfg.set("chain.preprocess_hash", hex64(pre_hash));
  cfg.set("train.model", a.model);
  cfg.set("train.seed", a.seed);
  cfg.set("train.lr", a.lr);
  cfg.set("train.batch_size", a.batch_size);
  cfg.set("train.max_epochs", a.epochs);
  cfg.set("train.es_patience", a.es_patience);
  cfg.set("train.lr_patience", a.lr_patience);
  cfg.set("train.lr_factor", a.lr_factor);
  cfg.set("krige.variogram_bins", static_cast<std::int64_t>(a.bins));
  cfg.set("path.data", a.data);
  return cfg;
}

std::unique_ptr<Model> make_named_model(const std::string& name, std::uint64_t seed) {
  NetConfig nc;
  nc.seed = seed;
  try {
    return make_model(name, nc);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

int cmd_train(const TrainArgs& a) {
  if (a.model == "persistence")
    throw ConfigError("train: persistence has no trainable parameters");
  auto model = make_named_model(a.model, static_cast<std::uint64_t>(a.seed));

  DataDir d = open_data_dir(a.data);
  Corpus corpus = Corpus::load(d.corpus_root);

  KeyValueConfig frozen = train_run_config(a, d.preprocess_hash);
  const std::uint64_t run_hash = chain_hash(frozen);
  freeze_config(frozen, a.out);
  {
    std::ofstream arch(a.out + "/architecture.txt");
    NetConfig nc;
    nc.seed = static_cast<std::uint64_t>(a.seed);
    arch << "model = " << a.model << "\n" << nc.describe();
    arch << "parameters = " << parameter_count(*model) << "\n";
  }

  std::unique_ptr<KrigeCache> cache;
  KrigeConfig kc;
  kc.variogram_bins = a.bins;
  if (model->wants_krige()) cache = open_krige_cache(d, a.krige_cache, a.bins);

  Dataset train_set(corpus, d.manifest, Split::kTrain, cache.get(), kc);
  Dataset val_set(corpus, d.manifest, Split::kValidation, cache.get(), kc);
  if (train_set.size() == 0 || val_set.size() == 0)
    throw MissingError("train: empty train or validation split in " + a.data);

  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.batch_size = a.batch_size;
  tc.max_epochs = a.epochs;
  tc.early_stop_patience = a.es_patience;
  tc.lr_patience = a.lr_patience;
  tc.lr_factor = a.lr_factor;
  tc.seed = static_cast<std::uint64_t>(a.seed);
  tc.config_hash = run_hash;
  tc.checkpoint_path = a.out + "/model.ckpt";
  tc.history_path = a.out + "/history.txt";

  TrainResult r = train_model(*model, train_set, val_set, tc, &std::cout, a.resume);

  std::ofstream summary(a.out + "/train_summary.txt");
  summary << "model = " << a.model << "\n"
          << "epochs_run = " << r.epochs_run << "\n"
          << "best_epoch = " << r.best_epoch << "\n"
          << "best_val_loss = " << r.best_val_loss << "\n"
          << "early_stopped = " << (r.early_stopped ? "true" : "false") << "\n";
  std::cout << "train: best val loss " << r.best_val_loss << " at epoch "
            << r.best_epoch << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- evaluate

struct EvalArgs {
  std::string data;
  std::string run;    // train output directory
  std::string model;  // alternative: an untrained baseline (persistence)
  std::string out;
  std::string krige_cache;
  std::vector<double> thresholds = kDefaultThresholdsMmh;
  double ablate_threshold = 0.5;
};

struct LoadedModel {
  std::unique_ptr<Model> model;
  int bins = 8;
  std::string id;
};

LoadedModel load_run_model(const EvalArgs& a, const DataDir& d) {
  LoadedModel lm;
  if (a.run.empty()) {
    if (a.model.empty())
      throw ConfigError("evaluate: need --run or --model persistence");
    lm.model = make_named_model(a.model, 0);
    if (lm.model->trainable())
      throw ConfigError("evaluate: --model without --run is only valid for "
                        "untrained baselines (persistence)");
    lm.id = a.model;
    return lm;
  }
  if (!fs::exists(a.run + "/config.txt"))
    throw MissingError("evaluate: no run config at " + a.run);
  if (!fs::exists(a.run + "/model.ckpt"))
    throw MissingError("evaluate: no checkpoint at " + a.run);
  KeyValueConfig run_cfg = KeyValueConfig::load(a.run + "/config.txt");
  if (run_cfg.get("chain.preprocess_hash", std::string()) != hex64(d.preprocess_hash))
    throw HashError("evaluate: checkpoint was trained under a different "
                    "preprocessing configuration");
  const std::uint64_t expected = chain_hash(run_cfg);
  if (peek_checkpoint_hash(a.run + "/model.ckpt") != expected)
    throw HashError("evaluate: checkpoint hash does not match its run config");

  const std::string name = run_cfg.get("train.model", std::string());
  const auto seed = static_cast<std::uint64_t>(run_cfg.get("train.seed", std::int64_t{0}));
  lm.model = make_named_model(name, seed);
  load_checkpoint(a.run + "/model.ckpt", *lm.model, nullptr);
  lm.bins = static_cast<int>(run_cfg.get("krige.variogram_bins", std::int64_t{8}));
  lm.id = name;
  return lm;
}

Dataset test_dataset(const DataDir& d, const Corpus& corpus, const LoadedModel& lm,
                     const EvalArgs& a, std::unique_ptr<KrigeCache>& cache) {
  KrigeConfig kc;
  kc.variogram_bins = lm.bins;
  if (lm.model->wants_krige()) cache = open_krige_cache(d, a.krige_cache, lm.bins);
  Dataset test(corpus, d.manifest, Split::kTest, cache.get(), kc);
  if (test.size() == 0) throw MissingError("evaluate: empty test split in " + a.data);
  return test;
}

int cmd_evaluate(const EvalArgs& a) {
  DataDir d = open_data_dir(a.data);
  Corpus corpus = Corpus::load(d.corpus_root);
  LoadedModel lm = load_run_model(a, d);
  std::unique_ptr<KrigeCache> cache;
  Dataset test = test_dataset(d, corpus, lm, a, cache);

  EvalConfig ec;
  ec.thresholds_mmh = a.thresholds;
  MetricReport report = evaluate_model(*lm.model, test, ec);
  report.model_id = lm.id;
  report.dataset_id = hex64(d.preprocess_hash);

  fs::create_directories(a.out);
  std::ofstream(a.out + "/metrics.txt") << report.to_text();
  std::ofstream(a.out + "/metrics.tsv") << report.to_table();

  KeyValueConfig frozen;
  frozen.set("stage", std::string("evaluate"));
  frozen.set("chain.preprocess_hash", hex64(d.preprocess_hash));
  frozen.set("evaluate.model", lm.id);
  frozen.set("path.data", a.data);
  frozen.set("path.run", a.run);
  freeze_config(frozen, a.out);
  std::cout << report.to_text();
  return kExitOk;
}

int cmd_ablate(const EvalArgs& a) {
  DataDir d = open_data_dir(a.data);
  Corpus corpus = Corpus::load(d.corpus_root);
  LoadedModel lm = load_run_model(a, d);
  if (!lm.model->wants_station() && !lm.model->wants_krige())
    throw ConfigError("ablate: model '" + lm.id + "' consumes no station data");
  std::unique_ptr<KrigeCache> cache;
  Dataset test = test_dataset(d, corpus, lm, a, cache);

  EvalConfig ec;
  AblationResult r = ablate_variables(*lm.model, test, ec, a.ablate_threshold);

  fs::create_directories(a.out);
  std::ofstream(a.out + "/ablation.txt") << r.to_text();
  {
    std::ofstream tsv(a.out + "/ablation.tsv");
    tsv << "variable\tf1_ablated\tdelta_f1\tcontribution_pct\n";
    for (const AblationEntry& e : r.entries)
      tsv << e.variable << "\t" << e.f1_ablated << "\t" << e.f1_delta << "\t"
          << e.contribution_pct << "\n";
  }
  KeyValueConfig frozen;
  frozen.set("stage", std::string("ablate"));
  frozen.set("chain.preprocess_hash", hex64(d.preprocess_hash));
  frozen.set("ablate.model", lm.id);
  frozen.set("ablate.threshold", a.ablate_threshold);
  frozen.set("path.data", a.data);
  frozen.set("path.run", a.run);
  freeze_config(frozen, a.out);
  std::cout << r.to_text();
  return kExitOk;
}

// ---------------------------------------------------------------- report

int cmd_report(const std::string& eval_dir, const std::string& out_dir) {
  if (!fs::exists(eval_dir + "/metrics.txt"))
    throw MissingError("report: no metrics.txt under " + eval_dir);
  fs::create_directories(out_dir);
  std::ostringstream body;
  body << std::ifstream(eval_dir + "/metrics.txt").rdbuf();
  if (fs::exists(eval_dir + "/ablation.txt")) {
    body << "\n";
    body << std::ifstream(eval_dir + "/ablation.txt").rdbuf();
  }
  std::ofstream(out_dir + "/report.txt") << body.str();
  for (const char* f : {"metrics.tsv", "ablation.tsv"})
    if (fs::exists(eval_dir + "/" + f))
      fs::copy_file(eval_dir + "/" + f, out_dir + "/" + f,
                    fs::copy_options::overwrite_existing);
  std::cout << "report: wrote " << out_dir << "/report.txt\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"precipitation nowcasting toolkit"};
  app.require_subcommand(1);

  std::string device = "cpu";
  int workers = 1;
  bool deterministic = true;
  app.add_option("--device", device, "compute device (cpu only)");
  app.add_option("--workers", workers, "worker count (must be 1)");
  app.add_flag("--deterministic,!--no-deterministic", deterministic,
               "bit-reproducible mode (always on; flag kept for scripts)");

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic corpus");
  s_synth->add_option("--seed", synth.seed, "corpus seed");
  s_synth->add_option("--out", synth.out, "output directory")->required();
  s_synth->add_option("--blobs", synth.blobs, "rain blobs per day");
  s_synth->add_option("--train-days", synth.train_days, "days in the train years");
  s_synth->add_option("--test-days", synth.test_days, "days in the test year");
  s_synth->add_option("--frames-per-day", synth.frames_per_day, "5-minute frames per day");

  PreprocessArgs pre;
  pre.corpus = env_data_root();
  auto* s_pre = app.add_subcommand("preprocess", "build the dataset manifest");
  s_pre->add_option("--corpus", pre.corpus, "corpus root (default $NOWCAST_DATA_ROOT)");
  s_pre->add_option("--out", pre.out, "output directory")->required();
  s_pre->add_option("--seed", pre.seed, "validation split seed");
  s_pre->add_option("--filter-threshold", pre.filter_threshold,
                    "minimum rain fraction of the filter frame");
  s_pre->add_option("--filter-frame", pre.filter_frame, "target or last_input");
  s_pre->add_option("--test-year", pre.test_year, "first test year");

  KrigeArgs krige;
  auto* s_krige = app.add_subcommand("krige", "build the kriging cache");
  s_krige->add_option("--data", krige.data, "preprocessed dataset directory")->required();
  s_krige->add_option("--cache-dir", krige.cache_dir, "cache directory (default <data>/krige_cache)");
  s_krige->add_option("--bins", krige.bins, "empirical variogram bins");

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "train a model");
  s_train->add_option("--data", train.data, "preprocessed dataset directory")->required();
  s_train->add_option("--model", train.model, "model name");
  s_train->add_option("--out", train.out, "run directory")->required();
  s_train->add_option("--krige-cache", train.krige_cache, "kriging cache directory");
  s_train->add_option("--seed", train.seed, "training seed");
  s_train->add_option("--lr", train.lr, "initial learning rate");
  s_train->add_option("--batch-size", train.batch_size, "minibatch size");
  s_train->add_option("--epochs", train.epochs, "maximum epochs");
  s_train->add_option("--es-patience", train.es_patience, "early-stopping patience");
  s_train->add_option("--lr-patience", train.lr_patience, "LR-reduction patience");
  s_train->add_option("--lr-factor", train.lr_factor, "LR reduction factor");
  s_train->add_option("--bins", train.bins, "empirical variogram bins");
  s_train->add_flag("--resume", train.resume, "resume from the run checkpoint");

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("evaluate", "score a model on the test split");
  s_eval->add_option("--data", eval.data, "preprocessed dataset directory")->required();
  s_eval->add_option("--run", eval.run, "train run directory");
  s_eval->add_option("--model", eval.model, "untrained baseline model name");
  s_eval->add_option("--out", eval.out, "output directory")->required();
  s_eval->add_option("--krige-cache", eval.krige_cache, "kriging cache directory");
  s_eval->add_option("--threshold", eval.thresholds, "thresholds in mm/h");

  EvalArgs ablate;
  auto* s_ablate = app.add_subcommand("ablate", "variable-knockout study");
  s_ablate->add_option("--data", ablate.data, "preprocessed dataset directory")->required();
  s_ablate->add_option("--run", ablate.run, "train run directory");
  s_ablate->add_option("--out", ablate.out, "output directory")->required();
  s_ablate->add_option("--krige-cache", ablate.krige_cache, "kriging cache directory");
  s_ablate->add_option("--threshold", ablate.ablate_threshold, "knockout threshold in mm/h");

  std::string report_eval, report_out;
  auto* s_report = app.add_subcommand("report", "render evaluation artifacts");
  s_report->add_option("--eval", report_eval, "evaluation directory")->required();
  s_report->add_option("--out", report_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (device != "cpu") throw ConfigError("only --device cpu is supported");
    if (workers != 1) throw ConfigError("only --workers 1 is supported");
    if (*s_synth) return cmd_synth(synth);
    if (*s_pre) return cmd_preprocess(pre);
    if (*s_krige) return cmd_krige(krige);
    if (*s_train) return cmd_train(train);
    if (*s_eval) return cmd_evaluate(eval);
    if (*s_ablate) return cmd_ablate(ablate);
    if (*s_report) return cmd_report(report_eval, report_out);
    throw ConfigError("no subcommand");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const HashError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitHash;
  } catch (const MissingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
