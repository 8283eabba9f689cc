#include "nowcast/training.hpp"

#include "helpers.hpp"
#include "nowcast/checkpoint.hpp"
#include "nowcast/dataset.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
  const fs::path p =
      fs::temp_directory_path() / (std::string("nowcast_train_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ostringstream out;
  out << std::ifstream(path, std::ios::binary).rdbuf();
  return out.str();
}

struct Fixture {
  std::string dir;
  Corpus corpus;
  DatasetManifest manifest;

  explicit Fixture(const char* tag, int frames_per_day = 36) : dir(temp_dir(tag)) {
    testutil::write_corpus(dir, 1, 1, frames_per_day, [](int day, int step) {
      // mildly time-varying wet band so training has signal
      return testutil::banded_grid(1.0f + 0.05f * step + 0.3f * day, 0.6);
    });
    ManifestConfig mc;
    mc.seed = 7;
    manifest = build_manifest(dir, mc);
    corpus = Corpus::load(dir);
  }
};

}  // namespace

TEST_CASE("plateau scheduler fires at exactly the configured patiences") {
  PlateauScheduler sched(12, 8);
  CHECK(sched.observe(1.0).improved);  // first observation improves

  // 12 epochs without improvement: LR drops on the 8th, stop on the 12th
  for (int bad = 1; bad <= 12; ++bad) {
    const auto d = sched.observe(1.0);  // equal is not an improvement
    CAPTURE(bad);
    CHECK(!d.improved);
    CHECK(d.reduce_lr == (bad == 8));
    CHECK(d.stop == (bad == 12));
  }
}

TEST_CASE("plateau counters reset on improvement") {
  PlateauScheduler sched(12, 8);
  sched.observe(1.0);
  for (int bad = 1; bad <= 7; ++bad) CHECK(!sched.observe(1.0).reduce_lr);
  CHECK(sched.observe(0.5).improved);  // resets both counters
  for (int bad = 1; bad <= 7; ++bad) {
    const auto d = sched.observe(0.5);
    CHECK(!d.reduce_lr);
    CHECK(!d.stop);
  }
  CHECK(sched.observe(0.5).reduce_lr);  // 8th bad epoch after the reset
}

TEST_CASE("lr reduction repeats every patience epochs on a long plateau") {
  PlateauScheduler sched(100, 8);
  sched.observe(1.0);
  int reductions = 0;
  for (int bad = 1; bad <= 24; ++bad)
    if (sched.observe(1.0).reduce_lr) ++reductions;
  CHECK(reductions == 3);  // epochs 8, 16, 24
}

TEST_CASE("training refuses untrainable models") {
  Fixture fx("refuse");
  Dataset train(fx.corpus, fx.manifest, Split::kTrain);
  Dataset val(fx.corpus, fx.manifest, Split::kValidation);
  auto model = make_model("persistence", NetConfig{});
  TrainConfig tc;
  CHECK_THROWS_AS(train_model(*model, train, val, tc), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with the batch position") {
  Fixture fx("nan");
  Dataset train(fx.corpus, fx.manifest, Split::kTrain);
  Dataset val(fx.corpus, fx.manifest, Split::kValidation);
  NetConfig nc;
  nc.seed = 1;
  auto model = make_model("smaat_unet", nc);
  TrainConfig tc;
  tc.learning_rate = 1e12;  // guaranteed divergence
  tc.max_epochs = 5;
  tc.batch_size = 8;
  CHECK_THROWS_WITH_AS(train_model(*model, train, val, tc),
                       doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("checkpoints round-trip the model bit-exactly") {
  Fixture fx("ckpt");
  Dataset train(fx.corpus, fx.manifest, Split::kTrain);
  Dataset val(fx.corpus, fx.manifest, Split::kValidation);
  NetConfig nc;
  nc.seed = 5;
  auto model = make_model("smaat_unet", nc);

  TrainConfig tc;
  tc.max_epochs = 1;
  tc.seed = 5;
  tc.config_hash = 0xabcdef12u;
  tc.checkpoint_path = fx.dir + "/model.ckpt";
  train_model(*model, train, val, tc);

  auto fresh = make_model("smaat_unet", NetConfig{});
  const CheckpointMeta meta = load_checkpoint(tc.checkpoint_path, *fresh, nullptr);
  CHECK(meta.config_hash == 0xabcdef12u);
  CHECK(meta.epoch == 1);
  CHECK(peek_checkpoint_hash(tc.checkpoint_path) == 0xabcdef12u);

  const auto pa = model->params(), pb = fresh->params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    CHECK((pa[i]->value.flat() == pb[i]->value.flat()).all());
  const auto ba = model->buffers(), bb = fresh->buffers();
  REQUIRE(ba.size() == bb.size());
  for (size_t i = 0; i < ba.size(); ++i)
    CHECK((ba[i]->value.flat() == bb[i]->value.flat()).all());

  // a different architecture refuses the file
  auto wrong = make_model("smaat_fusion", NetConfig{});
  CHECK_THROWS_AS(load_checkpoint(tc.checkpoint_path, *wrong, nullptr),
                  std::runtime_error);
}

TEST_CASE("resumed training replays the original schedule") {
  Fixture fx("resume");
  Dataset train(fx.corpus, fx.manifest, Split::kTrain);
  Dataset val(fx.corpus, fx.manifest, Split::kValidation);

  TrainConfig tc;
  tc.seed = 11;
  tc.max_epochs = 3;
  tc.batch_size = 8;

  // straight-through run
  NetConfig nc;
  nc.seed = 11;
  auto straight = make_model("smaat_unet", nc);
  tc.checkpoint_path = fx.dir + "/straight.ckpt";
  const TrainResult ra = train_model(*straight, train, val, tc);

  // interrupted after 2 epochs, then resumed
  auto interrupted = make_model("smaat_unet", nc);
  tc.checkpoint_path = fx.dir + "/resumed.ckpt";
  tc.max_epochs = 2;
  train_model(*interrupted, train, val, tc);
  auto resumed = make_model("smaat_unet", nc);
  tc.max_epochs = 3;
  const TrainResult rb = train_model(*resumed, train, val, tc, nullptr, true);

  CHECK(ra.best_val_loss == rb.best_val_loss);
  CHECK(slurp(fx.dir + "/straight.ckpt") == slurp(fx.dir + "/resumed.ckpt"));
}

TEST_CASE("history file logs one line per epoch") {
  Fixture fx("history");
  Dataset train(fx.corpus, fx.manifest, Split::kTrain);
  Dataset val(fx.corpus, fx.manifest, Split::kValidation);
  NetConfig nc;
  nc.seed = 2;
  auto model = make_model("smaat_unet", nc);
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.history_path = fx.dir + "/history.txt";
  const TrainResult r = train_model(*model, train, val, tc);
  CHECK(r.epochs_run == 2);
  const std::string hist = slurp(tc.history_path);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 2);
  CHECK(hist.find("epoch 1 ") != std::string::npos);
  CHECK(hist.find("val ") != std::string::npos);
}
