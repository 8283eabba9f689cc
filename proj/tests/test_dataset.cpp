#include "nowcast/dataset.hpp"

#include "helpers.hpp"
#include "nowcast/krige_cache.hpp"

#include <doctest.h>

#include <filesystem>

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
  const fs::path p =
      fs::temp_directory_path() / (std::string("nowcast_ds_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("batches materialize the requested modalities") {
  const std::string dir = temp_dir("batch");
  testutil::write_static_corpus(dir, 1, 1, 36);
  ManifestConfig mc;
  mc.seed = 7;
  const DatasetManifest manifest = build_manifest(dir, mc);
  const Corpus corpus = Corpus::load(dir);

  Dataset train(corpus, manifest, Split::kTrain);
  REQUIRE(train.size() >= 2);
  const ForwardBatch b = train.batch({0, 1}, true, false);
  CHECK(b.precip.shape() ==
        std::vector<Index>{2, kNumLags, kGridSize, kGridSize});
  CHECK(b.target.shape() == std::vector<Index>{2, 1, kGridSize, kGridSize});
  CHECK(b.station.shape() ==
        std::vector<Index>{2, kNumStations, kNumVariables, kNumLags});
  CHECK(b.krige.empty());

  // static corpus: the target equals the last input frame exactly
  const Index pix = kGridSize * kGridSize;
  for (Index i = 0; i < pix; ++i)
    CHECK(b.target[i] == b.precip[(kNumLags - 1) * pix + i]);

  CHECK_THROWS_AS(train.batch({}, false, false), std::invalid_argument);
}

TEST_CASE("krige stacks flatten lag-major and hit the cache") {
  const std::string dir = temp_dir("krige");
  testutil::write_static_corpus(dir, 1, 1, 36);
  ManifestConfig mc;
  mc.seed = 7;
  const DatasetManifest manifest = build_manifest(dir, mc);
  const Corpus corpus = Corpus::load(dir);

  KrigeCache cache(dir + "/cache", 0x1234u);
  Dataset train(corpus, manifest, Split::kTrain, &cache);

  const Tensor s0 = train.krige_stack(0);
  CHECK(s0.shape() ==
        std::vector<Index>{kNumLags * kNumVariables, kGridSize, kGridSize});
  CHECK(s0.flat().isFinite().all());

  // second call must come from the cache, bit-identical
  const Tensor s1 = train.krige_stack(0);
  CHECK((s0.flat() == s1.flat()).all());
  CHECK(fs::exists(cache.path_for(train.samples()[0].id)));

  // a cache written under another config hash is ignored
  KrigeCache stale(dir + "/cache", 0x9999u);
  Tensor out;
  CHECK(!stale.load(train.samples()[0].id, out));

  const ForwardBatch b = train.batch({0}, false, true);
  CHECK(b.krige.shape() ==
        std::vector<Index>{1, kNumLags * kNumVariables, kGridSize, kGridSize});
  CHECK((b.krige.flat() == s0.flat()).all());
}
