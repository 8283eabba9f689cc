#include "nowcast/config.hpp"

#include <doctest.h>

using namespace nowcast;

TEST_CASE("typed getters and setters") {
  KeyValueConfig cfg;
  cfg.set("training.lr", 0.001);
  cfg.set("training.epochs", std::int64_t{200});
  cfg.set_bool("run.deterministic", true);
  cfg.set("model.name", std::string("smaat_unet"));

  CHECK(cfg.get("training.lr", 0.0) == doctest::Approx(0.001));
  CHECK(cfg.get("training.epochs", std::int64_t{0}) == 200);
  CHECK(cfg.get_bool("run.deterministic", false));
  CHECK(cfg.get("model.name", std::string()) == "smaat_unet");
  CHECK(cfg.get("missing.key", std::int64_t{7}) == 7);
  CHECK(!cfg.find("missing.key").has_value());
}

TEST_CASE("serialization is canonical regardless of insertion order") {
  KeyValueConfig a, b;
  a.set("z.last", std::int64_t{1});
  a.set("a.first", std::int64_t{2});
  b.set("a.first", std::int64_t{2});
  b.set("z.last", std::int64_t{1});
  CHECK(a.serialize() == b.serialize());
  CHECK(a.hash() == b.hash());
}

TEST_CASE("parse round-trips serialize") {
  KeyValueConfig cfg;
  cfg.set("krige.bins", std::int64_t{8});
  cfg.set("pipeline.filter_frame", std::string("target"));
  const KeyValueConfig back = KeyValueConfig::parse(cfg.serialize());
  CHECK(back.serialize() == cfg.serialize());
  CHECK(back.hash() == cfg.hash());
}

TEST_CASE("hash changes with any entry change") {
  KeyValueConfig cfg;
  cfg.set("seed", std::int64_t{7});
  const auto h = cfg.hash();
  cfg.set("seed", std::int64_t{8});
  CHECK(cfg.hash() != h);
}

TEST_CASE("overlay lets later entries win") {
  KeyValueConfig base, over;
  base.set("lr", 0.001);
  base.set("epochs", std::int64_t{200});
  over.set("lr", 0.0001);
  base.overlay(over);
  CHECK(base.get("lr", 0.0) == doctest::Approx(0.0001));
  CHECK(base.get("epochs", std::int64_t{0}) == 200);
}

TEST_CASE("fnv1a matches the reference constants") {
  // offset basis for empty input; "a" from the published test vectors
  CHECK(fnv1a(nullptr, 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}
