#include "nowcast/models.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nowcast;

namespace {

Tensor random_tensor(std::vector<Index> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (Index i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

ForwardBatch tiny_batch(std::uint64_t seed) {
  ForwardBatch b;
  b.precip = random_tensor({1, kNumLags, kGridSize, kGridSize}, seed);
  b.station = random_tensor({1, kNumStations, kNumVariables, kNumLags}, seed + 1);
  b.krige = random_tensor({1, kNumLags * kNumVariables, kGridSize, kGridSize}, seed + 2);
  b.target = random_tensor({1, 1, kGridSize, kGridSize}, seed + 3);
  return b;
}

}  // namespace

TEST_CASE("parameter counts sit inside the architecture budgets") {
  NetConfig cfg;
  struct Budget {
    const char* name;
    double target;
  };
  for (const Budget b : {Budget{"smaat_unet", 4.0e6}, Budget{"smaat_fusion", 5.6e6},
                         Budget{"smaat_krige_gnet", 11.6e6}}) {
    auto model = make_model(b.name, cfg);
    const double count = static_cast<double>(parameter_count(*model));
    CAPTURE(b.name);
    CAPTURE(count);
    CHECK(std::abs(count - b.target) / b.target <= 0.15);
  }
  auto persistence = make_model("persistence", cfg);
  CHECK(parameter_count(*persistence) == 0);
  CHECK(!persistence->trainable());
}

TEST_CASE("all forwards produce (B,1,64,64)") {
  NetConfig cfg;
  const ForwardBatch b = tiny_batch(5);
  for (const char* name :
       {"smaat_unet", "smaat_fusion", "smaat_krige_gnet", "persistence"}) {
    auto model = make_model(name, cfg);
    CAPTURE(name);
    const Tensor y = model->forward(b, false);
    CHECK(y.shape() == std::vector<Index>{1, 1, kGridSize, kGridSize});
    CHECK(y.flat().isFinite().all());
  }
}

TEST_CASE("initialization is deterministic in the seed") {
  NetConfig a;
  a.seed = 3;
  NetConfig b = a;
  NetConfig c = a;
  c.seed = 4;
  auto ma = make_model("smaat_unet", a);
  auto mb = make_model("smaat_unet", b);
  auto mc = make_model("smaat_unet", c);
  const auto pa = ma->params(), pb = mb->params(), pc = mc->params();
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true, any_differs = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (!(pa[i]->value.flat() == pb[i]->value.flat()).all()) all_equal = false;
    if (!(pa[i]->value.flat() == pc[i]->value.flat()).all()) any_differs = true;
  }
  CHECK(all_equal);
  CHECK(any_differs);
}

TEST_CASE("persistence copies the last input frame") {
  NetConfig cfg;
  auto model = make_model("persistence", cfg);
  const ForwardBatch b = tiny_batch(9);
  const Tensor y = model->forward(b, false);
  const Index pix = kGridSize * kGridSize;
  for (Index i = 0; i < pix; ++i)
    CHECK(y[i] == b.precip[(kNumLags - 1) * pix + i]);

  // gradient routes straight back to that frame
  Tensor gy({1, 1, kGridSize, kGridSize});
  gy.flat().setConstant(1.0f);
  model->backward(gy);
  const Tensor& gx = model->input_gradients().precip;
  REQUIRE(gx.shape() == b.precip.shape());
  CHECK(gx[(kNumLags - 1) * pix] == 1.0f);
  CHECK(gx[0] == 0.0f);
}

TEST_CASE("unknown model names are rejected") {
  CHECK_THROWS_AS(make_model("voodoo_net", NetConfig{}), std::invalid_argument);
}

TEST_CASE("input shape validation") {
  NetConfig cfg;
  auto model = make_model("smaat_unet", cfg);
  ForwardBatch bad;
  bad.precip = random_tensor({1, 3, kGridSize, kGridSize}, 2);
  CHECK_THROWS_AS(model->forward(bad, false), std::invalid_argument);
}

TEST_CASE("backward fills input gradients of matching shapes") {
  NetConfig cfg;
  const ForwardBatch b = tiny_batch(31);
  Tensor gy({1, 1, kGridSize, kGridSize});
  gy.flat().setConstant(1.0f);

  auto fusion = make_model("smaat_fusion", cfg);
  fusion->forward(b, true);
  fusion->backward(gy);
  CHECK(fusion->input_gradients().precip.shape() == b.precip.shape());
  CHECK(fusion->input_gradients().station.shape() == b.station.shape());

  auto gnet = make_model("smaat_krige_gnet", cfg);
  gnet->forward(b, true);
  gnet->backward(gy);
  CHECK(gnet->input_gradients().precip.shape() == b.precip.shape());
  CHECK(gnet->input_gradients().krige.shape() == b.krige.shape());
}

TEST_CASE("describe reports the frozen configuration") {
  NetConfig cfg;
  const std::string text = cfg.describe();
  CHECK(text.find("base_channels = 64") != std::string::npos);
  CHECK(text.find("attention_reduction = 16") != std::string::npos);
  CHECK(text.find("station_channels = 448") != std::string::npos);
}
