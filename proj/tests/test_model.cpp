#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bbs/checkpoint.hpp"
#include "bbs/model.hpp"
#include "support.hpp"

using namespace bbs;
using net::BbsModel;
using net::ModelConfig;
using net::Variant;

namespace {

io::RgbdSample make_sample(int64_t side, uint64_t seed) {
  Rng rng(seed);
  io::RgbdSample s;
  s.id = "synthetic";
  s.rgb = testsup::random_tensor({3, side, side}, rng, 0.0, 1.0);
  s.depth = testsup::random_tensor({1, side, side}, rng, 0.0, 1.0);
  s.gt = Tensor::zeros({1, side, side});
  for (int64_t y = side / 4; y < 3 * side / 4; ++y)
    for (int64_t x = side / 4; x < 3 * side / 4; ++x) s.gt.at(0, y, x) = 1.0;
  return s;
}

ModelConfig toy_config(Variant v, int64_t side = 32) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.side = side;
  cfg.init_seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("variant names round-trip and unknown names are rejected") {
  for (Variant v : net::all_variants()) CHECK(net::variant_from_string(net::to_string(v)) == v);
  CHECK(net::all_variants().size() == 11);
  CHECK_THROWS_AS(net::variant_from_string("BBS_XXL"), std::invalid_argument);
}

TEST_CASE("every variant builds, trains a step of gradients, and emits unit-interval maps") {
  io::RgbdSample s = make_sample(32, 77);
  for (Variant v : net::all_variants()) {
    CAPTURE(net::to_string(v));
    BbsModel model(toy_config(v));
    CHECK(model.param_count() > 0);

    net::ForwardTrace tr = model.forward(s, &s.gt);
    REQUIRE(tr.s2);
    CHECK(tr.s2->value.shape == std::vector<int64_t>{1, 32, 32});
    for (double p : tr.s2->value.data) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
    CHECK(static_cast<bool>(tr.s1) == model.has_stage1());
    if (tr.s1) CHECK(tr.s1->value.shape == std::vector<int64_t>{1, 32, 32});

    REQUIRE(tr.loss);
    CHECK(std::isfinite(tr.loss->value.data[0]));
    ad::backward(tr.loss);

    double depth_grad = 0.0, decoder_grad = 0.0, head_grad = 0.0;
    for (const auto& [name, p] : model.params().items()) {
      if (!p->grad.data.empty()) CHECK(std::isfinite(p->grad.abs_max()));
      double g = p->grad.data.empty() ? 0.0 : p->grad.abs_max();
      if (name.rfind("rgb.", 0) == 0 || name.rfind("depth.", 0) == 0) depth_grad = std::max(depth_grad, g);
      if (name.rfind("decoder2.", 0) == 0) decoder_grad = std::max(decoder_grad, g);
      if (name.rfind("head2.", 0) == 0) head_grad = std::max(head_grad, g);
    }
    CHECK(depth_grad > 0.0);
    CHECK(decoder_grad > 0.0);
    CHECK(head_grad > 0.0);

    net::BbsOutputs out = model.infer(s);
    CHECK(out.s2.shape == std::vector<int64_t>{1, 32, 32});
    CHECK(out.s1.data.empty() == !model.has_stage1());
  }
}

TEST_CASE("refinement is exact: a zero gate passes features, a unit gate doubles them") {
  BbsModel model(toy_config(Variant::BBS_RL, 64));
  io::RgbdSample s = make_sample(64, 13);

  Tensor zeros = Tensor::zeros({1, 8, 8});
  net::ForwardTrace tz = model.forward(s, nullptr, &zeros);
  const size_t stage2[] = {0, 1, 2};
  REQUIRE(tz.stage2_inputs.size() == 3);
  for (size_t j = 0; j < 3; ++j)
    CHECK(tz.stage2_inputs[j]->value.data == tz.pyramid[stage2[j]]->value.data);

  Tensor ones = Tensor::full({1, 8, 8}, 1.0);
  net::ForwardTrace to = model.forward(s, nullptr, &ones);
  for (size_t j = 0; j < 3; ++j) {
    const auto& base = to.pyramid[stage2[j]]->value.data;
    const auto& ref = to.stage2_inputs[j]->value.data;
    REQUIRE(ref.size() == base.size());
    for (size_t i = 0; i < base.size(); ++i) CHECK(ref[i] == 2.0 * base[i]);
  }
}

TEST_CASE("without refinement the stage-one head cannot influence the final map") {
  io::RgbdSample s = make_sample(32, 21);
  auto s2_after_head_poke = [&](Variant v) {
    BbsModel model(toy_config(v));
    Tensor before = model.infer(s).s2;
    for (double& w : model.params().get("head1.c2.w")->value.data) w += 0.8;
    Tensor after = model.infer(s).s2;
    double diff = 0.0;
    for (size_t i = 0; i < before.data.size(); ++i)
      diff = std::max(diff, std::abs(before.data[i] - after.data[i]));
    return diff;
  };
  CHECK(s2_after_head_poke(Variant::BBS_NoRF) == 0.0);
  CHECK(s2_after_head_poke(Variant::BBS_RL) > 0.0);
}

TEST_CASE("the joint loss blends the two stages by alpha") {
  CHECK(net::total_loss(0.4, 0.2, 0.5) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(net::total_loss(0.7, 0.2, 1.0) == 0.7);
  CHECK(net::total_loss(0.7, 0.2, 0.0) == 0.2);
  CHECK_THROWS_AS(net::total_loss(0.1, 0.1, 1.5), std::invalid_argument);

  io::RgbdSample s = make_sample(32, 31);
  BbsModel two(toy_config(Variant::BBS_RL));
  net::ForwardTrace tr = two.forward(s, &s.gt);
  double l1 = tr.loss_s1->value.data[0], l2 = tr.loss_s2->value.data[0];
  CHECK(tr.loss->value.data[0] ==
        doctest::Approx(net::total_loss(l1, l2, two.config().loss_alpha)).epsilon(1e-14));

  BbsModel single(toy_config(Variant::Low3));
  net::ForwardTrace ts = single.forward(s, &s.gt);
  CHECK(ts.loss_s1->value.data[0] == 0.0);
  CHECK(ts.loss.get() == ts.loss_s2.get());
}

TEST_CASE("the pixel loss matches a direct loop and behaves at the endpoints") {
  Rng rng(41);
  Tensor pred = testsup::random_tensor({1, 4, 4}, rng, 0.01, 0.99);
  Tensor gt = Tensor::zeros({1, 4, 4});
  for (size_t i = 0; i < gt.data.size(); ++i) gt.data[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;

  double want = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    double p = std::clamp(pred.data[i], 1e-7, 1.0 - 1e-7);
    want -= gt.data[i] * std::log(p) + (1.0 - gt.data[i]) * std::log(1.0 - p);
  }
  want /= static_cast<double>(pred.data.size());
  CHECK(net::bce(pred, gt, 1e-7) == doctest::Approx(want).epsilon(1e-12));

  CHECK(net::bce(gt, gt, 1e-7) == doctest::Approx(1e-7).epsilon(1e-3));
  Tensor half = Tensor::full({1, 4, 4}, 0.5);
  CHECK(net::bce(half, gt, 1e-7) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("the efficient variant runs one backbone over both modalities") {
  BbsModel model(toy_config(Variant::Efficient));
  CHECK(model.rgb_backbone() == model.depth_backbone());
  bool has_depth_prefix = false, has_dam = false;
  for (const auto& [name, p] : model.params().items()) {
    if (name.rfind("depth.", 0) == 0) has_depth_prefix = true;
    if (name.rfind("dam.", 0) == 0) has_dam = true;
  }
  CHECK_FALSE(has_depth_prefix);
  CHECK(has_dam);

  io::RgbdSample s = make_sample(32, 51);
  Tensor base = model.infer(s).s2;
  s.depth.fill(0.25);
  Tensor moved = model.infer(s).s2;
  double diff = 0.0;
  for (size_t i = 0; i < base.data.size(); ++i)
    diff = std::max(diff, std::abs(base.data[i] - moved.data[i]));
  CHECK(diff > 0.0);
}

TEST_CASE("a depth-blind model carries no depth parameters and ignores the depth map") {
  ModelConfig cfg = toy_config(Variant::BBS_RL);
  cfg.zero_depth = true;
  BbsModel model(cfg);
  for (const auto& [name, p] : model.params().items()) {
    CHECK(name.rfind("depth.", 0) != 0);
    CHECK(name.rfind("dem.", 0) != 0);
    CHECK(name.rfind("dam.", 0) != 0);
  }
  CHECK(model.depth_backbone() == nullptr);

  io::RgbdSample s = make_sample(32, 61);
  Tensor a = model.infer(s).s2;
  s.depth.fill(0.9);
  Tensor b = model.infer(s).s2;
  CHECK(a.data == b.data);
}

TEST_CASE("full-scale parameter budgets match the frozen totals") {
  {
    ModelConfig cfg = toy_config(Variant::BBS_RL);
    cfg.backbone.kind = "full";
    BbsModel model(cfg);
    CHECK(model.param_count() == 49'520'208);
  }
  {
    ModelConfig cfg = toy_config(Variant::Efficient);
    cfg.backbone.kind = "full";
    BbsModel model(cfg);
    CHECK(model.param_count() == 26'000'788);
    CHECK(static_cast<double>(model.param_count()) / 49'520'208.0 < 0.60);
  }
}

TEST_CASE("checkpoints restore bit-identical behavior") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / ("bbs_model_ckpt_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::string path = (dir / "m.bbs").string();

  BbsModel model(toy_config(Variant::BBS_RL));
  io::RgbdSample s = make_sample(32, 71);
  Tensor before = model.infer(s).s2;

  ckpt::CheckpointMeta meta;
  meta.variant = "BBS_RL";
  meta.side = 32;
  ckpt::save_checkpoint(path, ckpt::snapshot(model.params(), meta));

  for (const auto& [name, p] : model.params().items())
    for (double& v : p->value.data) v += 0.05;
  Tensor mutated = model.infer(s).s2;
  CHECK(mutated.data != before.data);

  ckpt::Checkpoint c = ckpt::load_checkpoint(path);
  CHECK(c.meta.variant == "BBS_RL");
  ckpt::fill_param_store(c, model.params());
  Tensor after = model.infer(s).s2;
  CHECK(after.data == before.data);

  std::ofstream bad(dir / "bad.bbs", std::ios::binary);
  bad << "BBSCKPT\nxxxx";
  bad.close();
  CHECK_THROWS_WITH_AS(ckpt::load_checkpoint((dir / "bad.bbs").string()), doctest::Contains("schema"),
                       ckpt::CheckpointError);
  fs::remove_all(dir);
}

TEST_CASE("whole-model gradients agree with finite differences") {
  BbsModel model(toy_config(Variant::BBS_RL));
  io::RgbdSample s = make_sample(32, 81);
  auto loss = [&] { return model.forward(s, &s.gt).loss; };

  std::vector<std::pair<std::string, ad::Var>> probes;
  for (const char* name : {"rgb.stage1.conv0.w", "depth.stage5.conv0.w", "dem.level1.mlp2.w",
                           "dem.level5.spatial.w", "decoder1.gcm0.b1.w", "decoder2.cat0.w", "head1.c2.w",
                           "head2.pre1.w", "head2.r3.b"})
    probes.emplace_back(name, model.params().get(name));

  Rng rng(82);
  auto res = testsup::check_gradients(loss, probes, 3, rng);
  CHECK(res.max_rel_err < 1e-3);
}
