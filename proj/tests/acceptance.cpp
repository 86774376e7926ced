// Acceptance gate: ten checks covering gradient integrity, closed-form
// identities, the shape schedule, metric parity, and scaled training
// experiments. Each check prints one [PASS]/[FAIL] line with its key
// numbers; the process exits nonzero if any check fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bbs/bench.hpp"
#include "bbs/dem.hpp"
#include "bbs/model.hpp"
#include "bbs/postproc.hpp"
#include "bbs/trainer.hpp"
#include "oracle_metrics.hpp"
#include "support.hpp"

using namespace bbs;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

io::RgbdSample random_sample(int64_t side, uint64_t seed) {
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

net::ModelConfig toy_config(net::Variant v, int64_t side, uint64_t init_seed) {
  net::ModelConfig cfg;
  cfg.variant = v;
  cfg.side = side;
  cfg.init_seed = init_seed;
  return cfg;
}

// The shared recipe for every scaled training experiment: fixed corpus
// seeds, 500 optimizer steps, and the geometric augmentations on.
train::TrainConfig run_recipe(int64_t side, uint64_t seed, bool augment) {
  train::TrainConfig tc;
  tc.lr = 3e-4;
  tc.epochs = 100000;
  tc.max_iters = 500;
  tc.batch = 2;
  tc.augment = augment;
  tc.seed = seed;
  tc.side = side;
  tc.log_every = 100;
  return tc;
}

struct TrainedRun {
  std::unique_ptr<net::BbsModel> model;
  metrics::MetricReport train_report, test_report;
  bool diverged = false;
};

TrainedRun train_and_eval(net::Variant v, uint64_t seed, bool zero_depth, int64_t side, int n_train,
                          int n_test, bool augment) {
  bench::SynthSpec tr;
  tr.style = "discs";
  tr.n = n_train;
  tr.side = side;
  tr.seed = 21;
  bench::SynthSpec te = tr;
  te.seed = 121;
  te.n = n_test;
  auto train_data = bench::make_corpus(tr);
  auto test_data = bench::make_corpus(te);

  net::ModelConfig mc = toy_config(v, side, seed);
  mc.zero_depth = zero_depth;
  TrainedRun run;
  run.model = std::make_unique<net::BbsModel>(mc);
  train::TrainResult res = train::train(*run.model, train_data, run_recipe(side, seed, augment));
  run.diverged = res.diverged;
  run.train_report = bench::evaluate_model(*run.model, train_data, {}, "train");
  if (n_test > 0) run.test_report = bench::evaluate_model(*run.model, test_data, {}, "test");
  return run;
}

using CheckFn = std::function<bool(std::string&)>;

bool run_check(int number, const char* name, const CheckFn& fn, int& failures) {
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  std::printf("[%s] %2d. %s%s%s\n", ok ? "PASS" : "FAIL", number, name, detail.empty() ? "" : " - ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
  return ok;
}

char buf[512];

// ---------------------------------------------------------------------------

bool check_gradients(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  double worst_module = 0.0;

  {
    nn::ParamStore ps;
    Rng rng(91);
    net::Dem dem(ps, "dem", {4}, 16, 7, true, true, rng);
    Rng drng(92);
    ad::Var rgb = ad::leaf(testsup::random_tensor({4, 5, 5}, drng));
    ad::Var d = ad::leaf(testsup::random_tensor({4, 5, 5}, drng));
    auto res = testsup::check_gradients([&] { return ad::mean_all(ad::sigmoid(dem.fuse(rgb, d, 0))); },
                                        {{"rgb", rgb},
                                         {"d", d},
                                         {"mlp1.w", ps.get("dem.level1.mlp1.w")},
                                         {"mlp2.w", ps.get("dem.level1.mlp2.w")},
                                         {"spatial.w", ps.get("dem.level1.spatial.w")},
                                         {"spatial.b", ps.get("dem.level1.spatial.b")}},
                                        5, drng);
    worst_module = std::max(worst_module, res.max_rel_err);
  }
  {
    nn::ParamStore ps;
    Rng rng(93);
    net::Gcm gcm(ps, "g", 6, rng);
    Rng drng(94);
    ad::Var f = ad::leaf(testsup::random_tensor({6, 8, 8}, drng));
    auto res = testsup::check_gradients([&] { return ad::mean_all(ad::sigmoid(gcm.forward(f))); },
                                        {{"f", f},
                                         {"b2b.w", ps.get("g.b2b.w")},
                                         {"b3c.w", ps.get("g.b3c.w")},
                                         {"b4c.w", ps.get("g.b4c.w")},
                                         {"cat.w", ps.get("g.cat.w")},
                                         {"res.w", ps.get("g.res.w")}},
                                        4, drng);
    worst_module = std::max(worst_module, res.max_rel_err);
  }
  nn::ParamStore dps;
  {
    Rng rng(95);
    net::CascadedDecoder dec(dps, "d", {3, 5, 7}, false, rng);
    Rng drng(96);
    ad::Var f0 = ad::leaf(testsup::random_tensor({32, 8, 8}, drng));
    ad::Var f1 = ad::leaf(testsup::random_tensor({32, 4, 4}, drng));
    ad::Var f2 = ad::leaf(testsup::random_tensor({32, 2, 2}, drng));
    auto loss = [&] {
      auto out = net::pyramid_multiply({f0, f1, f2}, dec.pair_convs);
      ad::Var sum = ad::mean_all(ad::sigmoid(out[0]));
      sum = ad::add(sum, ad::mean_all(ad::sigmoid(out[1])));
      return ad::add(sum, ad::mean_all(ad::sigmoid(out[2])));
    };
    auto res = testsup::check_gradients(loss,
                                        {{"f0", f0},
                                         {"f1", f1},
                                         {"f2", f2},
                                         {"pair0_1.w", dps.get("d.pair0_1.w")},
                                         {"pair0_2.w", dps.get("d.pair0_2.w")},
                                         {"pair1_2.w", dps.get("d.pair1_2.w")}},
                                        4, drng);
    worst_module = std::max(worst_module, res.max_rel_err);

    Rng arng(97);
    ad::Var a0 = ad::leaf(testsup::random_tensor({32, 8, 8}, arng));
    ad::Var a1 = ad::leaf(testsup::random_tensor({32, 4, 4}, arng));
    ad::Var a2 = ad::leaf(testsup::random_tensor({32, 2, 2}, arng));
    auto aloss = [&] {
      return ad::mean_all(ad::sigmoid(net::progressive_aggregate({a0, a1, a2}, dec.up_convs, dec.cat_convs)));
    };
    auto ares = testsup::check_gradients(aloss,
                                         {{"a0", a0},
                                          {"a1", a1},
                                          {"a2", a2},
                                          {"up0.w", dps.get("d.up0.w")},
                                          {"cat0.w", dps.get("d.cat0.w")},
                                          {"up1.w", dps.get("d.up1.w")},
                                          {"cat1.w", dps.get("d.cat1.w")}},
                                         4, arng);
    worst_module = std::max(worst_module, ares.max_rel_err);
  }
  {
    nn::ParamStore ps;
    Rng rng(98);
    net::Ptm ptm(ps, "ptm", rng);
    Rng drng(99);
    ad::Var agg = ad::leaf(testsup::random_tensor({32, 4, 4}, drng));
    auto res = testsup::check_gradients([&] { return ad::mean_all(ad::sigmoid(ptm.logits(agg))); },
                                        {{"agg", agg},
                                         {"pre1.w", ps.get("ptm.pre1.w")},
                                         {"up1.w", ps.get("ptm.up1.w")},
                                         {"up2.b", ps.get("ptm.up2.b")},
                                         {"r3.w", ps.get("ptm.r3.w")}},
                                        5, drng);
    worst_module = std::max(worst_module, res.max_rel_err);
  }

  net::BbsModel model(toy_config(net::Variant::BBS_RL, 32, 5));
  io::RgbdSample s = random_sample(32, 81);
  std::vector<std::pair<std::string, ad::Var>> probes;
  for (const char* name : {"rgb.stage1.conv0.w", "depth.stage5.conv0.w", "dem.level1.mlp2.w",
                           "dem.level5.spatial.w", "decoder1.gcm0.b1.w", "decoder2.cat0.w", "head1.c2.w",
                           "head2.pre1.w", "head2.r3.b"})
    probes.emplace_back(name, model.params().get(name));
  Rng rng(82);
  auto whole = testsup::check_gradients([&] { return model.forward(s, &s.gt).loss; }, probes, 3, rng);

  double elapsed = seconds_since(t0);
  std::snprintf(buf, sizeof buf, "module rel err %.2e (limit 1e-4), whole model %.2e (limit 1e-3), %.0fs",
                worst_module, whole.max_rel_err, elapsed);
  detail = buf;
  return worst_module <= 1e-4 && whole.max_rel_err <= 1e-3 && elapsed < 120.0;
}

bool check_identities(std::string& detail) {
  bool ok = true;

  // a zero initial map must pass the stage-2 features through unchanged and
  // a saturated map must exactly double them
  net::BbsModel model(toy_config(net::Variant::BBS_RL, 64, 5));
  io::RgbdSample s = random_sample(64, 13);
  Tensor zeros = Tensor::zeros({1, 8, 8});
  net::ForwardTrace tz = model.forward(s, nullptr, &zeros);
  for (size_t j = 0; j < tz.stage2_inputs.size(); ++j)
    ok = ok && tz.stage2_inputs[j]->value.data == tz.pyramid[j]->value.data;
  Tensor ones = Tensor::full({1, 8, 8}, 1.0);
  net::ForwardTrace to = model.forward(s, nullptr, &ones);
  for (size_t j = 0; j < to.stage2_inputs.size(); ++j) {
    const auto& base = to.pyramid[j]->value.data;
    const auto& ref = to.stage2_inputs[j]->value.data;
    if (ref.size() != base.size()) return false;
    for (size_t i = 0; i < base.size(); ++i) ok = ok && ref[i] == 2.0 * base[i];
  }

  // fusion must reduce to the rgb feature when the depth feature is zero
  nn::ParamStore ps;
  Rng rng(41);
  net::Dem dem(ps, "dem", {4}, 16, 7, true, true, rng);
  Rng drng(42);
  Tensor rgb = testsup::random_tensor({4, 5, 5}, drng);
  ad::Var fused = dem.fuse(ad::constant(rgb), ad::constant(Tensor::zeros({4, 5, 5})), 0);
  ok = ok && fused->value.data == rgb.data;

  // the joint loss endpoints select exactly one stage
  ok = ok && net::total_loss(0.7, 0.2, 1.0) == 0.7;
  ok = ok && net::total_loss(0.7, 0.2, 0.0) == 0.2;
  ok = ok && net::total_loss(0.31, 0.47, 1.0) == 0.31;
  ok = ok && net::total_loss(0.31, 0.47, 0.0) == 0.47;

  // the coarsest pyramid level passes through the multiplicative stage
  nn::ParamStore dps;
  Rng prng(43);
  net::CascadedDecoder dec(dps, "d", {3, 5}, false, prng);
  Rng frng(44);
  ad::Var f0 = ad::leaf(testsup::random_tensor({32, 4, 4}, frng));
  ad::Var f1 = ad::leaf(testsup::random_tensor({32, 2, 2}, frng));
  auto out = net::pyramid_multiply({f0, f1}, dec.pair_convs);
  ok = ok && out.back()->value.data == f1->value.data;

  detail = "gate identity/doubling, zero-depth fusion, loss endpoints, pyramid pass-through";
  return ok;
}

bool check_shape_schedule(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  net::ModelConfig cfg = toy_config(net::Variant::BBS_RL, 352, 5);
  cfg.backbone.kind = "full";
  net::BbsModel model(cfg);
  io::RgbdSample s = random_sample(352, 7);
  net::ForwardTrace tr = model.forward(s, nullptr);

  const int64_t sides[5] = {88, 88, 44, 22, 11};
  bool ok = true;
  for (int i = 0; i < 5; ++i) {
    const Tensor& t = tr.pyramid[static_cast<size_t>(i)]->value;
    ok = ok && t.rank() == 3 && t.dim(1) == sides[i] && t.dim(2) == sides[i];
  }
  ok = ok && tr.agg2->value.dim(1) == 88 && tr.agg2->value.dim(2) == 88;
  ok = ok && tr.s2_native->value.shape == std::vector<int64_t>{1, 352, 352};
  ok = ok && tr.s2->value.shape == std::vector<int64_t>{1, 352, 352};

  std::snprintf(buf, sizeof buf, "pyramid sides 88/88/44/22/11, native map %lld, output %lld, %.0fs",
                static_cast<long long>(tr.agg2->value.dim(1)),
                static_cast<long long>(tr.s2->value.dim(1)), seconds_since(t0));
  detail = buf;
  return ok;
}

bool check_metric_parity(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(301);
  bool ok = true;

  std::vector<Tensor> preds, gts;
  double worst_mae = 0.0;
  for (int i = 0; i < 200; ++i) {
    int64_t h = static_cast<int64_t>(rng.uniform_int(8, 16));
    int64_t w = static_cast<int64_t>(rng.uniform_int(8, 16));
    Tensor p = testsup::random_tensor({1, h, w}, rng, 0.0, 1.0);
    Tensor g({1, h, w});
    for (double& v : g.data) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    worst_mae = std::max(worst_mae, std::fabs(metrics::mae(p, g) - oracle::mae(p, g)));
    preds.push_back(std::move(p));
    gts.push_back(std::move(g));
  }
  ok = ok && worst_mae <= 1e-12;

  metrics::MetricReport rep = metrics::evaluate_dataset(preds, gts);
  ok = ok && std::fabs(rep.max_f - oracle::max_f(preds, gts, true, 0.3)) <= 1e-10;
  ok = ok && std::fabs(rep.max_e - oracle::max_e(preds, gts, true)) <= 1e-10;
  auto pr = oracle::pr_curve(preds, gts, true);
  for (size_t k = 0; k < 256; ++k) {
    ok = ok && std::fabs(rep.curves.precision[k] - pr[k].precision) <= 1e-10;
    ok = ok && std::fabs(rep.curves.recall[k] - pr[k].recall) <= 1e-10;
  }

  double worst_s = 0.0;
  for (int i = 0; i < 100; ++i) {
    Tensor p = testsup::random_tensor({1, 12, 12}, rng, 0.0, 1.0);
    Tensor g({1, 12, 12});
    for (double& v : g.data) v = rng.uniform() < 0.35 ? 1.0 : 0.0;
    worst_s = std::max(worst_s, std::fabs(metrics::s_measure(p, g, 0.5) - oracle::s_measure(p, g, 0.5)));
  }
  ok = ok && worst_s <= 1e-6;

  int otsu_mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    Tensor m({1, 10, 10});
    double lo = rng.uniform(0.05, 0.35), hi = rng.uniform(0.55, 0.95);
    for (double& v : m.data) v = std::clamp((rng.uniform() < 0.5 ? lo : hi) + rng.uniform(-0.1, 0.1), 0.0, 1.0);
    int bin = static_cast<int>(std::lround(postproc::otsu_threshold(m).threshold * 255.0));
    if (bin != oracle::otsu_threshold_bin(m)) ++otsu_mismatches;
  }
  ok = ok && otsu_mismatches == 0;

  double elapsed = seconds_since(t0);
  std::snprintf(buf, sizeof buf,
                "mae err %.1e, curve err <=1e-10, structure err %.1e, otsu mismatches %d, %.0fs",
                worst_mae, worst_s, otsu_mismatches, elapsed);
  detail = buf;
  return ok && elapsed < 60.0;
}

std::unique_ptr<net::BbsModel> overfit_model;
std::vector<io::RgbdSample> overfit_data;

bool check_overfit(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  bench::SynthSpec spec;
  spec.style = "discs";
  spec.n = 8;
  spec.side = 32;
  spec.seed = 21;
  overfit_data = bench::make_corpus(spec);

  overfit_model = std::make_unique<net::BbsModel>(toy_config(net::Variant::BBS_RL, 32, 1));
  train::TrainResult res = train::train(*overfit_model, overfit_data, run_recipe(32, 1, false));
  metrics::MetricReport rep = bench::evaluate_model(*overfit_model, overfit_data, {}, "train");

  double elapsed = seconds_since(t0);
  std::snprintf(buf, sizeof buf, "8 pairs, %lld iterations, max-F %.4f (need >=0.95), MAE %.4f (need <=0.05), %.0fs",
                static_cast<long long>(res.iters), rep.max_f, rep.mae, elapsed);
  detail = buf;
  return !res.diverged && rep.max_f >= 0.95 && rep.mae <= 0.05 && elapsed < 300.0;
}

bool check_ablation_ordering(std::string& detail) {
  int rl_ge_norf = 0, rl_ge_low3 = 0;
  double mean_rl = 0.0, mean_norf = 0.0, mean_low3 = 0.0;
  std::string per_seed;
  for (uint64_t seed : {1, 2, 3}) {
    double rl = train_and_eval(net::Variant::BBS_RL, seed, false, 64, 32, 24, true).test_report.max_f;
    double norf = train_and_eval(net::Variant::BBS_NoRF, seed, false, 64, 32, 24, true).test_report.max_f;
    double low3 = train_and_eval(net::Variant::Low3, seed, false, 64, 32, 24, true).test_report.max_f;
    if (rl >= norf) ++rl_ge_norf;
    if (rl >= low3) ++rl_ge_low3;
    mean_rl += rl / 3.0;
    mean_norf += norf / 3.0;
    mean_low3 += low3 / 3.0;
    std::snprintf(buf, sizeof buf, " s%llu[%.4f/%.4f/%.4f]", static_cast<unsigned long long>(seed), rl,
                  norf, low3);
    per_seed += buf;
  }
  std::snprintf(buf, sizeof buf,
                "max-F means full/no-gate/low-levels %.4f/%.4f/%.4f,%s, orderings %d/3 and %d/3 (need >=2)",
                mean_rl, mean_norf, mean_low3, per_seed.c_str(), rl_ge_norf, rl_ge_low3);
  detail = buf;
  return rl_ge_norf >= 2 && rl_ge_low3 >= 2;
}

bool check_parameter_budget(std::string& detail) {
  net::ModelConfig full_cfg = toy_config(net::Variant::BBS_RL, 352, 1);
  full_cfg.backbone.kind = "full";
  int64_t full_n = net::BbsModel(full_cfg).param_count();

  net::ModelConfig eff_cfg = toy_config(net::Variant::Efficient, 352, 1);
  eff_cfg.backbone.kind = "full";
  int64_t eff_n = net::BbsModel(eff_cfg).param_count();

  double full_dev = std::fabs(static_cast<double>(full_n) - 49.77e6) / 49.77e6;
  double eff_dev = std::fabs(static_cast<double>(eff_n) - 25.96e6) / 25.96e6;
  double ratio = static_cast<double>(eff_n) / static_cast<double>(full_n);

  std::snprintf(buf, sizeof buf,
                "full %lld (dev %.1f%%, limit 15%%), efficient %lld (dev %.1f%%), ratio %.3f (limit 0.60)",
                static_cast<long long>(full_n), full_dev * 100.0, static_cast<long long>(eff_n),
                eff_dev * 100.0, ratio);
  detail = buf;
  return full_dev <= 0.15 && eff_dev <= 0.15 && ratio <= 0.60;
}

bool check_depth_utility(std::string& detail) {
  int wins = 0;
  std::string per_seed;
  for (uint64_t seed : {1, 2, 3}) {
    double with_d = train_and_eval(net::Variant::BBS_RL, seed, false, 32, 16, 12, false).test_report.s_alpha;
    double without_d = train_and_eval(net::Variant::BBS_RL, seed, true, 32, 16, 12, false).test_report.s_alpha;
    if (with_d > without_d) ++wins;
    std::snprintf(buf, sizeof buf, " s%llu[%.4f vs %.4f]", static_cast<unsigned long long>(seed), with_d,
                  without_d);
    per_seed += buf;
  }
  std::snprintf(buf, sizeof buf, "structure measure with vs without depth:%s, wins %d/3 (need >=2)",
                per_seed.c_str(), wins);
  detail = buf;
  return wins >= 2;
}

bool check_cross_corpus(std::string& detail) {
  bench::SynthSpec discs_tr{"discs", 16, 32, 21, true, 1};
  bench::SynthSpec rects_tr{"rects", 16, 32, 22, true, 1};
  bench::SynthSpec discs_te{"discs", 12, 32, 121, true, 1};
  bench::SynthSpec rects_te{"rects", 12, 32, 122, true, 1};

  bench::BenchConfig bc;
  bc.model = toy_config(net::Variant::BBS_RL, 32, 1);
  bc.train = run_recipe(32, 1, false);
  bench::GeneralizationGrid grid = bench::run_grid(
      {{"discs", bench::make_corpus(discs_tr)}, {"rects", bench::make_corpus(rects_tr)}},
      {{"discs", bench::make_corpus(discs_te)}, {"rects", bench::make_corpus(rects_te)}}, bc);

  bool diag = !grid.rows[0].failed && !grid.rows[1].failed &&
              grid.rows[0].cells[0].s_alpha > grid.rows[0].cells[1].s_alpha &&
              grid.rows[1].cells[1].s_alpha > grid.rows[1].cells[0].s_alpha;

  std::string drop = bench::format_drop_percent(bench::drop_of(0.902, 0.810));
  bool arithmetic = drop == "10.2%";

  std::snprintf(buf, sizeof buf,
                "grid [%.3f %.3f; %.3f %.3f] diagonal %s, published-row drop %s (want 10.2%%)",
                grid.rows[0].cells[0].s_alpha, grid.rows[0].cells[1].s_alpha,
                grid.rows[1].cells[0].s_alpha, grid.rows[1].cells[1].s_alpha,
                diag ? "dominant" : "violated", drop.c_str());
  detail = buf;
  return diag && arithmetic;
}

bool check_postprocessing(std::string& detail) {
  if (!overfit_model || overfit_data.empty()) {
    detail = "overfit model unavailable (check 5 must run first)";
    return false;
  }
  int improved = 0;
  int total = static_cast<int>(overfit_data.size());
  for (const io::RgbdSample& s : overfit_data) {
    Tensor raw = overfit_model->infer(s).s2;
    double mae_raw = metrics::mae(raw, s.gt);
    double mae_otsu = metrics::mae(postproc::otsu_threshold(raw).mask, s.gt);
    if (mae_otsu < mae_raw) ++improved;
  }
  bool otsu_ok = improved * 5 >= total * 4;

  Tensor plain({1, 2, 2});
  plain.data = {0.125, 0.25, 0.375, 0.75};
  postproc::BinarizedMap low = postproc::adaptive_threshold(plain);
  bool adp_ok = low.threshold == 0.75 && low.mask.data == std::vector<double>{0, 0, 0, 1};

  Tensor bright({1, 2, 2});
  bright.data = {0.9, 0.9, 0.8, 1.0};
  postproc::BinarizedMap clamped = postproc::adaptive_threshold(bright);
  bool clamp_ok = clamped.threshold == 1.0 - 1.0 / 255.0 &&
                  clamped.mask.data == std::vector<double>{0, 0, 0, 1};

  std::snprintf(buf, sizeof buf, "otsu improves MAE on %d/%d maps (need >=80%%), closed-form thresholds %s",
                improved, total, adp_ok && clamp_ok ? "exact" : "WRONG");
  detail = buf;
  return otsu_ok && adp_ok && clamp_ok;
}

}  // namespace

int main() {
  int failures = 0;
  run_check(1, "gradient integrity", check_gradients, failures);
  run_check(2, "closed-form identities", check_identities, failures);
  run_check(3, "full-scale shape schedule", check_shape_schedule, failures);
  run_check(4, "metric oracle parity", check_metric_parity, failures);
  run_check(5, "overfit convergence", check_overfit, failures);
  run_check(6, "ablation ordering", check_ablation_ordering, failures);
  run_check(7, "parameter budget", check_parameter_budget, failures);
  run_check(8, "depth utility", check_depth_utility, failures);
  run_check(9, "cross-corpus generalization", check_cross_corpus, failures);
  run_check(10, "post-processing", check_postprocessing, failures);

  std::printf("acceptance: %d/10 passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
