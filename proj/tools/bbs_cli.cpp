#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bbs/bench.hpp"
#include "bbs/checkpoint.hpp"
#include "bbs/config.hpp"
#include "bbs/data_io.hpp"
#include "bbs/metrics.hpp"
#include "bbs/model.hpp"
#include "bbs/postproc.hpp"
#include "bbs/trainer.hpp"

namespace fs = std::filesystem;
using namespace bbs;

namespace {

cfg::Config load_cli_config(const std::string& path) {
  cfg::Config c = cfg::load_config_file(path);
  cfg::validate_keys(c);
  std::vector<std::string> warnings;
  cfg::apply_env_overrides(c, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return c;
}

void set_default(cfg::Config& c, const std::string& key, const std::string& val) {
  if (!c.has(key)) c.values[key] = val;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::vector<io::RgbdSample> load_training_data(const cfg::Config& c, int64_t side) {
  std::string root = c.get_str("data.root", "");
  if (!root.empty()) {
    if (!fs::is_directory(root)) throw std::invalid_argument("dataset root not found: " + root);
    std::vector<std::string> issues;
    bool invert = c.get_bool("data.invert_depth", false);
    io::DatasetManifest man = io::load_dataset(root, c.get_str("data.name", ""), invert, &issues);
    for (const auto& i : issues) std::fprintf(stderr, "warning: %s\n", i.c_str());
    io::LoadOptions opt;
    opt.side = static_cast<int>(side);
    std::vector<std::string> warnings;
    std::vector<io::RgbdSample> samples;
    samples.reserve(man.entries.size());
    for (const auto& e : man.entries) samples.push_back(io::load_sample(e, opt, invert, &warnings));
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return samples;
  }
  bench::SynthSpec spec;
  spec.style = c.get_str("synth.style", spec.style);
  spec.n = static_cast<int>(c.get_int("synth.n", spec.n));
  spec.side = c.get_int("synth.side", side);
  spec.seed = c.get_u64("synth.seed", spec.seed);
  spec.informative_depth = c.get_bool("synth.informative_depth", spec.informative_depth);
  return bench::make_corpus(spec);
}

void load_pretrained_backbone(net::BbsModel& model, const std::string& path) {
  if (!fs::exists(path)) {
    std::fprintf(stderr, "warning: pretrained weights not found at %s, training from scratch\n", path.c_str());
    return;
  }
  ckpt::Checkpoint c = ckpt::load_checkpoint(path);
  size_t copied = 0, skipped = 0;
  for (const auto& [name, t] : c.tensors) {
    if (!model.params().has(name)) {
      ++skipped;
      continue;
    }
    ad::Var p = model.params().get(name);
    if (p->value.shape != t.shape) {
      std::fprintf(stderr, "warning: pretrained tensor %s has a mismatched shape, skipped\n", name.c_str());
      ++skipped;
      continue;
    }
    p->value.data = t.data;
    ++copied;
  }
  if (copied == 0)
    std::fprintf(stderr, "warning: no tensor in %s matches the model, training from scratch\n", path.c_str());
  else
    std::printf("loaded %zu pretrained tensors from %s (%zu skipped)\n", copied, path.c_str(), skipped);
}

int cmd_train(const std::string& config_path, const std::string& variant, const std::string& out_dir) {
  cfg::Config c = load_cli_config(config_path);
  if (!variant.empty()) c.values["model.variant"] = variant;
  net::ModelConfig mc = cfg::model_config_from(c);
  train::TrainConfig tc = cfg::train_config_from(c);
  tc.out_dir = out_dir;
  std::vector<io::RgbdSample> data = load_training_data(c, mc.side);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  net::BbsModel model(mc);
  std::string weights = c.get_str("backbone.weights", "");
  if (!weights.empty()) load_pretrained_backbone(model, weights);
  std::printf("training %s on %zu samples (%lld parameters)\n", net::to_string(mc.variant).c_str(), data.size(),
              static_cast<long long>(model.param_count()));
  train::TrainResult res = train::train(model, data, tc);
  if (res.diverged) {
    std::fprintf(stderr, "error: training diverged after %lld iterations\n", static_cast<long long>(res.iters));
    return 3;
  }
  if (!res.log.empty()) {
    const train::TrainLogRow& last = res.log.back();
    std::printf("done: %lld iterations over %d epochs, loss_s1 %.6f, loss_s2 %.6f\n",
                static_cast<long long>(res.iters), res.epochs_done, last.loss_s1, last.loss_s2);
  }
  if (!res.last_checkpoint.empty()) std::printf("checkpoint: %s\n", res.last_checkpoint.c_str());
  return 0;
}

net::ModelConfig model_config_from_meta(const ckpt::CheckpointMeta& meta) {
  net::ModelConfig mc;
  mc.variant = net::variant_from_string(meta.variant);
  mc.side = meta.side;
  mc.loss_alpha = meta.loss_alpha;
  auto extra = [&meta](const std::string& k) {
    auto it = meta.extra.find(k);
    return it == meta.extra.end() ? std::string() : it->second;
  };
  std::string v = extra("backbone");
  if (!v.empty()) mc.backbone.kind = v;
  mc.zero_depth = extra("zero_depth") == "1";
  if (!(v = extra("dem_ratio")).empty()) mc.dem_ratio = std::stoi(v);
  if (!(v = extra("dem_spatial_kernel")).empty()) mc.dem_spatial_kernel = std::stoi(v);
  if (!(v = extra("toy_channels")).empty()) {
    size_t pos = 0;
    for (auto& ch : mc.backbone.toy_channels) {
      size_t comma = v.find(',', pos);
      ch = std::stoll(v.substr(pos, comma - pos));
      pos = comma == std::string::npos ? v.size() : comma + 1;
    }
  }
  return mc;
}

int cmd_infer(const std::string& ckpt_path, const std::string& input_dir, const std::string& out_dir) {
  if (!fs::is_directory(input_dir)) throw std::invalid_argument("input directory not found: " + input_dir);
  ckpt::Checkpoint c = ckpt::load_checkpoint(ckpt_path);
  net::ModelConfig mc = model_config_from_meta(c.meta);
  net::BbsModel model(mc);
  ckpt::fill_param_store(c, model.params());
  std::vector<std::string> issues;
  io::DatasetManifest man = io::load_dataset(input_dir, "", false, &issues);
  for (const auto& i : issues) std::fprintf(stderr, "warning: %s\n", i.c_str());
  fs::create_directories(out_dir);
  io::LoadOptions opt;
  opt.side = static_cast<int>(mc.side);
  for (const auto& e : man.entries) {
    io::RgbdSample s = io::load_sample(e, opt);
    net::BbsOutputs out = model.infer(s);
    Tensor gt = io::read_image_chw(e.gt_path);
    io::save_saliency(out.s2, (fs::path(out_dir) / (e.id + ".png")).string(), gt.dim(1), gt.dim(2));
  }
  std::printf("wrote %zu saliency maps to %s\n", man.entries.size(), out_dir.c_str());
  return 0;
}

std::map<std::string, std::string> scan_maps(const std::string& dir) {
  std::map<std::string, std::string> out;
  for (const auto& ent : fs::directory_iterator(dir)) {
    if (!ent.is_regular_file()) continue;
    std::string ext = ent.path().extension().string();
    for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext != ".png" && ext != ".jpg" && ext != ".jpeg" && ext != ".bmp") continue;
    out[ent.path().stem().string()] = ent.path().string();
  }
  return out;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out_dir,
             const std::string& config_path) {
  if (!fs::is_directory(pred_dir)) throw std::invalid_argument("prediction directory not found: " + pred_dir);
  if (!fs::is_directory(gt_dir)) throw std::invalid_argument("ground-truth directory not found: " + gt_dir);
  cfg::Config c = load_cli_config(config_path);
  metrics::MetricConfig mcfg;
  mcfg.normalize_pred = c.get_bool("eval.normalize_pred", mcfg.normalize_pred);
  auto pred_paths = scan_maps(pred_dir);
  auto gt_paths = scan_maps(gt_dir);
  std::vector<Tensor> preds, gts;
  for (const auto& [stem, path] : pred_paths) {
    auto it = gt_paths.find(stem);
    if (it == gt_paths.end()) {
      std::fprintf(stderr, "warning: no ground truth for %s, skipped\n", stem.c_str());
      continue;
    }
    Tensor p = io::read_saliency(path);
    Tensor g = io::read_saliency(it->second);
    for (double& v : g.data) v = v > 0.5 ? 1.0 : 0.0;
    if (p.shape != g.shape) p = resize_bilinear(p, g.dim(1), g.dim(2));
    preds.push_back(std::move(p));
    gts.push_back(std::move(g));
  }
  for (const auto& [stem, path] : gt_paths)
    if (!pred_paths.count(stem)) std::fprintf(stderr, "warning: no prediction for %s, skipped\n", stem.c_str());
  if (preds.empty())
    throw std::invalid_argument("no prediction/ground-truth pairs between " + pred_dir + " and " + gt_dir);
  metrics::MetricReport r =
      metrics::evaluate_dataset(preds, gts, mcfg, fs::path(pred_dir).filename().string());
  std::string json = metrics::report_json(r);
  std::printf("%s\n", json.c_str());
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.json", json + "\n");
    write_text(fs::path(out_dir) / "report.csv",
               metrics::report_csv_header() + "\n" + metrics::report_csv_row(r) + "\n");
  }
  return 0;
}

int cmd_postproc(const std::string& method, const std::string& in_dir, const std::string& out_dir) {
  if (!fs::is_directory(in_dir)) throw std::invalid_argument("input directory not found: " + in_dir);
  auto maps = scan_maps(in_dir);
  if (maps.empty()) throw std::invalid_argument("no saliency maps under " + in_dir);
  fs::create_directories(out_dir);
  double total_ms = 0.0;
  for (const auto& [stem, path] : maps) {
    Tensor m = io::read_saliency(path);
    auto t0 = std::chrono::steady_clock::now();
    postproc::BinarizedMap b = method == "otsu" ? postproc::otsu_threshold(m) : postproc::adaptive_threshold(m);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    total_ms += ms;
    if (b.warned_constant)
      std::fprintf(stderr, "warning: %s is constant, emitting an all-foreground mask\n", stem.c_str());
    io::save_saliency(b.mask, (fs::path(out_dir) / (stem + ".png")).string(), b.mask.dim(1), b.mask.dim(2));
    std::printf("%s threshold=%.4f time_ms=%.3f\n", stem.c_str(), b.threshold, ms);
  }
  std::printf("%s over %zu maps: %.3f ms/image\n", method.c_str(), maps.size(), total_ms / maps.size());
  return 0;
}

int cmd_generalize(const std::string& config_path, const std::string& out_dir) {
  cfg::Config c = load_cli_config(config_path);
  set_default(c, "synth.side", "64");
  set_default(c, "synth.n", "12");
  set_default(c, "model.side", c.values.at("synth.side"));
  set_default(c, "train.epochs", "30");
  set_default(c, "train.batch", "4");
  set_default(c, "train.lr", "3e-4");
  bench::BenchConfig bc;
  bc.model = cfg::model_config_from(c);
  bc.train = cfg::train_config_from(c);
  bc.train.out_dir.clear();
  bc.metric.normalize_pred = c.get_bool("eval.normalize_pred", bc.metric.normalize_pred);
  bench::SynthSpec base;
  base.n = static_cast<int>(c.get_int("synth.n", base.n));
  base.side = c.get_int("synth.side", base.side);
  base.seed = c.get_u64("synth.seed", base.seed);
  base.informative_depth = c.get_bool("synth.informative_depth", base.informative_depth);
  auto corpus = [&base](const std::string& style, uint64_t seed) {
    bench::SynthSpec s = base;
    s.style = style;
    s.seed = seed;
    return bench::NamedCorpus{style, bench::make_corpus(s)};
  };
  std::vector<bench::NamedCorpus> trains{corpus("discs", base.seed), corpus("rects", base.seed + 1)};
  std::vector<bench::NamedCorpus> tests{corpus("discs", base.seed + 101), corpus("rects", base.seed + 102)};
  std::printf("cross-dataset grid: 2 train corpora x 2 test corpora, %d samples each, side %lld\n", base.n,
              static_cast<long long>(base.side));
  bench::GeneralizationGrid g = bench::run_grid(trains, tests, bc);
  fs::create_directories(out_dir);
  std::string csv = bench::grid_csv(g);
  write_text(fs::path(out_dir) / "grid.csv", csv);
  write_text(fs::path(out_dir) / "grid.json", bench::grid_json(g) + "\n");
  std::printf("%s", csv.c_str());
  bool any_failed = false;
  for (const auto& row : g.rows) {
    any_failed = any_failed || row.failed;
    if (row.has_self && !row.failed)
      std::printf("%s: self %.3f, mean others %.3f, drop %s\n", row.train_name.c_str(), row.self_s,
                  row.mean_others_s, bench::format_drop_percent(row.drop).c_str());
  }
  std::printf("grid written to %s\n", out_dir.c_str());
  if (any_failed) {
    std::fprintf(stderr, "error: at least one training row diverged\n");
    return 3;
  }
  return 0;
}

int cmd_ablate(bool all, const std::string& variant, const std::string& config_path) {
  cfg::Config c = load_cli_config(config_path);
  set_default(c, "synth.side", "32");
  set_default(c, "synth.n", "4");
  set_default(c, "model.side", c.values.at("synth.side"));
  net::ModelConfig mc = cfg::model_config_from(c);
  train::TrainConfig tc = cfg::train_config_from(c);
  tc.epochs = 1;
  tc.max_iters = 1;
  tc.batch = std::min(tc.batch, 2);
  tc.log_every = 1;
  tc.workers = 1;
  tc.out_dir.clear();
  std::vector<io::RgbdSample> data = load_training_data(c, mc.side);
  std::vector<net::Variant> list;
  if (all)
    list = net::all_variants();
  else
    list.push_back(net::variant_from_string(variant));
  bool any_diverged = false;
  for (net::Variant v : list) {
    net::ModelConfig m = mc;
    m.variant = v;
    net::BbsModel model(m);
    train::TrainResult res = train::train(model, data, tc);
    double l1 = res.log.empty() ? 0.0 : res.log.back().loss_s1;
    double l2 = res.log.empty() ? 0.0 : res.log.back().loss_s2;
    std::printf("%-10s params=%-8lld loss_s1=%.4f loss_s2=%.4f%s\n", net::to_string(v).c_str(),
                static_cast<long long>(model.param_count()), l1, l2, res.diverged ? " DIVERGED" : "");
    any_diverged = any_diverged || res.diverged;
  }
  if (any_diverged) {
    std::fprintf(stderr, "error: at least one variant diverged on its single step\n");
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bbs: bifurcated-backbone RGB-D salient object detection"};
  app.require_subcommand(1);

  std::string train_config, train_variant, train_out = "train_out";
  CLI::App* train = app.add_subcommand("train", "train a model from a config");
  train->add_option("--config", train_config, "config file (key = value lines)");
  train->add_option("--variant", train_variant, "model variant, overrides model.variant");
  train->add_option("--out", train_out, "checkpoint and log directory")->capture_default_str();

  std::string infer_ckpt, infer_in, infer_out;
  CLI::App* infer = app.add_subcommand("infer", "write saliency maps for a directory of RGB-D pairs");
  infer->add_option("--ckpt", infer_ckpt, "checkpoint file")->required();
  infer->add_option("--input-dir", infer_in, "directory with RGB/, depth/, GT/ subdirectories")->required();
  infer->add_option("--out-dir", infer_out, "output directory for PNG maps")->required();

  std::string eval_pred, eval_gt, eval_out = ".", eval_config;
  CLI::App* eval = app.add_subcommand("eval", "score saved maps against ground truth");
  eval->add_option("--pred-dir", eval_pred, "directory of predicted maps")->required();
  eval->add_option("--gt-dir", eval_gt, "directory of ground-truth masks")->required();
  eval->add_option("--out", eval_out, "directory for report.json/report.csv")->capture_default_str();
  eval->add_option("--config", eval_config, "config file, reads eval.* keys");

  std::string pp_method, pp_in, pp_out;
  CLI::App* postproc = app.add_subcommand("postproc", "binarize saved maps");
  postproc->add_option("--method", pp_method, "thresholding method")
      ->required()
      ->check(CLI::IsMember({"adp", "otsu"}));
  postproc->add_option("--in-dir", pp_in, "directory of saliency maps")->required();
  postproc->add_option("--out-dir", pp_out, "output directory for binary masks")->required();

  std::string gen_config, gen_out = "generalize_out";
  bool gen_toy = false;
  CLI::App* generalize = app.add_subcommand("generalize", "cross-dataset generalization grid");
  generalize->add_flag("--toy", gen_toy, "run the two-style synthetic grid")->required();
  generalize->add_option("--config", gen_config, "config file, reads model/train/synth keys");
  generalize->add_option("--out", gen_out, "directory for grid.csv/grid.json")->capture_default_str();

  std::string ab_variant, ab_config;
  bool ab_all = false;
  CLI::App* ablate = app.add_subcommand("ablate", "single training step per variant");
  ablate->add_flag("--all", ab_all, "run every variant");
  ablate->add_option("--variant", ab_variant, "run one variant")->excludes("--all");
  ablate->add_option("--config", ab_config, "config file, reads model/train/synth keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_config, train_variant, train_out);
    if (infer->parsed()) return cmd_infer(infer_ckpt, infer_in, infer_out);
    if (eval->parsed()) return cmd_eval(eval_pred, eval_gt, eval_out, eval_config);
    if (postproc->parsed()) return cmd_postproc(pp_method, pp_in, pp_out);
    if (generalize->parsed()) return cmd_generalize(gen_config, gen_out);
    if (ablate->parsed()) {
      if (!ab_all && ab_variant.empty()) throw std::invalid_argument("ablate wants --all or --variant <name>");
      return cmd_ablate(ab_all, ab_variant, ab_config);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
