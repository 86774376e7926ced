#include "bbs/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace bbs::bench {

namespace {

struct Rgb {
  double r, g, b;
};

Rgb warm_color(Rng& rng) {
  return {rng.uniform(0.75, 0.95), rng.uniform(0.35, 0.60), rng.uniform(0.10, 0.30)};
}

Rgb cool_color(Rng& rng) {
  return {rng.uniform(0.10, 0.30), rng.uniform(0.35, 0.60), rng.uniform(0.75, 0.95)};
}

struct Blob {
  bool rect = false;
  double cy = 0, cx = 0, ry = 0, rx = 0;
  Rgb color{0, 0, 0};
  double depth = 0;

  // soft coverage: 1 inside, 0 outside, ~1.5 px transition centered on the edge
  double alpha(double y, double x) const {
    double d;
    if (rect)
      d = std::max(std::abs(y - cy) - ry, std::abs(x - cx) - rx);
    else
      d = std::hypot(y - cy, x - cx) - rx;
    return std::clamp(0.5 - d / 1.5, 0.0, 1.0);
  }
  bool clear_of(const Blob& o, double margin) const {
    double reach = std::max(ry, rx) + std::max(o.ry, o.rx) + margin;
    return std::hypot(cy - o.cy, cx - o.cx) > reach;
  }
};

uint64_t style_key(const std::string& style) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : style) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

io::RgbdSample render_sample(const SynthSpec& spec, int idx) {
  if (spec.style != "discs" && spec.style != "rects")
    throw std::invalid_argument("synthetic corpus: unknown style '" + spec.style + "' (want discs|rects)");
  bool rects = spec.style == "rects";
  int64_t side = spec.side;
  double s = static_cast<double>(side);
  Rng rng(Rng::mix(Rng::mix(spec.seed, style_key(spec.style) + static_cast<uint64_t>(spec.version)),
                   static_cast<uint64_t>(idx)));

  Rgb bg1 = rects ? warm_color(rng) : cool_color(rng);
  Rgb bg2 = rects ? warm_color(rng) : cool_color(rng);

  // large blobs carry washed-out colors (blended toward the background), so
  // their per-pixel evidence is weak next to the vivid speckles below
  Rgb bg_mid = {(bg1.r + bg2.r) / 2, (bg1.g + bg2.g) / 2, (bg1.b + bg2.b) / 2};
  auto draw_blob = [&rng, rects, s, bg_mid]() {
    Blob b;
    b.rect = rects;
    b.cy = rng.uniform(0.20, 0.80) * s;
    b.cx = rng.uniform(0.20, 0.80) * s;
    if (rects) {
      b.ry = rng.uniform(0.13, 0.20) * s;
      b.rx = rng.uniform(0.13, 0.20) * s;
      b.color = cool_color(rng);
    } else {
      b.ry = b.rx = rng.uniform(0.16, 0.24) * s;
      b.color = warm_color(rng);
    }
    double t = rng.uniform(0.45, 0.75);
    b.color = {b.color.r + (bg_mid.r - b.color.r) * t, b.color.g + (bg_mid.g - b.color.g) * t,
               b.color.b + (bg_mid.b - b.color.b) * t};
    return b;
  };

  Blob salient = draw_blob();
  salient.depth = rng.uniform(0.80, 0.95);

  // decoys draw from the same color, size, and position ranges as the salient
  // object, so appearance alone cannot identify the target; only depth can
  // (the salient object is the near one). Decoys may overlap each other but
  // stay clear of the target, with the margin relaxed until placement works.
  std::vector<Blob> decoys;
  int want = static_cast<int>(rng.uniform_int(2, 3));
  for (int d = 0; d < want; ++d) {
    double margin = 2.0;
    for (int attempt = 0; attempt < 40; ++attempt, margin *= 0.85) {
      Blob b = draw_blob();
      b.depth = rng.uniform(0.15, 0.35);
      if (b.clear_of(salient, margin)) {
        decoys.push_back(b);
        break;
      }
    }
  }

  // salient-colored speckles, alternating between background depth and the
  // salient object's own depth band: local color or depth matching fires on
  // them, and the near-depth ones can only be told from the target by scale
  int n_speckles = static_cast<int>(rng.uniform_int(10, 16));
  for (int i = 0; i < n_speckles; ++i) {
    Blob b;
    b.rect = rects;
    b.cy = rng.uniform(0.05, 0.95) * s;
    b.cx = rng.uniform(0.05, 0.95) * s;
    b.ry = b.rx = rng.uniform(0.030, 0.070) * s;
    b.color = rects ? cool_color(rng) : warm_color(rng);
    b.depth = (i % 2 == 0) ? rng.uniform(0.15, 0.35) : rng.uniform(0.80, 0.95);
    if (b.clear_of(salient, 1.0)) decoys.push_back(b);
  }

  io::RgbdSample out;
  char id[64];
  std::snprintf(id, sizeof id, "%s_v%d_%04d", spec.style.c_str(), spec.version, idx);
  out.id = id;
  out.rgb = Tensor({3, side, side});
  out.depth = Tensor({1, side, side});
  out.gt = Tensor::zeros({1, side, side});

  double stripe = std::max(4.0, s / 8.0);
  for (int64_t y = 0; y < side; ++y) {
    for (int64_t x = 0; x < side; ++x) {
      double fy = static_cast<double>(y), fx = static_cast<double>(x);
      Rgb c;
      if (rects) {
        c = (static_cast<int64_t>(fy / stripe) % 2 == 0) ? bg1 : bg2;
      } else {
        double t = fy / (s - 1.0);
        c = {bg1.r + (bg2.r - bg1.r) * t, bg1.g + (bg2.g - bg1.g) * t, bg1.b + (bg2.b - bg1.b) * t};
      }
      double depth_raw = 0.10 + 0.20 * fy / (s - 1.0);

      for (const Blob& b : decoys) {
        double a = b.alpha(fy, fx);
        c = {c.r + (b.color.r - c.r) * a, c.g + (b.color.g - c.g) * a, c.b + (b.color.b - c.b) * a};
        depth_raw += (b.depth - depth_raw) * a;
      }
      double a = salient.alpha(fy, fx);
      c = {c.r + (salient.color.r - c.r) * a, c.g + (salient.color.g - c.g) * a,
           c.b + (salient.color.b - c.b) * a};
      depth_raw += (salient.depth - depth_raw) * a;

      out.rgb.at(0, y, x) = std::clamp(c.r + rng.uniform(-0.02, 0.02), 0.0, 1.0);
      out.rgb.at(1, y, x) = std::clamp(c.g + rng.uniform(-0.02, 0.02), 0.0, 1.0);
      out.rgb.at(2, y, x) = std::clamp(c.b + rng.uniform(-0.02, 0.02), 0.0, 1.0);

      if (!spec.informative_depth)
        out.depth.at(0, y, x) = rng.uniform();
      else
        out.depth.at(0, y, x) =
            std::clamp((rects ? 1.0 - depth_raw : depth_raw) + rng.uniform(-0.02, 0.02), 0.0, 1.0);
      if (a > 0.5) out.gt.at(0, y, x) = 1.0;
    }
  }
  return out;
}

GridRow run_row(const std::string& name, const std::vector<io::RgbdSample>& data,
                const std::vector<NamedCorpus>& test_sets, const std::vector<std::string>& test_names,
                const BenchConfig& cfg) {
  GridRow row;
  row.train_name = name;
  net::BbsModel model(cfg.model);
  bool ok = true;
  try {
    train::TrainResult res = train::train(model, data, cfg.train);
    ok = !res.diverged;
  } catch (const std::exception&) {
    ok = false;
  }
  if (!ok) {
    row.failed = true;
    GridCell dead;
    dead.failed = true;
    row.cells.assign(test_sets.size(), dead);
  } else {
    for (const auto& [tname, tdata] : test_sets) {
      metrics::MetricReport rep = evaluate_model(model, tdata, cfg.metric, tname);
      GridCell cell;
      cell.s_alpha = rep.s_alpha;
      cell.max_f = rep.max_f;
      row.cells.push_back(cell);
    }
  }
  derive_row_stats(row, test_names);
  return row;
}

}  // namespace

std::vector<io::RgbdSample> make_corpus(const SynthSpec& spec) {
  if (spec.n <= 0) throw std::invalid_argument("synthetic corpus: n must be positive");
  std::vector<io::RgbdSample> out;
  out.reserve(static_cast<size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) out.push_back(render_sample(spec, i));
  return out;
}

void write_corpus(const std::vector<io::RgbdSample>& samples, const std::string& root) {
  fs::create_directories(fs::path(root) / "RGB");
  fs::create_directories(fs::path(root) / "depth");
  fs::create_directories(fs::path(root) / "GT");
  for (const io::RgbdSample& s : samples) {
    io::write_image_chw(s.rgb, (fs::path(root) / "RGB" / (s.id + ".png")).string());
    io::write_image_chw(s.depth, (fs::path(root) / "depth" / (s.id + ".png")).string());
    io::write_image_chw(s.gt, (fs::path(root) / "GT" / (s.id + ".png")).string());
  }
}

metrics::MetricReport evaluate_model(net::BbsModel& model, const std::vector<io::RgbdSample>& data,
                                     const metrics::MetricConfig& mcfg, const std::string& name) {
  std::vector<Tensor> preds, gts;
  preds.reserve(data.size());
  gts.reserve(data.size());
  for (const io::RgbdSample& s : data) {
    preds.push_back(model.infer(s).s2);
    gts.push_back(s.gt);
  }
  return metrics::evaluate_dataset(preds, gts, mcfg, name);
}

double drop_of(double self, double mean_others) {
  if (self == 0.0) return 0.0;
  return (self - mean_others) / self;
}

std::string format_drop_percent(double drop) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", drop * 100.0);
  return buf;
}

void derive_row_stats(GridRow& row, const std::vector<std::string>& test_names) {
  row.has_self = false;
  row.self_s = row.mean_others_s = row.drop = 0.0;
  if (row.failed || row.cells.size() != test_names.size()) return;

  size_t self_idx = test_names.size();
  for (size_t i = 0; i < test_names.size(); ++i)
    if (test_names[i] == row.train_name) self_idx = i;

  double sum = 0.0;
  int n_others = 0;
  for (size_t i = 0; i < row.cells.size(); ++i) {
    if (i == self_idx) continue;
    sum += row.cells[i].s_alpha;
    ++n_others;
  }
  if (n_others > 0) row.mean_others_s = sum / n_others;
  if (self_idx < test_names.size()) {
    row.has_self = true;
    row.self_s = row.cells[self_idx].s_alpha;
    row.drop = drop_of(row.self_s, row.mean_others_s);
  }
}

GeneralizationGrid run_grid(const std::vector<NamedCorpus>& train_sets,
                            const std::vector<NamedCorpus>& test_sets, const BenchConfig& cfg) {
  GeneralizationGrid g;
  for (const auto& [name, data] : test_sets) g.test_names.push_back(name);
  for (const auto& [name, data] : train_sets)
    g.rows.push_back(run_row(name, data, test_sets, g.test_names, cfg));
  return g;
}

GeneralizationGrid run_combinations(const std::vector<std::vector<std::string>>& unions,
                                    const std::vector<NamedCorpus>& train_sets,
                                    const std::vector<NamedCorpus>& test_sets, const BenchConfig& cfg,
                                    std::vector<std::string>* warnings) {
  GeneralizationGrid g;
  for (const auto& [name, data] : test_sets) g.test_names.push_back(name);

  for (const std::vector<std::string>& members : unions) {
    std::vector<std::string> kept;
    for (const std::string& m : members) {
      if (std::find(kept.begin(), kept.end(), m) != kept.end()) {
        if (warnings) warnings->push_back("duplicate dataset '" + m + "' in union ignored");
        continue;
      }
      kept.push_back(m);
    }
    if (kept.empty()) throw std::invalid_argument("combination run: empty union");

    std::vector<io::RgbdSample> data;
    std::string name;
    for (const std::string& m : kept) {
      auto it = std::find_if(train_sets.begin(), train_sets.end(),
                             [&](const NamedCorpus& c) { return c.first == m; });
      if (it == train_sets.end())
        throw std::invalid_argument("combination run: unknown dataset '" + m + "'");
      data.insert(data.end(), it->second.begin(), it->second.end());
      name += name.empty() ? m : "+" + m;
    }
    g.rows.push_back(run_row(name, data, test_sets, g.test_names, cfg));
  }
  return g;
}

DepthUtilityReport depth_utility(const std::vector<io::RgbdSample>& train_data,
                                 const std::vector<io::RgbdSample>& test_data, const BenchConfig& cfg) {
  DepthUtilityReport rep;
  auto run_arm = [&](bool zero_depth, metrics::MetricReport& out, bool& failed) {
    BenchConfig arm = cfg;
    arm.model.zero_depth = zero_depth;
    net::BbsModel model(arm.model);
    try {
      train::TrainResult res = train::train(model, train_data, arm.train);
      failed = res.diverged;
    } catch (const std::exception&) {
      failed = true;
    }
    if (!failed) out = evaluate_model(model, test_data, arm.metric, zero_depth ? "wo_depth" : "w_depth");
  };
  run_arm(false, rep.with_depth, rep.with_failed);
  run_arm(true, rep.without_depth, rep.without_failed);
  return rep;
}

std::string grid_csv(const GeneralizationGrid& g) {
  std::ostringstream out;
  out << "train";
  for (const std::string& t : g.test_names) out << ",s_alpha:" << t;
  for (const std::string& t : g.test_names) out << ",max_f:" << t;
  out << ",failed,self,mean_others,drop\n";
  for (const GridRow& r : g.rows) {
    out << r.train_name;
    for (const GridCell& c : r.cells) out << ',' << (c.failed ? std::string("nan") : std::to_string(c.s_alpha));
    for (const GridCell& c : r.cells) out << ',' << (c.failed ? std::string("nan") : std::to_string(c.max_f));
    out << ',' << (r.failed ? 1 : 0);
    if (r.has_self)
      out << ',' << r.self_s << ',' << r.mean_others_s << ',' << r.drop;
    else
      out << ",,,";
    out << '\n';
  }
  return out.str();
}

std::string grid_json(const GeneralizationGrid& g) {
  nlohmann::json j;
  j["test_sets"] = g.test_names;
  j["rows"] = nlohmann::json::array();
  for (const GridRow& r : g.rows) {
    nlohmann::json row;
    row["train"] = r.train_name;
    row["failed"] = r.failed;
    row["cells"] = nlohmann::json::array();
    for (const GridCell& c : r.cells)
      row["cells"].push_back({{"s_alpha", c.s_alpha}, {"max_f", c.max_f}, {"failed", c.failed}});
    if (r.has_self) {
      row["self"] = r.self_s;
      row["mean_others"] = r.mean_others_s;
      row["drop"] = r.drop;
      row["drop_percent"] = format_drop_percent(r.drop);
    }
    j["rows"].push_back(row);
  }
  return j.dump(2);
}

}  // namespace bbs::bench
