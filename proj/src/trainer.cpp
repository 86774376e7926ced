#include "bbs/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

namespace fs = std::filesystem;

namespace bbs::train {

double lr_at(int epoch, const TrainConfig& cfg) {
  if (cfg.lr_decay_every <= 0) return cfg.lr;
  return cfg.lr / std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
}

GeomParams draw_geom(Rng& rng, const TrainConfig& cfg) {
  GeomParams g;
  g.flip = rng.bernoulli(0.5);
  g.angle_deg = (rng.uniform() * 2.0 - 1.0) * cfg.rotate_deg;
  g.crop_l = rng.uniform() * cfg.crop_frac;
  g.crop_t = rng.uniform() * cfg.crop_frac;
  g.crop_r = rng.uniform() * cfg.crop_frac;
  g.crop_b = rng.uniform() * cfg.crop_frac;
  return g;
}

namespace {

Tensor flip_h(const Tensor& t) {
  Tensor out(t.shape);
  int64_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) out.at(ch, y, x) = t.at(ch, y, w - 1 - x);
  return out;
}

double sample_clamped(const Tensor& t, int64_t ch, double fy, double fx, bool nearest) {
  int64_t h = t.dim(1), w = t.dim(2);
  if (nearest) {
    int64_t y = std::clamp<int64_t>(std::llround(fy), 0, h - 1);
    int64_t x = std::clamp<int64_t>(std::llround(fx), 0, w - 1);
    return t.at(ch, y, x);
  }
  fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
  int64_t y0 = static_cast<int64_t>(fy), x0 = static_cast<int64_t>(fx);
  int64_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  double wy = fy - static_cast<double>(y0), wx = fx - static_cast<double>(x0);
  return (1 - wy) * ((1 - wx) * t.at(ch, y0, x0) + wx * t.at(ch, y0, x1)) +
         wy * ((1 - wx) * t.at(ch, y1, x0) + wx * t.at(ch, y1, x1));
}

Tensor rotate(const Tensor& t, double angle_deg, bool nearest) {
  if (angle_deg == 0.0) return t;
  Tensor out(t.shape);
  int64_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  double a = angle_deg * M_PI / 180.0, ca = std::cos(a), sa = std::sin(a);
  double cy = (static_cast<double>(h) - 1) / 2.0, cx = (static_cast<double>(w) - 1) / 2.0;
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        double sy = cy + ca * dy - sa * dx;
        double sx = cx + sa * dy + ca * dx;
        out.at(ch, y, x) = sample_clamped(t, ch, sy, sx, nearest);
      }
  return out;
}

Tensor crop_resize(const Tensor& t, const GeomParams& g, bool nearest) {
  int64_t h = t.dim(1), w = t.dim(2);
  int64_t l = static_cast<int64_t>(g.crop_l * static_cast<double>(w));
  int64_t r = static_cast<int64_t>(g.crop_r * static_cast<double>(w));
  int64_t top = static_cast<int64_t>(g.crop_t * static_cast<double>(h));
  int64_t bot = static_cast<int64_t>(g.crop_b * static_cast<double>(h));
  if (l + r == 0 && top + bot == 0) return t;
  int64_t ch = t.dim(0), nh = h - top - bot, nw = w - l - r;
  Tensor cut({ch, nh, nw});
  for (int64_t cc = 0; cc < ch; ++cc)
    for (int64_t y = 0; y < nh; ++y)
      for (int64_t x = 0; x < nw; ++x) cut.at(cc, y, x) = t.at(cc, y + top, x + l);
  return nearest ? resize_nearest(cut, h, w) : resize_bilinear(cut, h, w);
}

}  // namespace

io::RgbdSample apply_geom(const io::RgbdSample& s, const GeomParams& g) {
  io::RgbdSample out;
  out.id = s.id;
  auto run = [&](const Tensor& t, bool nearest) {
    Tensor v = g.flip ? flip_h(t) : t;
    v = rotate(v, g.angle_deg, nearest);
    return crop_resize(v, g, nearest);
  };
  out.rgb = run(s.rgb, false);
  out.depth = run(s.depth, false);
  out.gt = run(s.gt, true);
  return out;
}

io::RgbdSample augment(const io::RgbdSample& s, Rng& rng, const TrainConfig& cfg) {
  return apply_geom(s, draw_geom(rng, cfg));
}

void clip_gradients(nn::ParamStore& ps, double lo, double hi) {
  for (const auto& [name, v] : ps.items()) {
    if (v->grad.data.empty()) continue;
    for (double& g : v->grad.data) g = std::clamp(g, lo, hi);
  }
}

Adam::Adam(const nn::ParamStore& ps, const TrainConfig& cfg)
    : beta1(cfg.beta1), beta2(cfg.beta2), eps(cfg.adam_eps), weight_decay(cfg.weight_decay) {
  for (const auto& [name, p] : ps.items()) {
    m.push_back(Tensor::zeros(p->value.shape));
    v.push_back(Tensor::zeros(p->value.shape));
  }
}

void Adam::step(nn::ParamStore& ps, double lr) {
  ++step_count;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  const auto& items = ps.items();
  for (size_t i = 0; i < items.size(); ++i) {
    Tensor& val = items[i].second->value;
    const Tensor& grad = items[i].second->grad;
    bool has_grad = !grad.data.empty();
    for (size_t k = 0; k < val.data.size(); ++k) {
      double g = has_grad ? grad.data[k] : 0.0;
      if (weight_decay != 0.0) g += weight_decay * val.data[k];
      double& mi = m[i].data[k];
      double& vi = v[i].data[k];
      mi = beta1 * mi + (1.0 - beta1) * g;
      vi = beta2 * vi + (1.0 - beta2) * g * g;
      val.data[k] -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
    }
  }
}

ckpt::Checkpoint make_checkpoint(const net::BbsModel& model, const TrainConfig& cfg, int epochs_done,
                                 int64_t iters, const Adam* opt) {
  ckpt::CheckpointMeta meta;
  meta.variant = net::to_string(model.config().variant);
  meta.config_hash = cfg.config_hash;
  meta.epoch = epochs_done;
  meta.iter = iters;
  meta.loss_alpha = model.config().loss_alpha;
  meta.side = model.config().side;
  meta.extra["backbone"] = model.config().backbone.kind;
  meta.extra["zero_depth"] = model.config().zero_depth ? "1" : "0";
  meta.extra["dem_ratio"] = std::to_string(model.config().dem_ratio);
  meta.extra["dem_spatial_kernel"] = std::to_string(model.config().dem_spatial_kernel);
  std::string chans;
  for (int64_t c : model.config().backbone.toy_channels) {
    if (!chans.empty()) chans += ',';
    chans += std::to_string(c);
  }
  meta.extra["toy_channels"] = chans;
  if (opt) meta.extra["opt_step"] = std::to_string(opt->step_count);
  ckpt::Checkpoint c = ckpt::snapshot(model.params(), std::move(meta));
  if (opt) {
    const auto& items = model.params().items();
    for (size_t i = 0; i < items.size(); ++i) {
      c.tensors.emplace_back("opt.m." + items[i].first, opt->m[i]);
      c.tensors.emplace_back("opt.v." + items[i].first, opt->v[i]);
    }
  }
  return c;
}

void load_model_checkpoint(const ckpt::Checkpoint& c, net::BbsModel& model, Adam* opt) {
  ckpt::fill_param_store(c, model.params());
  if (!opt) return;
  auto it = c.meta.extra.find("opt_step");
  if (it == c.meta.extra.end()) return;
  opt->step_count = std::stoll(it->second);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : c.tensors) by_name[name] = &t;
  const auto& items = model.params().items();
  for (size_t i = 0; i < items.size(); ++i) {
    auto mi = by_name.find("opt.m." + items[i].first);
    auto vi = by_name.find("opt.v." + items[i].first);
    if (mi == by_name.end() || vi == by_name.end())
      throw ckpt::CheckpointError("checkpoint lacks optimizer state for '" + items[i].first + "'");
    opt->m[i] = *mi->second;
    opt->v[i] = *vi->second;
  }
}

namespace {

void write_log(const std::string& out_dir, const std::vector<TrainLogRow>& rows) {
  if (out_dir.empty()) return;
  std::ofstream f(fs::path(out_dir) / "train_log.csv", std::ios::trunc);
  f << "epoch,iter,loss_s1,loss_s2,lr\n";
  for (const auto& r : rows)
    f << r.epoch << ',' << r.iter << ',' << r.loss_s1 << ',' << r.loss_s2 << ',' << r.lr << '\n';
}

std::string save_epoch_checkpoint(const net::BbsModel& model, const TrainConfig& cfg, int epochs_done,
                                  int64_t iters, const Adam& opt) {
  if (cfg.out_dir.empty()) return "";
  fs::create_directories(cfg.out_dir);
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%04d.bbs", epochs_done);
  std::string path = (fs::path(cfg.out_dir) / name).string();
  ckpt::Checkpoint c = make_checkpoint(model, cfg, epochs_done, iters, &opt);
  ckpt::save_checkpoint(path, c);
  ckpt::save_checkpoint((fs::path(cfg.out_dir) / "latest.bbs").string(), c);
  return path;
}

TrainResult run_loop(net::BbsModel& model, const std::vector<io::RgbdSample>& data,
                     const TrainConfig& cfg, int start_epoch, int64_t start_iter, Adam& opt) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch <= 0) throw std::invalid_argument("train: batch must be positive");

  TrainResult res;
  res.iters = start_iter;
  res.epochs_done = start_epoch;
  if (!cfg.out_dir.empty() && start_epoch == 0)
    res.last_checkpoint = save_epoch_checkpoint(model, cfg, 0, 0, opt);

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    double lr = lr_at(epoch, cfg);
    Rng order_rng(Rng::mix(cfg.seed, static_cast<uint64_t>(epoch)));
    Rng aug_rng(Rng::mix(Rng::mix(cfg.seed, static_cast<uint64_t>(epoch)), 0x61756700ull));

    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(order_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);

    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch)) {
      size_t n = std::min<size_t>(static_cast<size_t>(cfg.batch), order.size() - pos);

      std::vector<GeomParams> geoms(n);
      if (cfg.augment)
        for (size_t k = 0; k < n; ++k) geoms[k] = draw_geom(aug_rng, cfg);
      std::vector<io::RgbdSample> batch(n);
      auto prepare = [&](size_t k) {
        const io::RgbdSample& src = data[order[pos + k]];
        batch[k] = cfg.augment ? apply_geom(src, geoms[k]) : src;
      };
      if (cfg.workers > 1 && n > 1) {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        int nt = std::min<int>(cfg.workers, static_cast<int>(n));
        for (int t = 0; t < nt; ++t)
          pool.emplace_back([&] {
            for (size_t k = next.fetch_add(1); k < n; k = next.fetch_add(1)) prepare(k);
          });
        for (auto& t : pool) t.join();
      } else {
        for (size_t k = 0; k < n; ++k) prepare(k);
      }

      model.params().zero_grads();
      double batch_l1 = 0.0, batch_l2 = 0.0;
      bool bad = false;
      for (size_t k = 0; k < n; ++k) {
        net::ForwardTrace tr = model.forward(batch[k], &batch[k].gt);
        double l1 = tr.loss_s1 ? tr.loss_s1->value.data[0] : 0.0;
        double l2 = tr.loss_s2->value.data[0];
        if (!std::isfinite(l1) || !std::isfinite(l2)) {
          bad = true;
          break;
        }
        batch_l1 += l1 / static_cast<double>(n);
        batch_l2 += l2 / static_cast<double>(n);
        ad::backward(ad::scale(tr.loss, 1.0 / static_cast<double>(n)));
      }
      if (bad) {
        res.diverged = true;
        write_log(cfg.out_dir, res.log);
        return res;
      }
      clip_gradients(model.params(), cfg.clip_lo, cfg.clip_hi);
      opt.step(model.params(), lr);
      ++res.iters;

      if (cfg.log_every > 0 && res.iters % cfg.log_every == 0)
        res.log.push_back({epoch, res.iters, batch_l1, batch_l2, lr});
      if (cfg.max_iters > 0 && res.iters >= cfg.max_iters) {
        res.epochs_done = epoch;
        std::string p = save_epoch_checkpoint(model, cfg, epoch, res.iters, opt);
        if (!p.empty()) res.last_checkpoint = p;
        write_log(cfg.out_dir, res.log);
        return res;
      }
    }

    res.epochs_done = epoch + 1;
    if (!cfg.out_dir.empty() && cfg.ckpt_every_epochs > 0 && (epoch + 1) % cfg.ckpt_every_epochs == 0)
      res.last_checkpoint = save_epoch_checkpoint(model, cfg, epoch + 1, res.iters, opt);
  }
  write_log(cfg.out_dir, res.log);
  return res;
}

}  // namespace

TrainResult train(net::BbsModel& model, const std::vector<io::RgbdSample>& data, const TrainConfig& cfg) {
  Adam opt(model.params(), cfg);
  return run_loop(model, data, cfg, 0, 0, opt);
}

TrainResult resume(net::BbsModel& model, const std::vector<io::RgbdSample>& data, const TrainConfig& cfg,
                   const std::string& ckpt_path) {
  ckpt::Checkpoint c = ckpt::load_checkpoint(ckpt_path);
  if (!cfg.config_hash.empty() && !c.meta.config_hash.empty() && cfg.config_hash != c.meta.config_hash)
    throw ckpt::CheckpointError("checkpoint " + ckpt_path + " was written with config hash " +
                                c.meta.config_hash + ", current config hashes to " + cfg.config_hash);
  Adam opt(model.params(), cfg);
  load_model_checkpoint(c, model, &opt);
  return run_loop(model, data, cfg, static_cast<int>(c.meta.epoch), c.meta.iter, opt);
}

}  // namespace bbs::train
