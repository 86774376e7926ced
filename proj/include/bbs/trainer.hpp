#pragma once

#include <string>
#include <vector>

#include "bbs/checkpoint.hpp"
#include "bbs/model.hpp"

namespace bbs::train {

struct TrainConfig {
  double lr = 1e-4;
  int lr_decay_every = 60;  // epochs; <=0 disables decay
  double lr_decay_factor = 10.0;
  int epochs = 150;
  int64_t max_iters = 0;  // 0 = bounded by epochs only
  int batch = 10;
  double clip_lo = -0.5, clip_hi = 0.5;
  double beta1 = 0.9, beta2 = 0.99, adam_eps = 1e-8;
  double weight_decay = 0.0;
  int64_t side = 352;
  double loss_alpha = 0.5;
  uint64_t seed = 0;
  int workers = 1;
  bool augment = true;
  double rotate_deg = 15.0;
  double crop_frac = 0.10;  // max fraction clipped from each border
  int log_every = 1;
  int ckpt_every_epochs = 1;
  std::string out_dir;      // empty = keep everything in memory
  std::string config_hash;  // recorded in checkpoints; checked on resume
};

double lr_at(int epoch, const TrainConfig& cfg);

// One sampled geometric transform, applied identically to rgb, depth, and gt
// (gt with nearest resampling so it stays binary).
struct GeomParams {
  bool flip = false;
  double angle_deg = 0.0;
  double crop_l = 0.0, crop_t = 0.0, crop_r = 0.0, crop_b = 0.0;
};
GeomParams draw_geom(Rng& rng, const TrainConfig& cfg);
io::RgbdSample apply_geom(const io::RgbdSample& s, const GeomParams& g);
io::RgbdSample augment(const io::RgbdSample& s, Rng& rng, const TrainConfig& cfg);

// Element-wise clamp of every accumulated parameter gradient.
void clip_gradients(nn::ParamStore& ps, double lo, double hi);

struct Adam {
  double beta1, beta2, eps, weight_decay;
  int64_t step_count = 0;
  std::vector<Tensor> m, v;  // aligned with the store's parameter order
  Adam(const nn::ParamStore& ps, const TrainConfig& cfg);
  void step(nn::ParamStore& ps, double lr);
};

struct TrainLogRow {
  int64_t epoch = 0, iter = 0;
  double loss_s1 = 0.0, loss_s2 = 0.0, lr = 0.0;
};

struct TrainResult {
  bool diverged = false;
  int64_t iters = 0;
  int epochs_done = 0;
  std::string last_checkpoint;
  std::vector<TrainLogRow> log;
};

// Deterministic given (seed, single worker): sample order, augmentation, and
// optimizer state all derive from mix(seed, epoch), so a resumed run
// continues bit-identically from an epoch-boundary checkpoint.
TrainResult train(net::BbsModel& model, const std::vector<io::RgbdSample>& data, const TrainConfig& cfg);
TrainResult resume(net::BbsModel& model, const std::vector<io::RgbdSample>& data, const TrainConfig& cfg,
                   const std::string& ckpt_path);

// Checkpoint helpers shared by the trainer and the CLI.
ckpt::Checkpoint make_checkpoint(const net::BbsModel& model, const TrainConfig& cfg, int epochs_done,
                                 int64_t iters, const Adam* opt);
void load_model_checkpoint(const ckpt::Checkpoint& c, net::BbsModel& model, Adam* opt);

}  // namespace bbs::train
